"""Calibration presets: INI files with one section per (owner, scenario, metric).

Schema::

    [preset]             name, optional ``extends = <other preset>``
    [cluster]            capacity
    [git]                webhook_delay_ms
    [nephio]             profile  (downstream reconciler for nephio scenarios)
    [argo] [flux] [csync]
                         namespace, control_plane_pods, sync (webhook|polling),
                         poll_period, poll_lag (s), resources (shared|per-app),
                         base_cpu (millicore), base_mem (MiB)
    [<owner>.<scenario>.<metric>]
                         shape = constant|uniform|truncnormal|lognormal|piecewise
                         plus the shape's parameters (see ``sampling``)

``owner`` is a profile prefix, ``cluster`` (t_healthy default), ``git``
(t_push default) or ``nephio`` (pv, webhook, discovery, hydrate).
``scenario`` may be ``*``. A child preset replaces whole sections of its parent.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .reconcilers import PROFILES, ReconcilerProfile, ProfileError
from .sampling import Distribution, DistributionError, distribution_from_params

PRESET_DIR_ENV = "RECONCILE_BENCH_PRESET_DIR"
BUNDLED_DIR = Path(__file__).with_name("presets")
SCENARIOS = ("single-app", "multi-app", "nephio-single", "nephio-multi")

PROFILE_METRICS = {"t_push", "t_sync", "t_recon", "t_deploy", "t_healthy",
                   "cpu_load", "mem_load", "cpu_instance", "mem_instance"}
NEPHIO_METRICS = {"pv", "webhook", "discovery", "hydrate"}
_OWNER_METRICS = {"cluster": {"t_healthy"}, "git": {"t_push"}, "nephio": NEPHIO_METRICS}


class PresetError(ValueError):
    pass


@dataclass(frozen=True)
class Preset:
    name: str
    profiles: Mapping = field(default_factory=dict)
    nephio: Mapping = field(default_factory=dict)  # (scenario, metric) -> Distribution
    nephio_profile: str = "csync"
    capacity: int = 110
    webhook_delay_ms: int = 0
    source: str = ""

    def profile(self, p: str) -> ReconcilerProfile:
        try:
            return self.profiles[p]
        except KeyError:
            raise ProfileError(f"unknown profile {p!r}; valid profiles are {', '.join(PROFILES)}") from None

    def nephio_dist(self, scenario: str, metric: str) -> Distribution:
        for key in ((scenario, metric), ("*", metric)):
            if key in self.nephio:
                return self.nephio[key]
        raise PresetError(f"preset {self.name!r} has no nephio {metric!r} distribution for {scenario!r}")

    def without_noise(self) -> "Preset":
        return replace(
            self,
            profiles={p: prof.without_noise() for p, prof in self.profiles.items()},
            nephio={k: d.without_noise() for k, d in self.nephio.items()},
        )


def search_path() -> list:
    dirs = []
    env = os.environ.get(PRESET_DIR_ENV)
    if env:
        dirs.extend(Path(p) for p in env.split(os.pathsep) if p)
    dirs.append(BUNDLED_DIR)
    return dirs


def available_presets() -> list:
    names = set()
    for d in search_path():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.ini"))
    return sorted(names)


def find_preset(name: str) -> Path:
    direct = Path(name)
    if direct.suffix == ".ini" and direct.is_file():
        return direct
    for d in search_path():
        candidate = d / f"{name}.ini"
        if candidate.is_file():
            return candidate
    raise PresetError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")


def _read_sections(path: Path, depth: int = 0) -> dict:
    if depth > 8:
        raise PresetError(f"preset inheritance too deep at {path}")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise PresetError(f"cannot parse preset {path}: {exc}") from exc
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    parent = sections.get("preset", {}).get("extends", "").strip()
    if parent:
        base = _read_sections(find_preset(parent), depth + 1)
        base.update(sections)
        sections = base
    return sections


def _num(section: dict, key: str, default, cast=float):
    try:
        return cast(section.get(key, default))
    except (TypeError, ValueError) as exc:
        raise PresetError(f"bad value for {key!r}: {section.get(key)!r}") from exc


def load_preset(name: str) -> Preset:
    path = find_preset(name)
    sections = _read_sections(path)
    meta = sections.get("preset", {})
    dists: dict = {}
    for sec, params in sections.items():
        if sec.count(".") != 2:
            continue
        owner, scenario, metric = sec.split(".")
        if scenario != "*" and scenario not in SCENARIOS:
            raise PresetError(f"[{sec}]: unknown scenario {scenario!r}")
        allowed = PROFILE_METRICS if owner in PROFILES else _OWNER_METRICS.get(owner)
        if allowed is None:
            raise PresetError(f"[{sec}]: unknown owner {owner!r}")
        if metric not in allowed:
            raise PresetError(f"[{sec}]: metric {metric!r} not valid for {owner!r}")
        try:
            dists.setdefault(owner, {})[(scenario, metric)] = distribution_from_params(params)
        except DistributionError as exc:
            raise PresetError(f"[{sec}]: {exc}") from exc

    fallbacks = {**dists.get("git", {}), **dists.get("cluster", {})}
    profiles = {}
    for p in PROFILES:
        if p not in sections:
            continue
        s = sections[p]
        try:
            profiles[p] = ReconcilerProfile(
                prefix=p,
                namespace=s.get("namespace", ""),
                control_plane_pods=_num(s, "control_plane_pods", 0, int),
                sync=s.get("sync", "webhook"),
                poll_period=_num(s, "poll_period", 0.0),
                poll_lag=_num(s, "poll_lag", 0.0),
                resources=s.get("resources", "shared"),
                base_cpu=_num(s, "base_cpu", 0.0),
                base_mem=_num(s, "base_mem", 0.0),
                distributions=dists.get(p, {}),
                fallbacks=fallbacks,
            )
        except ProfileError as exc:
            raise PresetError(f"[{p}]: {exc}") from exc
    if not profiles:
        raise PresetError(f"preset {path} defines no reconciler profiles")

    nephio_profile = sections.get("nephio", {}).get("profile", "csync")
    if nephio_profile not in profiles:
        raise PresetError(f"[nephio] profile {nephio_profile!r} is not defined in the preset")
    return Preset(
        name=meta.get("name", path.stem),
        profiles=profiles,
        nephio=dists.get("nephio", {}),
        nephio_profile=nephio_profile,
        capacity=_num(sections.get("cluster", {}), "capacity", 110, int),
        webhook_delay_ms=_num(sections.get("git", {}), "webhook_delay_ms", 0, int),
        source=str(path),
    )


def resolve(preset: "Preset | str", noise_free: bool = False) -> Preset:
    p = load_preset(preset) if isinstance(preset, str) else preset
    return p.without_noise() if noise_free else p


__all__ = ["Preset", "PresetError", "load_preset", "available_presets", "resolve", "SCENARIOS",
           "PRESET_DIR_ENV"]
