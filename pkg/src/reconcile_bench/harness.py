"""Four-phase experiment loop, KPI records and their aggregation.

Phase 1 renders and pushes desired states, phase 2 binds reconcilers,
phase 3 measures the KPI timeline and phase 4 garbage-collects the cluster.
Every (k, rep) iteration runs on its own simulator; the cluster, repository
and manifest store of a worker persist across iterations and must return to
their baseline after each cleanup.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .cluster import CapacityError, ClusterError, SimulatedCluster
from .git import GitRepository
from .nephio import NephioModel, NephioPipeline
from .presets import SCENARIOS, Preset, resolve
from .reconcilers import Reconciler, ReconcilerProfile, ReconcilerSpec, generate_reconcilers
from .sampling import RandomSource, StreamSet
from .sim import EventKind, Simulator, to_seconds

log = logging.getLogger(__name__)

TIMING_METRICS = ("t_push", "t_sync", "t_recon", "t_deploy", "t_healthy")
UTIL_METRICS = ("u_cpu", "u_mem")
NEPHIO_METRICS = ("t_inproc", "t_hydrate", "t_oh")
RECORD_METRICS = TIMING_METRICS + UTIL_METRICS + NEPHIO_METRICS
SUMMED = set(TIMING_METRICS + NEPHIO_METRICS)  # summed over i = 1..k; utilisation is averaged

DEFAULT_PHASE_TIMEOUT_S = 3600.0
DEFAULT_MAX = {"single-app": 100, "multi-app": 90, "nephio-single": 90, "nephio-multi": 90}
NEPHIO_DOWNSTREAM = {"nephio-single": "single-app", "nephio-multi": "multi-app"}


class ConfigError(ValueError):
    """Invalid experiment configuration (detected before any event runs)."""


class ManifestError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentParams:
    p: str
    m: int
    r: int
    c: int

    def __post_init__(self):
        if not re.fullmatch(r"[a-z]+", self.p or ""):
            raise ConfigError(f"prefix must be non-empty lowercase letters, got {self.p!r}")
        for name in ("m", "r", "c"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.c > self.m:
            raise ConfigError(f"step c={self.c} exceeds max m={self.m}")

    @property
    def grid(self) -> list:
        return list(range(1, self.m + 1, self.c))

    @property
    def iterations(self) -> int:
        return len(self.grid) * self.r


# -- Phase 1: manifests -----------------------------------------------------

S_TEMPLATE = """apiVersion: v1
kind: Namespace
metadata:
  name: {namespace}
---
apiVersion: apps/v1
kind: Deployment
metadata:
  name: {name}
  namespace: {namespace}
  labels:
    app: {label}
spec:
  replicas: {replicas}
  selector:
    matchLabels:
      app: {label}
  template:
    metadata:
      labels:
        app: {label}
    spec:
      containers:
        - name: nginx
          image: nginx:1.25-alpine
          ports:
            - containerPort: 80
          resources:
            requests:
              cpu: 10m
              memory: 16Mi
"""


@dataclass(frozen=True)
class DesiredState:
    name: str
    namespace: str
    label: str
    replicas: int
    path: str  # directory under d_target

    @property
    def manifest_path(self) -> str:
        return f"{self.path}/deployment.yaml"

    def render(self) -> str:
        return S_TEMPLATE.format(name=self.name, namespace=self.namespace, label=self.label,
                                 replicas=self.replicas)


class MemoryStore:
    """Manifest store backed by a dict; the default for simulated runs."""

    def __init__(self):
        self.files: dict = {}

    def exists(self, prefix: str) -> bool:
        prefix = prefix.rstrip("/") + "/"
        return any(p.startswith(prefix) for p in self.files)

    def write(self, path: str, text: str) -> None:
        self.files[path] = text

    def remove(self, prefix: str) -> int:
        prefix = prefix.rstrip("/") + "/"
        gone = [p for p in self.files if p.startswith(prefix)]
        for p in gone:
            del self.files[p]
        return len(gone)


class DiskStore:
    def __init__(self, root):
        self.root = Path(root)

    def exists(self, prefix: str) -> bool:
        d = self.root / prefix
        return d.is_dir() and any(d.iterdir())

    def write(self, path: str, text: str) -> None:
        target = self.root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8", newline="\n")

    def remove(self, prefix: str) -> int:
        import shutil

        d = self.root / prefix
        if not d.exists():
            return 0
        n = sum(1 for f in d.rglob("*") if f.is_file())
        shutil.rmtree(d)
        return n


def generate_manifests(n: int, p: str, d_target: str, store=None, replicas: int = 1) -> list:
    """Render ``n`` desired states into ``d_target/{p}-app-{i}/``."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    store = MemoryStore() if store is None else store
    base = d_target.strip("/")
    states = []
    for i in range(1, n + 1):
        path = f"{base}/{p}-app-{i}" if base else f"{p}-app-{i}"
        if store.exists(path):
            raise ManifestError(f"{path} already holds manifests from an uncleaned run")
        s = DesiredState(f"{p}-app-{i}", f"{p}-ns-{i}", f"{p}-label-{i}", replicas, path)
        store.write(s.manifest_path, s.render())
        states.append(s)
    return states


# -- records and aggregation ------------------------------------------------------


@dataclass(frozen=True)
class KpiRecord:
    """One iteration's K_attr: timings summed over i = 1..k, utilisation averaged.

    ``None`` marks a metric the scenario does not measure.
    """

    scenario: str
    profile: str
    k: int
    rep: int
    t_push: Optional[float] = None
    t_sync: Optional[float] = None
    t_recon: Optional[float] = None
    t_deploy: Optional[float] = None
    t_healthy: Optional[float] = None
    u_cpu: Optional[float] = None
    u_mem: Optional[float] = None
    t_inproc: Optional[float] = None
    t_hydrate: Optional[float] = None
    t_oh: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        for m in RECORD_METRICS:
            v = getattr(self, m)
            if v is not None and not v >= 0:
                raise ValueError(f"{m} must be >= 0, got {v}")

    @classmethod
    def from_units(cls, scenario, profile, k, rep, units: Mapping[str, Sequence[float]], seed=0) -> "KpiRecord":
        """Fold per-unit values (one entry per i) into the per-iteration inner terms."""
        vals = {}
        for m, xs in units.items():
            if m not in RECORD_METRICS:
                raise KeyError(f"unknown metric {m!r}")
            if xs is None:
                continue
            xs = list(xs)
            if len(xs) != k:
                raise ValueError(f"{m}: expected {k} unit values, got {len(xs)}")
            vals[m] = math.fsum(xs) if m in SUMMED else math.fsum(xs) / k
        return cls(scenario, profile, k, rep, seed=seed, **vals)

    def value(self, metric: str) -> Optional[float]:
        return getattr(self, metric)

    def standardised(self, metric: str) -> Optional[float]:
        """Per-unit value (divided by the scale variable k)."""
        v = getattr(self, metric)
        return None if v is None else v / self.k


@dataclass(frozen=True)
class AggregatedKpi:
    scenario: str
    profile: str
    k: int
    n_reps: int
    values: Mapping = field(default_factory=dict)  # metric -> mean over reps or None

    def __getitem__(self, metric):
        return self.values[metric]


def aggregate(records: Sequence[KpiRecord], ep: Optional[ExperimentParams] = None) -> list:
    """Per k, the mean over repetitions of each record's inner term (sum or mean over i)."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.scenario, rec.profile, rec.k), []).append(rec)
    if ep is not None:
        stray = sorted({k for (_, _, k) in groups} - set(ep.grid))
        if stray:
            raise ValueError(f"records at k={stray} are outside the grid of {ep}")
    out = []
    for (scenario, profile, k), recs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        recs = sorted(recs, key=lambda r: r.rep)
        values = {}
        for m in RECORD_METRICS:
            xs = [r.value(m) for r in recs]
            if all(x is None for x in xs):
                values[m] = None
            elif any(x is None for x in xs):
                raise ValueError(f"metric {m} missing in some repetitions at k={k}")
            else:
                values[m] = math.fsum(xs) / len(xs)
        out.append(AggregatedKpi(scenario, profile, k, len(recs), values))
    return out


# -- Phases 2-4 ---------------------------------------------------------------


@dataclass
class IterationInfo:
    k: int
    rep: int
    ok: bool
    reason: str = ""
    state_line: str = ""
    state_hash: str = ""
    baseline_hash: str = ""
    cp_instances: Optional[int] = None
    n_apps: int = 0
    max_pods: int = 0
    final_ms: int = 0
    trace: list = field(default_factory=list)
    # per unit: (generate, push, webhook, sync, reconcile, deploy, healthy, sample, cleanup) in ms
    milestones: list = field(default_factory=list)
    merges: int = 0
    downstream_chains: int = 0


@dataclass
class ScenarioResult:
    scenario: str
    profile: str
    seed: int
    params: ExperimentParams
    records: list
    iterations: list

    @property
    def failures(self) -> int:
        return sum(1 for it in self.iterations if not it.ok)


class Testbed:
    """Per-worker cluster, repository and manifest store with one control plane."""

    def __init__(self, profile: ReconcilerProfile, capacity: int = 110, webhook_delay_ms: int = 0,
                 store=None, d_target: str = "apps", token: str = "pat"):
        self.profile = profile
        self.cluster = SimulatedCluster(capacity)
        self.cluster.install_control_plane(profile)
        self.repo = GitRepository("ssot", token=token, webhook_delay_ms=webhook_delay_ms)
        self.store = MemoryStore() if store is None else store
        self.d_target = d_target
        self.token = token
        self.baseline_hash = self.cluster.state_hash()

    def cleanup(self) -> str:
        p = self.profile.prefix
        self.cluster.cleanup(p)
        self.repo.unsubscribe(f"{p}-")
        self.repo.remove("main", self.d_target)
        self.store.remove(self.d_target)
        for b in [b for b in self.repo.branches if b != "main"]:
            self.repo.delete_branch(b)
        return self.cluster.state_hash()


def check_capacity(scenario: str, k: int, profile: ReconcilerProfile, capacity: int) -> None:
    if scenario in ("single-app", "multi-app"):
        need = k + profile.control_plane_pods
        if need > capacity:
            raise CapacityError(
                f"{scenario} at k={k} needs {k} app pods + {profile.control_plane_pods} "
                f"{profile.prefix} control-plane pods = {need} > capacity {capacity}"
            )


def _run_workload(tb: Testbed, scenario: str, k: int, rep: int, seed: int, preset: Preset,
                  timeout_ms: int, trace: bool) -> tuple:
    profile = tb.profile
    p = profile.prefix
    streams = StreamSet(RandomSource(seed, (scenario, p, k, rep)))
    sim = Simulator(trace=[] if trace else None)
    sim.add_observer(lambda s: tb.cluster.check_invariants(s))
    single = scenario == "single-app"
    n_apps, replicas = (1, k) if single else (k, 1)
    ctx: dict = {"states": [], "recs": [], "created": {}, "healthy": {}, "sample": None,
                 "push_ms": None, "sample_ms": None, "cleanup_ms": None}

    def on_created(rec):
        ctx["created"][rec.name] = sim.now

    def on_healthy(rec):
        ctx["healthy"][rec.name] = sim.now
        if len(ctx["healthy"]) == n_apps:
            sim.after(0, EventKind.RESOURCE_SAMPLE, sample, label=profile.namespace)

    def sample():
        ctx["sample_ms"] = sim.now
        ctx["sample"] = tb.cluster.top(profile.namespace, profile, n_apps, streams, sim=sim, scenario=scenario)
        ctx["cp_instances"] = len(tb.cluster.instances(profile.namespace))
        sim.after(0, EventKind.GENERIC, cleanup, label="cleanup")

    def cleanup():
        ctx["cleanup_ms"] = sim.now
        ctx["hash"] = tb.cleanup()

    def on_reconciled(r: Reconciler, drift):
        state = ctx["states"][r.spec.index - 1]
        tb.cluster.apply_deployment(state, profile, k, streams, sim=sim, scenario=scenario,
                                    on_created=on_created, on_healthy=on_healthy)

    def generate():
        ctx["states"] = generate_manifests(n_apps, p, tb.d_target, tb.store, replicas)
        specs = generate_reconcilers(n_apps, p, {"repo-dir": tb.d_target, "git-branch": "main"})
        for spec in specs:
            tb.cluster.bind(spec, profile)
            ctx["recs"].append(Reconciler(spec, profile, tb.repo, sim, streams, scenario=scenario, k=k,
                                          token=tb.token, on_reconciled=on_reconciled))
        changes = {s.manifest_path: s.render() for s in ctx["states"]}
        _, t_push = tb.repo.push("main", changes, streams["t_push"], token=tb.token,
                                 latency=profile.dist(scenario, "t_push"), sim=sim)
        ctx["push_ms"] = sim.now + int(round(t_push * 1000))

    sim.at(0, EventKind.GENERIC, generate, label="generate")
    sim.run_until_idle()
    if "hash" not in ctx:  # the iteration stalled before the sample phase
        ctx["hash"] = tb.cleanup()

    info = IterationInfo(k, rep, True, state_hash=ctx["hash"], baseline_hash=tb.baseline_hash,
                         state_line=tb.cluster.state_line(), cp_instances=ctx.get("cp_instances"),
                         n_apps=n_apps, max_pods=tb.cluster.max_pods_seen, final_ms=sim.now,
                         trace=sim.trace or [])
    record = _assemble(ctx, scenario, p, k, rep, seed, single, timeout_ms, info)
    return record, info


def _assemble(ctx, scenario, p, k, rep, seed, single, timeout_ms, info) -> Optional[KpiRecord]:
    def fail(reason):
        info.ok = False
        info.reason = reason
        return None

    recs = ctx["recs"]
    units = {m: [] for m in TIMING_METRICS}
    push_ms = ctx["push_ms"]
    if push_ms is None:
        return fail("push never landed")
    for r, state in zip(recs, ctx["states"]):
        if r.webhook_at is None or r.synced_at is None or r.reconciled_at is None:
            return fail(f"{r.spec.name} never reconciled")
        created = ctx["created"].get(state.name)
        healthy = ctx["healthy"].get(state.name)
        if created is None:
            return fail(f"{state.name} never created")
        if healthy is None:
            return fail(f"{state.name} never became healthy")
        info.milestones.append((0, push_ms, r.webhook_at, r.synced_at, r.reconciled_at, created, healthy,
                                ctx["sample_ms"], ctx["cleanup_ms"]))
        phases = (push_ms, r.synced_at - r.webhook_at, r.reconciled_at - r.synced_at,
                  created - r.reconciled_at, healthy - created)
        if max(phases) > timeout_ms:
            return fail(f"{state.name} exceeded the {to_seconds(timeout_ms)} s phase timeout")
        for m, v in zip(TIMING_METRICS, phases):
            units[m].append(to_seconds(v))
    if ctx["sample"] is None:
        return fail("no resource sample")
    if single:
        # k replicas share one deployment's push/sync/recon/deploy; health is per replica
        units = {m: units[m] * k for m in TIMING_METRICS}
        units["t_healthy"] = None
    cpu, mem = ctx["sample"].u_cpu, ctx["sample"].u_mem
    units["u_cpu"] = None if single else [cpu] * k
    units["u_mem"] = None if single else [mem] * k
    if info.state_hash != info.baseline_hash:
        return fail("cluster state after cleanup differs from baseline")
    return KpiRecord.from_units(scenario, p, k, rep, units, seed=seed)


def _run_nephio(tb: Testbed, scenario: str, k: int, rep: int, seed: int, preset: Preset,
                timeout_ms: int, trace: bool) -> tuple:
    profile = tb.profile
    p = profile.prefix
    streams = StreamSet(RandomSource(seed, (scenario, p, k, rep)))
    sim = Simulator(trace=[] if trace else None)
    sim.add_observer(lambda s: tb.cluster.check_invariants(s))
    model = NephioModel.from_preset(preset, scenario)
    mode = "single" if scenario == "nephio-single" else "multi"
    pipe = NephioPipeline(model, sim, streams, n=k, mode=mode, dpr=tb.repo, root=tb.d_target)
    downstream = NEPHIO_DOWNSTREAM[scenario]
    recs = []

    def bind():
        for i in range(1, k + 1):
            spec = ReconcilerSpec(f"{p}-rec-{i}", f"{p}-ns-{i}", "https://kubernetes.default.svc", "main",
                                  pipe.prefix(i), p)
            tb.cluster.bind(spec, profile)
            recs.append(Reconciler(spec, profile, tb.repo, sim, streams, scenario=downstream, k=k, token=tb.token))
        pipe.start()

    sim.at(0, EventKind.GENERIC, bind, label="generate")
    sim.run_until_idle()
    cp_instances = len(tb.cluster.instances(profile.namespace))
    chains = sum(r.chains for r in recs)
    state_hash = tb.cleanup()
    info = IterationInfo(k, rep, True, state_hash=state_hash, baseline_hash=tb.baseline_hash,
                         state_line=tb.cluster.state_line(), cp_instances=cp_instances, n_apps=k,
                         max_pods=tb.cluster.max_pods_seen, final_ms=sim.now, trace=sim.trace or [],
                         merges=pipe.merges, downstream_chains=chains)
    if not pipe.done():
        info.ok, info.reason = False, "intent never published"
        return None, info
    if any(t.t_inproc_ms > timeout_ms for t in pipe.timings):
        info.ok, info.reason = False, "intent exceeded the phase timeout"
        return None, info
    if state_hash != tb.baseline_hash:
        info.ok, info.reason = False, "cluster state after cleanup differs from baseline"
        return None, info
    units = {
        "t_inproc": [t.t_inproc for t in pipe.timings],
        "t_hydrate": [t.t_hydrate for t in pipe.timings],
        "t_oh": [t.t_oh for t in pipe.timings],
    }
    return KpiRecord.from_units(scenario, p, k, rep, units, seed=seed), info


def _run_chunk(args) -> list:
    scenario, prefix, preset, seed, tasks, timeout_ms, trace = args
    tb = Testbed(preset.profile(prefix), preset.capacity, preset.webhook_delay_ms,
                 d_target="deploy" if scenario.startswith("nephio") else "apps")
    runner = _run_nephio if scenario.startswith("nephio") else _run_workload
    return [runner(tb, scenario, k, rep, seed, preset, timeout_ms, trace) for k, rep in tasks]


def _chunks(tasks: list, n: int) -> list:
    n = max(1, min(n, len(tasks)))
    size, rem = divmod(len(tasks), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < rem else 0)
        out.append(tasks[start:end])
        start = end
    return out


def run_scenario(ep: ExperimentParams, scenario: str, preset="table3", seed: int = 42, *,
                 parallel: int = 1, trace: bool = False, noise_free: bool = False,
                 timeout_s: float = DEFAULT_PHASE_TIMEOUT_S) -> ScenarioResult:
    """Run every (k, rep) iteration of ``scenario`` for the profile ``ep.p``."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; valid scenarios are {', '.join(SCENARIOS)}")
    preset = resolve(preset, noise_free)
    try:
        profile = preset.profile(ep.p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for k in ep.grid:
        check_capacity(scenario, k, profile, preset.capacity)
    if parallel < 1:
        raise ConfigError(f"parallel must be >= 1, got {parallel}")
    tasks = [(k, rep) for k in ep.grid for rep in range(1, ep.r + 1)]
    timeout_ms = int(round(timeout_s * 1000))
    jobs = [(scenario, ep.p, preset, seed, chunk, timeout_ms, trace) for chunk in _chunks(tasks, parallel)]
    if len(jobs) == 1:
        results = _run_chunk(jobs[0])
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = [r for part in pool.map(_run_chunk, jobs) for r in part]
    results.sort(key=lambda ri: (ri[1].k, ri[1].rep))
    records = [rec for rec, _ in results if rec is not None]
    iterations = [info for _, info in results]
    failed = sum(1 for it in iterations if not it.ok)
    if failed:
        log.warning("%s/%s: %d of %d iterations failed and were excluded", scenario, ep.p, failed, len(tasks))
    return ScenarioResult(scenario, ep.p, seed, ep, records, iterations)


__all__ = [
    "AggregatedKpi",
    "ConfigError",
    "DesiredState",
    "DiskStore",
    "ExperimentParams",
    "KpiRecord",
    "MemoryStore",
    "RECORD_METRICS",
    "ScenarioResult",
    "Testbed",
    "aggregate",
    "generate_manifests",
    "run_scenario",
]
