"""Seeded random streams and the latency/utilisation distributions built on them."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats


class DistributionError(ValueError):
    """Malformed distribution parameters (raised at preset load time)."""


def _label_key(label) -> int:
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


class RandomSource:
    """A reproducible random stream identified by ``(seed, stream labels)``.

    Two sources with the same seed and labels yield identical draws; sources
    with different labels are derived through ``SeedSequence`` spawn keys and
    share no generator state.
    """

    def __init__(self, seed: int, stream: Sequence = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        self.seed = int(seed)
        self.stream = tuple(str(s) for s in stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_label_key(s) for s in self.stream))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *labels) -> "RandomSource":
        return RandomSource(self.seed, self.stream + tuple(labels))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={'/'.join(self.stream)!r})"


class StreamSet:
    """Lazily created per-metric child streams of one root source.

    Adding a metric never perturbs the draws of the others.
    """

    def __init__(self, root: RandomSource):
        self.root = root
        self._streams: dict = {}

    def __getitem__(self, metric: str) -> RandomSource:
        try:
            return self._streams[metric]
        except KeyError:
            src = self._streams[metric] = self.root.child(metric)
            return src


class Distribution:
    """Base class. ``k`` is the scale index for k-dependent shapes."""

    shape = "abstract"

    def sample(self, rng: RandomSource, k: Optional[int] = None) -> float:
        raise NotImplementedError

    def center(self, k: Optional[int] = None) -> float:
        """The value a zero-noise model produces."""
        raise NotImplementedError

    def without_noise(self) -> "Distribution":
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Distribution):
    value: float
    shape = "constant"

    def __post_init__(self):
        if not self.value >= 0:
            raise DistributionError(f"constant must be >= 0, got {self.value}")

    def sample(self, rng, k=None):
        return float(self.value)

    def center(self, k=None):
        return float(self.value)

    def without_noise(self):
        return self


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float
    shape = "uniform"

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi):
            raise DistributionError(f"uniform requires 0 <= lo <= hi, got ({self.lo}, {self.hi})")

    def sample(self, rng, k=None):
        return float(rng.generator.uniform(self.lo, self.hi))

    def center(self, k=None):
        return 0.5 * (self.lo + self.hi)

    def without_noise(self):
        return Constant(self.center())


@dataclass(frozen=True)
class TruncatedNormal(Distribution):
    mu: float
    sigma: float
    lo: float = 0.0
    hi: float = math.inf
    shape = "truncnormal"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DistributionError(f"sigma must be >= 0, got {self.sigma}")
        if not (0 <= self.lo <= self.hi):
            raise DistributionError(f"truncation requires 0 <= lo <= hi, got ({self.lo}, {self.hi})")

    def sample(self, rng, k=None):
        if self.sigma == 0:
            return self.center()
        g = rng.generator
        for _ in range(64):
            x = self.mu + self.sigma * g.standard_normal()
            if self.lo <= x <= self.hi:
                return float(x)
        # low acceptance region: inverse CDF
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        x = stats.truncnorm.ppf(g.random(), a, b, loc=self.mu, scale=self.sigma)
        return float(min(max(x, self.lo), self.hi))

    def center(self, k=None):
        return float(min(max(self.mu, self.lo), self.hi))

    def without_noise(self):
        return Constant(self.center())


@dataclass(frozen=True)
class LogNormal(Distribution):
    """Right-skewed latency shape, parameterised by its median."""

    median: float
    sigma_log: float
    shape = "lognormal"

    def __post_init__(self):
        if not (self.median > 0 and self.sigma_log >= 0):
            raise DistributionError("lognormal requires median > 0, sigma_log >= 0")

    def sample(self, rng, k=None):
        return float(self.median * math.exp(self.sigma_log * rng.generator.standard_normal()))

    def center(self, k=None):
        return float(self.median)

    def mean(self) -> float:
        return self.median * math.exp(0.5 * self.sigma_log**2)

    def without_noise(self):
        return Constant(self.center())


@dataclass(frozen=True)
class Piecewise(Distribution):
    """Piecewise-linear curve in k plus additive normal noise, clipped to [lo, hi].

    Outside the outermost points the end segments are extended linearly.
    """

    points: tuple
    noise_sd: float = 0.0
    lo: float = 0.0
    hi: float = math.inf
    shape = "piecewise"

    def __post_init__(self):
        if not self.points:
            raise DistributionError("piecewise requires at least one point")
        xs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DistributionError(f"piecewise points must have strictly increasing k: {xs}")
        if not self.noise_sd >= 0:
            raise DistributionError("noise_sd must be >= 0")
        if not (0 <= self.lo <= self.hi):
            raise DistributionError("piecewise requires 0 <= lo <= hi")

    def curve(self, k: float) -> float:
        pts = self.points
        if len(pts) == 1:
            return float(pts[0][1])
        if k <= pts[0][0]:
            (x0, y0), (x1, y1) = pts[0], pts[1]
        elif k >= pts[-1][0]:
            (x0, y0), (x1, y1) = pts[-2], pts[-1]
        else:
            i = next(i for i in range(1, len(pts)) if k <= pts[i][0])
            (x0, y0), (x1, y1) = pts[i - 1], pts[i]
        return float(y0 + (y1 - y0) * (k - x0) / (x1 - x0))

    def _clip(self, x):
        return float(min(max(x, self.lo), self.hi))

    def sample(self, rng, k=None):
        base = self.curve(1 if k is None else k)
        if self.noise_sd == 0:
            return self._clip(base)
        return self._clip(base + self.noise_sd * rng.generator.standard_normal())

    def center(self, k=None):
        return self._clip(self.curve(1 if k is None else k))

    def without_noise(self):
        return Piecewise(self.points, 0.0, self.lo, self.hi)


def _float(params: Mapping[str, str], key: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise DistributionError(f"missing parameter {key!r}")
        return default
    try:
        return float(params[key])
    except ValueError as exc:
        raise DistributionError(f"parameter {key!r} is not a number: {params[key]!r}") from exc


def parse_points(text: str) -> tuple:
    pts = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            x, y = chunk.split(":")
            pts.append((float(x), float(y)))
        except ValueError as exc:
            raise DistributionError(f"bad piecewise point {chunk!r}; expected 'k:value'") from exc
    return tuple(pts)


def distribution_from_params(params: Mapping[str, str]) -> Distribution:
    """Build a distribution from a preset section (string key/values)."""
    shape = params.get("shape")
    if shape == "constant":
        return Constant(_float(params, "value"))
    if shape == "uniform":
        return Uniform(_float(params, "lo"), _float(params, "hi"))
    if shape == "truncnormal":
        return TruncatedNormal(
            _float(params, "mu"), _float(params, "sigma"), _float(params, "lo", 0.0), _float(params, "hi", math.inf)
        )
    if shape == "lognormal":
        return LogNormal(_float(params, "median"), _float(params, "sigma_log"))
    if shape == "piecewise":
        if "points" not in params:
            raise DistributionError("piecewise requires 'points'")
        return Piecewise(
            parse_points(params["points"]),
            _float(params, "noise_sd", 0.0),
            _float(params, "lo", 0.0),
            _float(params, "hi", math.inf),
        )
    raise DistributionError(f"unknown distribution shape {shape!r}")
