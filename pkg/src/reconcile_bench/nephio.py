"""Configuration-as-Data pipeline: dry packages, package variants, hydration.

Each intent goes through PV instantiation, webhook establishment and draft
discovery (the overhead ``t_oh``), then hydration: template fill, a
``Draft/<pkg>`` branch in the deployment repository, the four lifecycle
states and a merge into ``main`` (``t_hydrate``). ``t_inproc`` is their sum.

In ``multi-package`` mode all PVs are instantiated at the same instant and
the bring-up window is shared among the intents; ``single-replica-scaled``
processes intents one after the other without overlap.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional

from .git import GitRepository
from .sampling import Distribution, RandomSource, StreamSet
from .sim import EventKind, Simulator, to_ms

LIFECYCLE = ("draft", "proposed", "approved", "published")
MODES = {"single": "single-replica-scaled", "multi": "multi-package"}
_SLOT = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

DEFAULT_TEMPLATE = """apiVersion: workload.nephio.org/v1alpha1
kind: NFDeployment
metadata:
  name: {{name}}
  namespace: {{namespace}}
spec:
  provider: free5gc.nephio.org
  site: {{site}}
  capacity:
    maxSessions: {{sessions}}
"""


class NephioError(Exception):
    pass


class HydrationError(NephioError):
    """Hydration could not fill the template; the revision stays in draft."""

    def __init__(self, msg: str, revision: "PackageRevision"):
        super().__init__(msg)
        self.revision = revision


class LifecycleError(NephioError):
    pass


def template_slots(text: str) -> list:
    return sorted(set(_SLOT.findall(text)))


def fill_template(text: str, config: Mapping[str, object]) -> str:
    missing = [s for s in template_slots(text) if s not in config]
    if missing:
        raise KeyError(", ".join(missing))
    return _SLOT.sub(lambda m: str(config[m.group(1)]), text)


@dataclass(frozen=True)
class DryPackage:
    name: str
    template: str = DEFAULT_TEMPLATE
    revision: str = "v1"

    def __post_init__(self):
        if not self.slots:
            raise NephioError(f"dry package {self.name!r} has no parameter slots")

    @property
    def slots(self) -> list:
        return template_slots(self.template)


@dataclass
class PackageVariant:
    source: DryPackage
    target: str  # DPR path
    state: str = "instantiating"  # or "tracking"


class PackageVariantSet:
    """Tracks dry-package revisions; one variant per (package, target)."""

    def __init__(self, name: str = "pvs"):
        self.name = name
        self.variants: dict = {}

    def add(self, pkg: DryPackage, target: str) -> PackageVariant:
        key = (pkg.name, target)
        if key in self.variants:
            raise NephioError(f"package variant for {pkg.name!r} -> {target!r} already exists")
        pv = self.variants[key] = PackageVariant(pkg, target)
        return pv

    def __len__(self) -> int:
        return len(self.variants)


@dataclass(frozen=True)
class PackageRevision:
    package: str
    lifecycle: str = "draft"
    payload: str = ""
    t_hydrate_ms: Optional[int] = None
    t_oh_ms: Optional[int] = None

    @property
    def unfilled(self) -> list:
        return template_slots(self.payload)


def advance_lifecycle(rev: PackageRevision) -> PackageRevision:
    """Move ``rev`` exactly one step along draft -> proposed -> approved -> published."""
    if rev.lifecycle not in LIFECYCLE:
        raise LifecycleError(f"unknown lifecycle state {rev.lifecycle!r}")
    i = LIFECYCLE.index(rev.lifecycle)
    if i == len(LIFECYCLE) - 1:
        raise LifecycleError(f"package {rev.package!r} is already published")
    nxt = LIFECYCLE[i + 1]
    if nxt == "published" and (not rev.payload or rev.unfilled):
        raise LifecycleError(f"package {rev.package!r} cannot be published with unfilled slots")
    return replace(rev, lifecycle=nxt)


@dataclass(frozen=True)
class IntentTiming:
    """Per-intent timing, stored in integer ms so the identity is exact."""

    package: str
    t_hydrate_ms: int
    t_oh_ms: int

    @property
    def t_inproc_ms(self) -> int:
        return self.t_hydrate_ms + self.t_oh_ms

    @property
    def t_hydrate(self) -> float:
        return self.t_hydrate_ms / 1000.0

    @property
    def t_oh(self) -> float:
        return self.t_oh_ms / 1000.0

    @property
    def t_inproc(self) -> float:
        return self.t_inproc_ms / 1000.0


@dataclass(frozen=True)
class NephioModel:
    pv: Distribution
    webhook: Distribution
    discovery: Distribution
    hydrate: Distribution

    @classmethod
    def from_preset(cls, preset, scenario: str = "nephio-multi") -> "NephioModel":
        return cls(*(preset.nephio_dist(scenario, m) for m in ("pv", "webhook", "discovery", "hydrate")))

    def without_noise(self) -> "NephioModel":
        return NephioModel(*(d.without_noise() for d in (self.pv, self.webhook, self.discovery, self.hydrate)))


def _split_ms(total: int, n: int) -> list:
    """Integer shares of ``total`` that sum to it exactly."""
    q, rem = divmod(total, n)
    return [q + (1 if i < rem else 0) for i in range(n)]


def _step_ms(total: int) -> list:
    # draft->proposed, proposed->approved, approved->published
    q, rem = divmod(total, 3)
    return [q, q, q + rem]


def hydrate(pkg: DryPackage, config: Mapping[str, object], repo: GitRepository,
            rng: Optional[RandomSource] = None, *, sim: Simulator, duration: Optional[Distribution] = None,
            duration_ms: Optional[int] = None, path: Optional[str] = None,
            on_published: Optional[Callable[[PackageRevision], None]] = None,
            on_step: Optional[Callable[[PackageRevision], None]] = None) -> PackageRevision:
    """Fill ``pkg`` with ``config`` and walk it to published on ``sim``'s timeline.

    Creates ``Draft/<pkg>`` in ``repo``, commits the hydrated payload there,
    schedules the lifecycle steps and merges into ``main`` at publish time.
    Returns the draft revision; the published one is passed to ``on_published``.
    """
    rev = PackageRevision(pkg.name)
    try:
        payload = fill_template(pkg.template, config)
    except KeyError as exc:
        raise HydrationError(f"package {pkg.name!r} is missing parameter values: {exc.args[0]}", rev) from None
    if duration_ms is None:
        if duration is None or rng is None:
            raise NephioError("hydration needs a duration or a distribution and a random source")
        duration_ms = to_ms(duration.sample(rng))
    branch = f"Draft/{pkg.name}"
    path = path or f"{pkg.name}/package.yaml"
    repo.create_branch(branch, "main")
    repo.commit(branch, {path: payload})
    start = sim.now
    rev = replace(rev, payload=payload)
    state = {"rev": rev}
    label = pkg.name

    def step(names):
        current = advance_lifecycle(state["rev"])
        if current.lifecycle == "published":
            repo.merge(branch, "main", sim)
            repo.delete_branch(branch)
            current = replace(current, t_hydrate_ms=sim.now - start)
        state["rev"] = current
        if on_step is not None:
            on_step(current)
        if names:
            delay, kind = names[0]
            sim.after(delay, EventKind.HYDRATION_STEP, step, names[1:], label=f"{kind}:{label}")
        elif on_published is not None:
            on_published(current)

    d = _step_ms(int(duration_ms))
    plan = [(d[1], "approved"), (d[2], "merge")]
    sim.after(d[0], EventKind.HYDRATION_STEP, step, plan, label=f"proposed:{label}")
    return rev


class NephioPipeline:
    """Event-driven processing of ``n`` intents against a deployment repository."""

    def __init__(self, model: NephioModel, sim: Simulator, streams: StreamSet, *, n: int, mode: str,
                 dpr: Optional[GitRepository] = None, bpr: Optional[GitRepository] = None,
                 root: str = "deploy", config_for: Optional[Callable[[int], Mapping]] = None,
                 on_published: Optional[Callable[[int, PackageRevision], None]] = None):
        if n < 1:
            raise NephioError(f"need at least one intent, got n={n}")
        mode = MODES.get(mode, mode)
        if mode not in MODES.values():
            raise NephioError(f"unknown nephio mode {mode!r}; use single or multi")
        self.model, self.sim, self.n, self.mode = model, sim, n, mode
        self.dpr = dpr if dpr is not None else GitRepository("dpr")
        self.bpr = bpr if bpr is not None else GitRepository("bpr")
        self.root = root.strip("/")
        self.config_for = config_for or (lambda i: {})
        self.on_published = on_published
        self.pvs = PackageVariantSet()
        self.packages = [DryPackage(f"intent-{i}") for i in range(1, n + 1)]
        self.bpr.commit("main", {f"{p.name}/Kptfile": p.template for p in self.packages})
        for p in self.packages:
            self.pvs.add(p, self.path(p))

        # every draw is taken up front, in intent order
        def draws(metric, dist):
            return [to_ms(dist.sample(streams[metric])) for _ in range(n)]

        self.pv_ms = draws("pv", model.pv)
        self.webhook_ms = draws("webhook", model.webhook)
        self.discovery_ms = draws("discovery", model.discovery)
        self.hydrate_ms = draws("hydrate", model.hydrate)
        if self.mode == "multi-package":
            self.pv_share_ms = _split_ms(max(self.pv_ms), n)
        else:
            self.pv_share_ms = list(self.pv_ms)
        self.revisions: dict = {}
        self.timings: list = [None] * n
        self.merges = 0

    def path(self, pkg: DryPackage) -> str:
        return f"{self.root}/{pkg.name}/package.yaml"

    def prefix(self, i: int) -> str:
        return f"{self.root}/intent-{i}"

    def _config(self, i: int) -> dict:
        base = {"name": f"intent-{i}", "namespace": f"nf-{i}", "site": "edge-1", "sessions": 1000}
        base.update(self.config_for(i))
        return base

    def start(self) -> None:
        if self.mode == "multi-package":
            for i in range(self.n):
                self._instantiate(i)
        else:
            self._instantiate(0)

    def _instantiate(self, i: int) -> None:
        pkg = self.packages[i]
        sim = self.sim

        def pv_ready():
            self.pvs.variants[(pkg.name, self.path(pkg))].state = "tracking"
            sim.after(self.webhook_ms[i], EventKind.HYDRATION_STEP, webhook_ready, label=f"webhook:{pkg.name}")

        def webhook_ready():
            sim.after(self.discovery_ms[i], EventKind.HYDRATION_STEP, discovered, label=f"discovery:{pkg.name}")

        def discovered():
            self.revisions[pkg.name] = hydrate(
                pkg, self._config(i + 1), self.dpr, sim=sim, duration_ms=self.hydrate_ms[i],
                path=self.path(pkg), on_published=published, on_step=track,
            )

        def track(rev):
            self.revisions[pkg.name] = rev

        def published(rev):
            self.merges += 1
            t_oh = self.pv_share_ms[i] + self.webhook_ms[i] + self.discovery_ms[i]
            rev = replace(rev, t_oh_ms=t_oh)
            self.revisions[pkg.name] = rev
            self.timings[i] = IntentTiming(pkg.name, rev.t_hydrate_ms, t_oh)
            if self.on_published is not None:
                self.on_published(i + 1, rev)
            if self.mode == "single-replica-scaled" and i + 1 < self.n:
                self._instantiate(i + 1)

        sim.after(self.pv_ms[i], EventKind.HYDRATION_STEP, pv_ready, label=f"pv:{pkg.name}")

    def done(self) -> bool:
        return all(t is not None for t in self.timings)


def submit_intents(n: int, mode: str, rng: RandomSource, model: NephioModel,
                   trace: Optional[list] = None) -> list:
    """Run ``n`` intents on a fresh timeline and return their ``IntentTiming``s."""
    if n < 1:
        raise NephioError(f"need at least one intent, got n={n}")
    sim = Simulator(trace=trace)
    pipe = NephioPipeline(model, sim, StreamSet(rng), n=n, mode=mode)
    pipe.start()
    sim.run_until_idle()
    return list(pipe.timings)


__all__ = [
    "LIFECYCLE",
    "DryPackage",
    "HydrationError",
    "IntentTiming",
    "LifecycleError",
    "NephioError",
    "NephioModel",
    "NephioPipeline",
    "PackageRevision",
    "PackageVariant",
    "PackageVariantSet",
    "advance_lifecycle",
    "fill_template",
    "hydrate",
    "submit_intents",
]
