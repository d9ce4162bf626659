"""Behaviour profiles for the three GitOps operators and their runtime model.

A profile bundles the sync model (webhook-triggered or polling), k-dependent
latency distributions, the control-plane architecture and a resource model.
``argo`` and ``flux`` run one shared reconciler; ``csync`` spawns one
root-reconciler per bound application.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

from .git import GitRepository, WebhookSubscription
from .sampling import Distribution, RandomSource, StreamSet
from .sim import EventKind, Simulator, to_ms, to_seconds

PROFILE_NAMESPACES = {
    "argo": "argo",
    "flux": "flux-system",
    "csync": "config-management-system",
}
PROFILES = tuple(PROFILE_NAMESPACES)


class ProfileError(ValueError):
    pass


class DriftError(RuntimeError):
    """Reconcile requested without drift (harness bug)."""


def check_prefix(p: str) -> str:
    if p not in PROFILE_NAMESPACES:
        raise ProfileError(f"unknown profile {p!r}; valid profiles are {', '.join(PROFILES)}")
    return p


@dataclass(frozen=True)
class ReconcilerProfile:
    prefix: str
    namespace: str
    control_plane_pods: int
    sync: str = "webhook"  # or "polling"
    poll_period: float = 0.0  # seconds
    poll_lag: float = 0.0
    resources: str = "shared"  # or "per-app"
    base_cpu: float = 0.0  # millicore
    base_mem: float = 0.0  # MiB
    distributions: Mapping = field(default_factory=dict, compare=False)  # (scenario, metric) -> Distribution
    fallbacks: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_prefix(self.prefix)
        if self.namespace != PROFILE_NAMESPACES[self.prefix]:
            raise ProfileError(
                f"profile {self.prefix!r} must use control-plane namespace {PROFILE_NAMESPACES[self.prefix]!r}"
            )
        if self.sync not in ("webhook", "polling"):
            raise ProfileError(f"unknown sync model {self.sync!r}")
        if self.sync == "polling" and not self.poll_period > 0:
            raise ProfileError("polling sync requires poll_period > 0")
        if self.resources not in ("shared", "per-app"):
            raise ProfileError(f"unknown resource model {self.resources!r}")
        if self.prefix == "csync" and self.resources != "per-app":
            raise ProfileError("csync runs one root-reconciler per app; resources must be per-app")
        if self.prefix != "csync" and self.resources != "shared":
            raise ProfileError(f"{self.prefix} runs a single shared reconciler; resources must be shared")

    def dist(self, scenario: str, metric: str) -> Distribution:
        for table in (self.distributions, self.fallbacks):
            for key in ((scenario, metric), ("*", metric)):
                if key in table:
                    return table[key]
        raise ProfileError(f"profile {self.prefix!r} has no {metric!r} distribution for scenario {scenario!r}")

    def has_dist(self, scenario: str, metric: str) -> bool:
        try:
            self.dist(scenario, metric)
        except ProfileError:
            return False
        return True

    def without_noise(self) -> "ReconcilerProfile":
        return replace(
            self,
            distributions={k: d.without_noise() for k, d in self.distributions.items()},
            fallbacks={k: d.without_noise() for k, d in self.fallbacks.items()},
        )


@dataclass(frozen=True)
class ReconcilerSpec:
    name: str
    namespace: str
    cluster_url: str
    branch: str
    repo_dir: str
    profile: str

    @property
    def index(self) -> int:
        return int(self.name.rsplit("-", 1)[1])


@dataclass(frozen=True)
class StateDrift:
    tracked: str
    observed: str

    @property
    def drifted(self) -> bool:
        """True iff the drift is non-zero."""
        return self.tracked != self.observed


def generate_reconcilers(n: int, p: str, args: Mapping[str, str]) -> list:
    """One reconciler spec per app, each bound to its own repo sub-directory."""
    check_prefix(p)
    if n < 1:
        raise ValueError(f"need at least one reconciler, got n={n}")
    base = args.get("repo-dir", "").strip("/")
    specs = []
    for i in range(1, n + 1):
        rdir = f"{base}/{p}-app-{i}" if base else f"{p}-app-{i}"
        specs.append(
            ReconcilerSpec(
                name=f"{p}-rec-{i}",
                namespace=f"{p}-ns-{i}",
                cluster_url=args.get("cluster-url", "https://kubernetes.default.svc"),
                branch=args.get("git-branch", "main"),
                repo_dir=rdir,
                profile=p,
            )
        )
    return specs


_TEMPLATES = {
    "argo": """apiVersion: argoproj.io/v1alpha1
kind: Application
metadata:
  name: {name}
  namespace: argo
spec:
  destination:
    server: {url}
    namespace: {namespace}
  source:
    repoURL: {repo}
    targetRevision: {branch}
    path: {rdir}
  syncPolicy:
    automated: {{}}
""",
    "flux": """apiVersion: kustomize.toolkit.fluxcd.io/v1
kind: Kustomization
metadata:
  name: {name}
  namespace: flux-system
spec:
  interval: 1m
  targetNamespace: {namespace}
  path: ./{rdir}
  sourceRef:
    kind: GitRepository
    name: {repo}
    branch: {branch}
""",
    "csync": """apiVersion: configsync.gke.io/v1beta1
kind: RootSync
metadata:
  name: {name}
  namespace: config-management-system
spec:
  sourceFormat: unstructured
  git:
    repo: {repo}
    branch: {branch}
    dir: {rdir}
    auth: token
  override:
    namespace: {namespace}
""",
}


def render_reconciler_manifest(spec: ReconcilerSpec, repo_url: str = "ssot") -> str:
    return _TEMPLATES[spec.profile].format(
        name=spec.name, namespace=spec.namespace, url=spec.cluster_url,
        repo=repo_url, branch=spec.branch, rdir=spec.repo_dir,
    )


def sync_delay(profile: ReconcilerProfile, scenario: str, k: int, rng: RandomSource) -> float:
    """Seconds from push landing until the operator observes the repository."""
    if profile.sync == "polling":
        return profile.poll_lag + float(rng.generator.uniform(0.0, profile.poll_period))
    return profile.dist(scenario, "t_sync").sample(rng, k)


def detect_and_sync(profile, tracked: str, repo: GitRepository, branch: str, rng: RandomSource,
                    scenario: str = "single-app", k: int = 1) -> tuple:
    """Draw a sync latency and compare the tracked revision against the branch head."""
    t_sync = to_seconds(to_ms(sync_delay(profile, scenario, k, rng)))
    return t_sync, StateDrift(tracked, repo.head(branch))


def reconcile(profile: ReconcilerProfile, drift: StateDrift, k: int, rng: RandomSource,
              scenario: str = "single-app") -> float:
    if not drift.drifted:
        raise DriftError("reconcile called with zero drift")
    return profile.dist(scenario, "t_recon").sample(rng, k)


def control_plane_instances(profile: ReconcilerProfile, n_apps: int) -> int:
    return n_apps if profile.resources == "per-app" else 1


def control_plane_footprint(profile: ReconcilerProfile, n_apps: int, streams: StreamSet,
                            scenario: str = "multi-app") -> tuple:
    """(u_cpu millicore, u_mem MiB) of the profile's control-plane namespace."""
    if n_apps < 0:
        raise ValueError("n_apps must be >= 0")
    cpu, mem = profile.base_cpu, profile.base_mem
    if n_apps == 0:
        return cpu, mem
    if profile.resources == "per-app":
        d_cpu = profile.dist(scenario, "cpu_instance")
        d_mem = profile.dist(scenario, "mem_instance")
        cpu += math.fsum(d_cpu.sample(streams["u_cpu"], n_apps) for _ in range(n_apps))
        mem += math.fsum(d_mem.sample(streams["u_mem"], n_apps) for _ in range(n_apps))
    else:
        cpu += profile.dist(scenario, "cpu_load").sample(streams["u_cpu"], n_apps)
        mem += profile.dist(scenario, "mem_load").sample(streams["u_mem"], n_apps)
    return cpu, mem


class Reconciler:
    """Runtime of one bound reconciler inside a simulation.

    Records the virtual times of webhook receipt, sync and reconcile
    completion; ``on_reconciled`` is invoked when a reconcile finishes.
    """

    def __init__(self, spec: ReconcilerSpec, profile: ReconcilerProfile, repo: GitRepository,
                 sim: Simulator, streams: StreamSet, *, scenario: str, k: int, token: str,
                 on_reconciled: Optional[Callable[["Reconciler", StateDrift], None]] = None):
        self.spec = spec
        self.profile = profile
        self.repo = repo
        self.sim = sim
        self.streams = streams
        self.scenario = scenario
        self.k = k
        self.on_reconciled = on_reconciled
        self.tracked = repo.head(spec.branch)
        self.bound_at = sim.now
        self.poll_phase_ms = 0
        if profile.sync == "polling":
            self.poll_phase_ms = to_ms(float(streams["poll_phase"].generator.uniform(0.0, profile.poll_period)))
        self.webhook_at: Optional[int] = None
        self.synced_at: Optional[int] = None
        self.reconciled_at: Optional[int] = None
        self.chains = 0
        self._in_flight = False
        self.subscription = repo.subscribe(
            WebhookSubscription(spec.name, spec.branch, spec.repo_dir, token, self._on_webhook)
        )

    def _next_poll_delay(self) -> int:
        period = to_ms(self.profile.poll_period)
        start = self.bound_at + self.poll_phase_ms
        elapsed = self.sim.now - start
        ticks = max(0, -(-elapsed // period))  # ceil division
        return start + ticks * period - self.sim.now + to_ms(self.profile.poll_lag)

    def _on_webhook(self, branch, revision, paths) -> None:
        if self._in_flight:
            return
        self._in_flight = True
        self.webhook_at = self.sim.now
        if self.profile.sync == "polling":
            delay = self._next_poll_delay()
        else:
            delay = to_ms(self.profile.dist(self.scenario, "t_sync").sample(self.streams["t_sync"], self.k))
        self.sim.after(delay, EventKind.SYNC_FIRED, self._on_sync, label=self.spec.name)

    def _on_sync(self) -> None:
        self.synced_at = self.sim.now
        drift = StateDrift(self.tracked, self.repo.head(self.spec.branch))
        if not drift.drifted:
            self._in_flight = False
            return
        t_recon = to_ms(reconcile(self.profile, drift, self.k, self.streams["t_recon"], self.scenario))
        self.sim.after(t_recon, EventKind.RECONCILE_DONE, self._on_reconciled, drift, label=self.spec.name)

    def _on_reconciled(self, drift: StateDrift) -> None:
        self.reconciled_at = self.sim.now
        self.tracked = drift.observed
        self.chains += 1
        self._in_flight = False
        if self.on_reconciled is not None:
            self.on_reconciled(self, drift)
