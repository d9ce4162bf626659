"""Kubernetes-like backend with a pod capacity ceiling.

``ClusterBackend`` is the surface the harness talks to; ``SimulatedCluster``
is the only implementation here. A live-cluster adapter would implement the
same four operations.
"""

from __future__ import annotations

import abc
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

from .reconcilers import (
    ReconcilerProfile,
    ReconcilerSpec,
    control_plane_footprint,
    control_plane_instances,
)
from .sampling import StreamSet
from .sim import EventKind, Simulator, to_ms, to_seconds

DEFAULT_POD_CAPACITY = 110


class ClusterError(Exception):
    pass


class CapacityError(ClusterError):
    pass


@dataclass
class DeploymentRecord:
    name: str
    namespace: str
    replicas: int
    available_replicas: int = 0
    created_at: Optional[int] = None  # virtual ms
    healthy_at: Optional[int] = None
    label: str = ""

    @property
    def health(self) -> str:
        ok = self.available_replicas == self.replicas and self.replicas != 0
        return "healthy" if ok else "pending"

    def copy(self) -> "DeploymentRecord":
        return DeploymentRecord(**self.__dict__)


@dataclass(frozen=True)
class ResourceSample:
    namespace: str
    u_cpu: float
    u_mem: float
    at: int

    def __post_init__(self):
        if self.u_cpu < 0 or self.u_mem < 0:
            raise ValueError("resource samples are non-negative")


@dataclass
class ControlPlane:
    profile: ReconcilerProfile
    pods: int
    instances: list = field(default_factory=list)


class ClusterBackend(abc.ABC):
    @abc.abstractmethod
    def apply_deployment(self, state, profile, k, streams, **kw):
        ...

    @abc.abstractmethod
    def top(self, namespace, profile, n_apps, streams, **kw) -> ResourceSample:
        ...

    @abc.abstractmethod
    def cleanup(self, prefix: str) -> None:
        ...

    @abc.abstractmethod
    def status(self, namespace: str, name: str) -> DeploymentRecord:
        ...


class SimulatedCluster(ClusterBackend):
    def __init__(self, capacity: int = DEFAULT_POD_CAPACITY):
        self.capacity = capacity
        self.namespaces: set = set()
        self.deployments: dict = {}  # (namespace, name) -> DeploymentRecord
        self.bindings: dict = {}  # reconciler name -> ReconcilerSpec
        self.control_planes: dict = {}  # namespace -> ControlPlane
        self.max_pods_seen = 0

    # -- accounting ----------------------------------------------------
    @property
    def app_pods(self) -> int:
        return sum(d.replicas for d in self.deployments.values())

    @property
    def control_plane_pods(self) -> int:
        return sum(cp.pods for cp in self.control_planes.values())

    @property
    def pods(self) -> int:
        return self.app_pods + self.control_plane_pods

    def check_invariants(self, sim: Optional[Simulator] = None) -> None:
        pods = self.pods
        self.max_pods_seen = max(self.max_pods_seen, pods)
        if pods > self.capacity:
            raise CapacityError(f"{pods} pods exceed capacity {self.capacity}")
        for d in self.deployments.values():
            if not 0 <= d.available_replicas <= d.replicas:
                raise ClusterError(f"deployment {d.namespace}/{d.name} has inconsistent replica counts")
            if d.health == "healthy" and d.created_at is None:
                raise ClusterError(f"deployment {d.namespace}/{d.name} healthy before creation")

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"capacity={self.capacity}\n".encode())
        for ns in sorted(self.namespaces):
            h.update(f"ns:{ns}\n".encode())
        for key in sorted(self.deployments):
            d = self.deployments[key]
            h.update(f"dep:{key}:{d.replicas}:{d.available_replicas}:{d.created_at}:{d.healthy_at}\n".encode())
        for name in sorted(self.bindings):
            h.update(f"bind:{name}\n".encode())
        for ns in sorted(self.control_planes):
            cp = self.control_planes[ns]
            h.update(f"cp:{ns}:{cp.pods}:{','.join(sorted(cp.instances))}\n".encode())
        return h.hexdigest()

    def state_line(self) -> str:
        return f"pods={self.pods};namespaces={len(self.namespaces)};hash={self.state_hash()[:16]}"

    # -- control plane and bindings -------------------------------------
    def install_control_plane(self, profile: ReconcilerProfile) -> None:
        ns = profile.namespace
        if ns in self.control_planes:
            return
        if self.pods + profile.control_plane_pods > self.capacity:
            raise CapacityError(f"control plane of {profile.prefix} does not fit in {self.capacity} pods")
        self.namespaces.add(ns)
        shared = [] if profile.resources == "per-app" else [f"{profile.prefix}-reconciler"]
        self.control_planes[ns] = ControlPlane(profile, profile.control_plane_pods, shared)

    def bind(self, spec: ReconcilerSpec, profile: ReconcilerProfile) -> None:
        cp = self.control_planes.get(profile.namespace)
        if cp is None:
            raise ClusterError(f"control plane for {profile.prefix} is not installed")
        if spec.name in self.bindings:
            raise ClusterError(f"reconciler {spec.name} already bound")
        self.bindings[spec.name] = spec
        self.namespaces.add(spec.namespace)
        if profile.resources == "per-app":
            cp.instances.append(f"root-reconciler-{spec.name}")

    def instances(self, namespace: str) -> list:
        try:
            return list(self.control_planes[namespace].instances)
        except KeyError:
            raise ClusterError(f"no control plane in namespace {namespace!r}") from None

    # -- backend operations ---------------------------------------------
    def apply_deployment(self, state, profile: ReconcilerProfile, k: int, streams: StreamSet, *,
                         sim: Simulator, scenario: str = "single-app",
                         on_created: Optional[Callable] = None,
                         on_healthy: Optional[Callable] = None) -> tuple:
        """Schedule creation and replica readiness of ``state``.

        Returns ``(t_deploy, t_healthy)`` in seconds; ``t_healthy`` is None
        when the deployment can never become healthy (zero replicas).
        """
        key = (state.namespace, state.name)
        if key in self.deployments:
            raise ClusterError(f"deployment {state.namespace}/{state.name} already exists")
        if self.pods + state.replicas > self.capacity:
            raise CapacityError(
                f"deploying {state.replicas} replicas of {state.name} would exceed capacity "
                f"({self.pods} + {state.replicas} > {self.capacity})"
            )
        self.namespaces.add(state.namespace)
        rec = DeploymentRecord(state.name, state.namespace, state.replicas, label=state.label)
        self.deployments[key] = rec

        t_deploy = to_ms(profile.dist(scenario, "t_deploy").sample(streams["t_deploy"], k))
        d_healthy = profile.dist(scenario, "t_healthy")
        ready = [to_ms(d_healthy.sample(streams["t_healthy"], k)) for _ in range(state.replicas)]

        def created():
            rec.created_at = sim.now
            if on_created is not None:
                on_created(rec)
            for delay in ready:
                sim.after(delay, EventKind.POD_HEALTHY, pod_ready, label=f"{state.namespace}/{state.name}")

        def pod_ready():
            rec.available_replicas += 1
            if rec.health == "healthy":
                rec.healthy_at = sim.now
                if on_healthy is not None:
                    on_healthy(rec)

        sim.after(t_deploy, EventKind.DEPLOY_SCHEDULED, created, label=f"{state.namespace}/{state.name}")
        t_healthy = to_seconds(max(ready)) if ready else None
        return to_seconds(t_deploy), t_healthy

    def top(self, namespace: str, profile: ReconcilerProfile, n_apps: int, streams: StreamSet, *,
            sim: Optional[Simulator] = None, scenario: str = "multi-app") -> ResourceSample:
        if namespace not in self.namespaces:
            raise ClusterError(f"unknown namespace {namespace!r}")
        if namespace != profile.namespace:
            raise ClusterError(f"namespace {namespace!r} is not the {profile.prefix} control plane")
        cpu, mem = control_plane_footprint(profile, n_apps, streams, scenario)
        return ResourceSample(namespace, cpu, mem, sim.now if sim is not None else 0)

    def cleanup(self, prefix: str) -> None:
        """Remove every namespace, deployment and binding named ``{prefix}-...``.

        Control-plane namespaces stay; they belong to the baseline.
        """
        tag = f"{prefix}-"
        self.deployments = {k: d for k, d in self.deployments.items() if not k[0].startswith(tag)}
        keep = set(self.control_planes)
        self.namespaces = {ns for ns in self.namespaces if ns in keep or not ns.startswith(tag)}
        gone = {n for n in self.bindings if n.startswith(tag)}
        for name in gone:
            del self.bindings[name]
        dead = {f"root-reconciler-{n}" for n in gone}
        for cp in self.control_planes.values():
            cp.instances = [i for i in cp.instances if i not in dead]

    def status(self, namespace: str, name: str) -> DeploymentRecord:
        try:
            return self.deployments[(namespace, name)].copy()
        except KeyError:
            raise ClusterError(f"no deployment {namespace}/{name}") from None


__all__ = [
    "CapacityError",
    "ClusterBackend",
    "ClusterError",
    "DeploymentRecord",
    "ResourceSample",
    "SimulatedCluster",
    "control_plane_instances",
]
