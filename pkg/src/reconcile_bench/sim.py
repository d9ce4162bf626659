"""Deterministic event-driven simulation kernel.

Virtual time is an integer count of milliseconds. Events with the same
``fire_at`` dispatch in insertion order.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

DEFAULT_EVENT_CEILING = 10**8


class SimulationError(RuntimeError):
    """Raised on kernel contract violations (past scheduling, runaway models)."""


class EventKind(str, enum.Enum):
    PUSH_ARRIVED = "push-arrived"
    WEBHOOK = "webhook"
    SYNC_FIRED = "sync-fired"
    RECONCILE_DONE = "reconcile-done"
    DEPLOY_SCHEDULED = "deploy-scheduled"
    POD_HEALTHY = "pod-healthy"
    HYDRATION_STEP = "hydration-step"
    RESOURCE_SAMPLE = "resource-sample"
    GENERIC = "generic"


def to_ms(seconds: float) -> int:
    """Convert a non-negative duration in seconds to integer milliseconds."""
    if seconds < 0:
        raise SimulationError(f"negative duration {seconds!r}")
    return int(round(seconds * 1000.0))


def to_seconds(ms: int) -> float:
    return ms / 1000.0


@dataclass(order=True)
class SimEvent:
    fire_at: int
    seq: int
    kind: EventKind = field(compare=False)
    label: str = field(default="", compare=False)
    handler: Optional[Callable[..., Any]] = field(default=None, compare=False, repr=False)
    args: tuple = field(default=(), compare=False, repr=False)

    @property
    def descriptor(self) -> str:
        return f"{self.kind.value}:{self.label}" if self.label else self.kind.value

    def trace_line(self) -> str:
        return f"{self.fire_at},{self.seq},{self.descriptor}"


class SimClock:
    def __init__(self) -> None:
        self._now = 0

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise SimulationError(f"clock moving backwards: {t} < {self._now}")
        self._now = t


class Simulator:
    """Single-timeline discrete-event simulator.

    Observers are called after every dispatched event with the simulator as
    argument; they are the hook for invariant checks (e.g. pod capacity).
    """

    def __init__(self, max_events: int = DEFAULT_EVENT_CEILING, trace: Optional[list] = None):
        self.clock = SimClock()
        self.max_events = max_events
        self.trace = trace
        self.dispatched = 0
        self._queue: list[SimEvent] = []
        self._seq = itertools.count()
        self._observers: list[Callable[["Simulator"], None]] = []

    @property
    def now(self) -> int:
        return self.clock.now

    def add_observer(self, fn: Callable[["Simulator"], None]) -> None:
        self._observers.append(fn)

    def schedule(self, event: SimEvent) -> SimEvent:
        if event.fire_at < self.clock.now:
            raise SimulationError(
                f"event {event.descriptor} scheduled at {event.fire_at} ms, before now={self.clock.now} ms"
            )
        heapq.heappush(self._queue, event)
        return event

    def at(self, fire_at: int, kind: EventKind, handler=None, *args, label: str = "") -> SimEvent:
        return self.schedule(SimEvent(int(fire_at), next(self._seq), kind, label, handler, args))

    def after(self, delay_ms: int, kind: EventKind, handler=None, *args, label: str = "") -> SimEvent:
        if delay_ms < 0:
            raise SimulationError(f"negative delay {delay_ms}")
        return self.at(self.clock.now + int(delay_ms), kind, handler, *args, label=label)

    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> SimEvent:
        event = heapq.heappop(self._queue)
        self.clock.advance_to(event.fire_at)
        self.dispatched += 1
        if self.trace is not None:
            self.trace.append(event.trace_line())
        if event.handler is not None:
            event.handler(*event.args)
        for fn in self._observers:
            fn(self)
        return event

    def run_until_idle(self) -> int:
        while self._queue:
            if self.dispatched >= self.max_events:
                raise SimulationError(f"event ceiling of {self.max_events} reached; model does not terminate")
            self.step()
        return self.clock.now
