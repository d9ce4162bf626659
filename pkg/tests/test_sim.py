import random

import pytest
from hypothesis import given, settings, strategies as st

from reconcile_bench.sim import EventKind, SimEvent, SimulationError, Simulator, to_ms


def test_empty_queue_returns_zero():
    assert Simulator().run_until_idle() == 0


def test_single_event_final_time():
    sim = Simulator()
    sim.at(500, EventKind.GENERIC)
    assert sim.run_until_idle() == 500


def test_zero_delay_runs_after_current_event():
    sim = Simulator()
    order = []

    def first():
        order.append("first")
        sim.after(0, EventKind.GENERIC, lambda: order.append("zero"))
        order.append("first-end")

    sim.at(10, EventKind.GENERIC, first)
    sim.at(10, EventKind.GENERIC, lambda: order.append("second"))
    sim.run_until_idle()
    assert order == ["first", "first-end", "second", "zero"]


def test_ties_dispatch_by_seq():
    trace = []
    sim = Simulator(trace=trace)
    sim.schedule(SimEvent(100, 6, EventKind.GENERIC, "b"))
    sim.schedule(SimEvent(100, 5, EventKind.GENERIC, "a"))
    sim.run_until_idle()
    assert trace == ["100,5,generic:a", "100,6,generic:b"]


def test_past_event_rejected():
    sim = Simulator()
    sim.at(50, EventKind.GENERIC)
    sim.run_until_idle()
    with pytest.raises(SimulationError):
        sim.at(10, EventKind.GENERIC)
    with pytest.raises(SimulationError):
        sim.after(-1, EventKind.GENERIC)


def test_event_ceiling_aborts_runaway_model():
    sim = Simulator(max_events=100)

    def loop():
        sim.after(1, EventKind.GENERIC, loop)

    sim.at(0, EventKind.GENERIC, loop)
    with pytest.raises(SimulationError, match="ceiling"):
        sim.run_until_idle()


def test_ten_thousand_events_match_sort_oracle():
    rng = random.Random(3)
    trace = []
    sim = Simulator(trace=trace)
    scheduled = []
    for _ in range(10_000):
        ev = sim.at(rng.randrange(0, 5000), EventKind.GENERIC)
        scheduled.append((ev.fire_at, ev.seq))
    sim.run_until_idle()
    got = [tuple(int(x) for x in line.split(",")[:2]) for line in trace]
    assert got == sorted(scheduled)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=200))
def test_dispatch_is_total_order_and_clock_monotone(times):
    trace = []
    sim = Simulator(trace=trace)
    seen = []
    sim.add_observer(lambda s: seen.append(s.now))
    for t in times:
        sim.at(t, EventKind.GENERIC)
    assert sim.run_until_idle() == max(times)
    assert seen == sorted(seen)
    keys = [tuple(int(x) for x in line.split(",")[:2]) for line in trace]
    assert keys == sorted(keys)
    assert len(keys) == len(times)


def test_trace_line_format():
    ev = SimEvent(12, 3, EventKind.POD_HEALTHY, "ns/app")
    assert ev.trace_line() == "12,3,pod-healthy:ns/app"


def test_to_ms_rounds_and_rejects_negative():
    assert to_ms(1.0504) == 1050
    assert to_ms(2.83) == 2830
    with pytest.raises(SimulationError):
        to_ms(-0.1)
