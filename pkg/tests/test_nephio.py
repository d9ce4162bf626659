
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reconcile_bench.git import GitRepository
from reconcile_bench.nephio import (
    LIFECYCLE,
    DryPackage,
    HydrationError,
    LifecycleError,
    NephioError,
    NephioModel,
    NephioPipeline,
    PackageRevision,
    PackageVariantSet,
    advance_lifecycle,
    fill_template,
    hydrate,
    submit_intents,
)
from reconcile_bench.presets import load_preset
from reconcile_bench.sampling import Constant, RandomSource, StreamSet
from reconcile_bench.sim import Simulator

THREE = "a: {{x}}\nb: {{ y }}\nc: {{z}}\n"


def model(preset="table3", noise_free=False):
    m = NephioModel.from_preset(load_preset(preset))
    return m.without_noise() if noise_free else m


def test_lifecycle_steps():
    rev = PackageRevision("p", payload="done")
    assert advance_lifecycle(rev).lifecycle == "proposed"
    approved = PackageRevision("p", "approved", "done")
    assert advance_lifecycle(approved).lifecycle == "published"
    with pytest.raises(LifecycleError):
        advance_lifecycle(PackageRevision("p", "published", "done"))


def test_publish_requires_filled_payload():
    with pytest.raises(LifecycleError):
        advance_lifecycle(PackageRevision("p", "approved", "x: {{y}}"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10))
def test_any_advance_sequence_reaches_published_in_three(n):
    rev = PackageRevision("p", payload="ok")
    path = [rev.lifecycle]
    for _ in range(n):
        try:
            rev = advance_lifecycle(rev)
        except LifecycleError:
            break
        path.append(rev.lifecycle)
    assert tuple(path) == LIFECYCLE[: len(path)]
    assert len(path) == min(n + 1, 4)


def test_dry_package_needs_slots():
    with pytest.raises(NephioError):
        DryPackage("p", template="no slots here")
    assert DryPackage("p", THREE).slots == ["x", "y", "z"]


def test_hydrate_fills_all_slots_and_publishes():
    repo, sim = GitRepository("dpr"), Simulator()
    got = []
    rev = hydrate(DryPackage("p", THREE), {"x": 1, "y": 2, "z": 3}, repo, sim=sim, duration_ms=4970,
                  on_published=got.append)
    assert rev.lifecycle == "draft" and "Draft/p" in repo.branches
    sim.run_until_idle()
    (pub,) = got
    assert pub.lifecycle == "published" and pub.unfilled == [] and pub.t_hydrate_ms == 4970
    assert "Draft/p" not in repo.branches
    assert "p/package.yaml" in repo.tree("main").entries


def test_hydrate_missing_value_stays_in_draft():
    repo, sim = GitRepository("dpr"), Simulator()
    with pytest.raises(HydrationError) as exc:
        hydrate(DryPackage("p", THREE), {"x": 1, "y": 2}, repo, sim=sim, duration_ms=10)
    assert exc.value.revision.lifecycle == "draft"
    assert sim.pending() == 0 and list(repo.branches) == ["main"]


def test_ten_hydrations_bump_main_by_ten():
    repo, sim = GitRepository("dpr"), Simulator(trace=[])
    c0 = repo.counter("main")
    for i in range(10):
        hydrate(DryPackage(f"p{i}", THREE), {"x": 1, "y": 2, "z": 3}, repo, RandomSource(i), sim=sim,
                duration=Constant(1.0))
    sim.run_until_idle()
    assert repo.counter("main") == c0 + 10
    assert sum(":merge:" in line for line in sim.trace) == 10


def test_five_packages_give_five_merge_events():
    trace = []
    submit_intents(5, "multi", RandomSource(1), model(), trace=trace)
    assert sum("hydration-step:merge:" in line for line in trace) == 5


@pytest.mark.parametrize("mode", ["single", "multi"])
def test_timing_identity_to_the_millisecond(mode):
    for t in submit_intents(13, mode, RandomSource(4), model()):
        assert t.t_inproc_ms == t.t_hydrate_ms + t.t_oh_ms
        assert t.t_inproc == pytest.approx(t.t_hydrate + t.t_oh, abs=1e-12)


def test_single_intent_latency():
    x = [submit_intents(1, "single", RandomSource(42, (rep,)), model())[0].t_inproc for rep in range(20)]
    assert 17.0 <= np.mean(x) <= 18.8


def test_zero_noise_overhead_amortises():
    means = [np.mean([t.t_oh for t in submit_intents(n, "multi", RandomSource(0), model(noise_free=True))])
             for n in range(1, 90, 10)]
    assert all(b <= a for a, b in zip(means, means[1:]))
    single = [np.mean([t.t_oh for t in submit_intents(n, "single", RandomSource(0), model(noise_free=True))])
              for n in (1, 41)]
    assert single[0] == single[1]


def test_multi_shares_pv_window_exactly():
    sim = Simulator()
    pipe = NephioPipeline(model(), sim, StreamSet(RandomSource(2)), n=7, mode="multi")
    assert sum(pipe.pv_share_ms) == max(pipe.pv_ms)
    pipe.start()
    sim.run_until_idle()
    assert pipe.done() and pipe.merges == 7
    assert all(v.state == "tracking" for v in pipe.pvs.variants.values())


def test_single_mode_is_sequential():
    trace = []
    submit_intents(3, "single", RandomSource(2), model(), trace=trace)
    kinds = [line.split(",")[2] for line in trace]
    merges = [i for i, k in enumerate(kinds) if k.startswith("hydration-step:merge")]
    pvs = [i for i, k in enumerate(kinds) if k.startswith("hydration-step:pv")]
    assert merges[0] < pvs[1] and merges[1] < pvs[2]


def test_pvs_one_variant_per_pair():
    pvs = PackageVariantSet()
    pkg = DryPackage("p", THREE)
    pvs.add(pkg, "deploy/p")
    pvs.add(pkg, "deploy/q")
    with pytest.raises(NephioError):
        pvs.add(pkg, "deploy/p")
    assert len(pvs) == 2


def test_zero_intents_rejected():
    with pytest.raises(NephioError):
        submit_intents(0, "multi", RandomSource(1), model())
    with pytest.raises(NephioError):
        NephioPipeline(model(), Simulator(), StreamSet(RandomSource(1)), n=1, mode="batch")


def test_fill_template_reports_missing():
    with pytest.raises(KeyError):
        fill_template(THREE, {"x": 1})
    assert fill_template("{{a}}-{{ a }}", {"a": 5}) == "5-5"
