import numpy as np
import pytest

from reconcile_bench.cluster import CapacityError, ClusterError, DeploymentRecord, ResourceSample, SimulatedCluster
from reconcile_bench.harness import DesiredState
from reconcile_bench.presets import load_preset
from reconcile_bench.reconcilers import generate_reconcilers
from reconcile_bench.sampling import RandomSource, StreamSet
from reconcile_bench.sim import Simulator


def state(i=1, replicas=1, p="argo"):
    return DesiredState(f"{p}-app-{i}", f"{p}-ns-{i}", f"{p}-label-{i}", replicas, f"apps/{p}-app-{i}")


def cluster_for(profile, capacity=110):
    c = SimulatedCluster(capacity)
    c.install_control_plane(profile)
    return c


def deploy_times(preset, p, k, reps=40, scenario="single-app"):
    prof = load_preset(preset).profile(p)
    out = []
    for rep in range(reps):
        c, sim = cluster_for(prof), Simulator()
        streams = StreamSet(RandomSource(42, ("deploy", k, rep)))
        t_deploy, _ = c.apply_deployment(state(replicas=k), prof, k, streams, sim=sim, scenario=scenario)
        sim.run_until_idle()
        out.append(t_deploy)
    return np.array(out)


def test_argo_deploy_flat_then_linear_in_fig3():
    assert abs(np.median(deploy_times("fig3", "argo", 30)) - 0.2) < 0.02
    assert abs(np.median(deploy_times("fig3", "argo", 100)) - 10.0) < 0.5


def test_health_transitions_once_and_timestamps():
    prof = load_preset("table3").profile("flux")
    c, sim = cluster_for(prof), Simulator()
    seen = []
    c.apply_deployment(state(replicas=5, p="flux"), prof, 5, StreamSet(RandomSource(1)), sim=sim,
                       scenario="multi-app", on_healthy=lambda r: seen.append(sim.now))
    sim.add_observer(lambda s: c.check_invariants(s))
    sim.run_until_idle()
    rec = c.status("flux-ns-1", "flux-app-1")
    assert rec.health == "healthy" and rec.available_replicas == 5
    assert seen == [rec.healthy_at] and rec.created_at <= rec.healthy_at


def test_zero_replicas_stay_pending():
    prof = load_preset("table3").profile("argo")
    c, sim = cluster_for(prof), Simulator()
    _, t_healthy = c.apply_deployment(state(replicas=0), prof, 1, StreamSet(RandomSource(1)), sim=sim)
    sim.run_until_idle()
    assert t_healthy is None
    rec = c.status("argo-ns-1", "argo-app-1")
    assert rec.health == "pending" and rec.created_at is not None


def test_health_rule():
    assert DeploymentRecord("a", "n", 3, 3).health == "healthy"
    assert DeploymentRecord("a", "n", 3, 2).health == "pending"
    assert DeploymentRecord("a", "n", 0, 0).health == "pending"


def test_capacity_error_not_silent():
    prof = load_preset("table3").profile("argo")  # 7 control-plane pods
    c, sim = cluster_for(prof), Simulator()
    with pytest.raises(CapacityError):
        c.apply_deployment(state(replicas=104), prof, 104, StreamSet(RandomSource(1)), sim=sim)
    assert c.deployments == {}
    c.apply_deployment(state(replicas=103), prof, 103, StreamSet(RandomSource(1)), sim=sim)
    assert c.pods == 110


def test_invariant_check_raises_on_violation():
    c = SimulatedCluster(5)
    c.deployments[("n", "a")] = DeploymentRecord("a", "n", 6)
    with pytest.raises(CapacityError):
        c.check_invariants()


def test_duplicate_deployment_rejected():
    prof = load_preset("table3").profile("argo")
    c, sim = cluster_for(prof), Simulator()
    c.apply_deployment(state(), prof, 1, StreamSet(RandomSource(1)), sim=sim)
    with pytest.raises(ClusterError):
        c.apply_deployment(state(), prof, 1, StreamSet(RandomSource(1)), sim=sim)


def top(preset, p, n):
    prof = load_preset(preset).profile(p)
    c = cluster_for(prof)
    return c.top(prof.namespace, prof, n, StreamSet(RandomSource(5, (p, n))))


def test_flux_memory_flat_in_fig4():
    assert abs(top("fig4", "flux", 90).u_mem - 120) < 5


def test_csync_memory_reaches_8gib_in_fig4():
    assert abs(top("fig4", "csync", 90).u_mem - 8192) / 8192 < 0.10


@pytest.mark.parametrize("p", ["argo", "flux", "csync"])
def test_zero_apps_is_base_footprint(p):
    prof = load_preset("fig4").profile(p)
    s = top("fig4", p, 0)
    assert (s.u_cpu, s.u_mem) == (prof.base_cpu, prof.base_mem)


def test_top_unknown_namespace():
    prof = load_preset("table3").profile("argo")
    c = cluster_for(prof)
    with pytest.raises(ClusterError):
        c.top("nowhere", prof, 1, StreamSet(RandomSource(1)))
    with pytest.raises(ValueError):
        ResourceSample("n", -1, 0, 0)


def test_cleanup_restores_baseline_and_is_idempotent():
    prof = load_preset("table3").profile("csync")
    c = cluster_for(prof)
    base = c.state_hash()
    sim = Simulator()
    for spec in generate_reconcilers(90, "csync", {"repo-dir": "apps"}):
        c.bind(spec, prof)
        c.apply_deployment(state(spec.index, 1, "csync"), prof, 90, StreamSet(RandomSource(spec.index)), sim=sim,
                           scenario="multi-app")
    sim.run_until_idle()
    assert c.pods == 93 and len(c.instances(prof.namespace)) == 90
    c.cleanup("csync")
    assert c.state_hash() == base and c.pods == 3
    c.cleanup("csync")
    assert c.state_hash() == base
    assert "config-management-system" in c.namespaces


def test_bind_requires_control_plane():
    prof = load_preset("table3").profile("flux")
    c = SimulatedCluster()
    spec = generate_reconcilers(1, "flux", {})[0]
    with pytest.raises(ClusterError):
        c.bind(spec, prof)
