import math

import numpy as np
import pytest

from conftest import constant_net, random_net
from inrmesh.driver import (
    PruneOutcome,
    RunConfig,
    _pruning_refines,
    basic_error,
    element_decision_basic,
    element_decision_pruning,
    mean_relative_error,
    neuron_count_map,
    prune_on_element,
    relative_floor,
    run_campaign,
    run_time_slices,
    uniform_dofs,
)
from inrmesh.mesh import MeshTree, VertexValues
from inrmesh.network import DomainBox, LayerSpec, Mlp


def affine_net(lo=(0.0, 0.0), hi=(1.0, 1.0)):
    d = len(lo)
    return Mlp(
        (LayerSpec(np.eye(d), np.zeros(d), "identity"),
         LayerSpec([np.linspace(0.5, -0.25, d)], [2.0], "identity")),
        DomainBox(lo, hi),
    )


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(mode="adaptive")
    with pytest.raises(ValueError):
        RunConfig(K_max=0)
    with pytest.raises(ValueError):
        RunConfig(n_err=0)
    with pytest.raises(ValueError):
        RunConfig(n_ID=0)
    with pytest.raises(ValueError):
        RunConfig(eps=0.0)


def test_resolve_fills_defaults():
    net = random_net(np.random.default_rng(0), (3, 20, 12, 1), lo=np.zeros(3), hi=np.ones(3))
    cfg = RunConfig().resolve(net)
    assert cfg.n_ID == 20
    assert cfg.n_total_err == 1048576
    assert cfg.initial_uniform_levels == 2
    net2 = random_net(np.random.default_rng(0))
    assert RunConfig().resolve(net2).initial_uniform_levels == 0
    assert RunConfig().resolve(net2).n_total_err == 262144


def test_relative_error_floor():
    assert relative_floor(np.array([0.0, 2.0])) == 2e-8
    assert relative_floor(np.array([3.0, 3.0])) == pytest.approx(3e-8)
    assert relative_floor(np.zeros(3)) == 1.0
    assert mean_relative_error(np.array([0.0, 1.0]), np.array([1e-9, 1.5]), 1e-8) == pytest.approx(0.3)


@pytest.mark.parametrize(
    "error, p, T, P, refine",
    [(2e-3, 0.05, 1e-3, 0.15, True), (1e-5, 0.05, 1e-3, 0.15, False), (0.0, 60 / 160, 1e-3, 0.15, True)],
)
def test_pruning_rule(error, p, T, P, refine):
    cfg = RunConfig(T=T, P=P)
    assert _pruning_refines(PruneOutcome(p, error, ()), cfg) is refine


def test_constant_net_prunes_to_one_per_layer():
    net = constant_net(widths=(8, 8, 8))
    mesh = MeshTree(net.domain)
    mesh.refine_uniform(1)
    _, sizes = prune_on_element(net, mesh.leaves[2], 1e-3, 8, 0)
    assert sizes == (1, 1, 1)
    refine, outcome = element_decision_pruning(net, mesh.leaves[2], RunConfig(T=1e-3, P=0.5))
    assert outcome.p == 3 / 24
    assert outcome.error <= 1e-12
    assert not refine and mesh.leaves[2].done_refining


def test_sub_machine_tolerance_keeps_everything():
    net = random_net(np.random.default_rng(1), (2, 12, 12, 1))
    mesh = MeshTree(net.domain)
    _, outcome = element_decision_pruning(net, mesh.root, RunConfig(eps=1e-16, n_ID=64))
    assert outcome.p == 1.0


def test_far_corner_needs_fewer_neurons_than_origin():
    # steep feature at the origin, nearly flat elsewhere
    rng = np.random.default_rng(2)
    W = rng.standard_normal((24, 2)) * 40
    b = -np.sum(W * 0.05, axis=1) + rng.uniform(-1, 1, 24)
    net = Mlp(
        (LayerSpec(W, b, "tanh"), LayerSpec(rng.standard_normal((24, 24)) / 5, rng.uniform(-1, 1, 24), "tanh"),
         LayerSpec(rng.standard_normal((1, 24)), [0.0], "identity")),
        DomainBox([0, 0], [1, 1]),
    )
    mesh = MeshTree(net.domain)
    mesh.refine_uniform(2)
    counts = neuron_count_map(net, mesh, 1e-3, 24, 0)
    origin = mesh.locate([[0.0, 0.0]])[0]
    far = mesh.locate([[1.0, 1.0]])[0]
    assert counts[far] < counts[origin]


def test_neuron_count_map_constant_net():
    net = constant_net(widths=(6, 6, 6, 6))
    mesh = MeshTree(net.domain)
    mesh.refine_uniform(2)
    assert neuron_count_map(net, mesh, 1e-3).tolist() == [4] * 16


def test_basic_decision_thresholds():
    net = affine_net()
    mesh = MeshTree(net.domain)
    vv = VertexValues.from_function(mesh, net)
    assert basic_error(net, mesh.root, RunConfig(mode="basic"), vv) <= 1e-15
    assert not element_decision_basic(net, mesh.root, RunConfig(mode="basic", tau=1e-12), vv)
    wavy = random_net(np.random.default_rng(3), activation="sine")
    vw = VertexValues.from_function(mesh, wavy)
    assert element_decision_basic(wavy, mesh.root, RunConfig(mode="basic", tau=0.0), vw)
    assert not element_decision_basic(wavy, mesh.root, RunConfig(mode="basic", tau=math.inf), vw)


@pytest.mark.parametrize("d", [2, 3])
def test_uniform_campaign_dofs(d):
    net = affine_net((0.0,) * d, (1.0,) * d)
    levels = 6 if d == 2 else 4
    c = run_campaign(net, RunConfig(mode="uniform", K_max=levels, initial_uniform_levels=0, n_total_err=1000))
    assert [r.dofs for r in c.report] == [uniform_dofs(i, d) for i in range(1, levels + 1)]
    assert [r.iteration for r in c.report] == list(range(1, levels + 1))
    assert all(r.rmse <= 1e-10 for r in c.report)


def test_uniform_campaign_counts_initial_levels():
    net = affine_net((0.0,) * 3, (1.0,) * 3)
    c = run_campaign(net, RunConfig(mode="uniform", K_max=2, n_total_err=1000))
    assert [r.dofs for r in c.report] == [uniform_dofs(3, 3), uniform_dofs(4, 3)]


def test_unsatisfiable_thresholds_never_refine():
    net = random_net(np.random.default_rng(4))
    c = run_campaign(net, RunConfig(T=math.inf, P=1.1, K_max=4, initial_uniform_levels=1, n_total_err=1000))
    assert [r.dofs for r in c.report] == [9]
    assert all(e.done_refining for e in c.mesh.leaves)


def test_zero_error_threshold_matches_uniform():
    net = random_net(np.random.default_rng(5), activation="sine")
    cfg = dict(K_max=3, n_total_err=2000, P=1.1, T=0.0)
    pruned = run_campaign(net, RunConfig(**cfg))
    uniform = run_campaign(net, RunConfig(mode="uniform", K_max=3, n_total_err=2000))
    assert [r.dofs for r in pruned.report] == [r.dofs for r in uniform.report]


def test_done_elements_are_never_revisited():
    net = random_net(np.random.default_rng(6), activation="tanh")
    c = run_campaign(net, RunConfig(T=1e-4, P=0.4, K_max=5, n_total_err=2000))
    done_at = {}
    for it, paths in enumerate(c.evaluated):
        for p in paths:
            assert p not in done_at
        leaves = {e.path: e for e in c.mesh.leaves}
        for p in paths:
            e = leaves.get(p)
            if e is not None and e.done_refining:
                done_at.setdefault(p, it)
    dofs = [r.dofs for r in c.report]
    assert dofs == sorted(dofs)


def test_prune_calls_match_active_leaves():
    net = random_net(np.random.default_rng(7), activation="tanh")
    c = run_campaign(net, RunConfig(T=1e-3, P=0.3, K_max=3, n_total_err=1000, initial_uniform_levels=1))
    assert len(c.evaluated[0]) == 4
    for paths in c.evaluated:
        assert len(set(paths)) == len(paths)


def test_campaigns_are_deterministic_and_thread_independent():
    net = random_net(np.random.default_rng(8), activation="swish")
    a = run_campaign(net, RunConfig(T=1e-3, P=0.3, K_max=4, n_total_err=3000))
    b = run_campaign(net, RunConfig(T=1e-3, P=0.3, K_max=4, n_total_err=3000, threads=3))
    assert [(r.dofs, r.rmse, r.leaf_count) for r in a.report] == [(r.dofs, r.rmse, r.leaf_count) for r in b.report]
    assert [e.path for e in a.mesh.leaves] == [e.path for e in b.mesh.leaves]
    assert np.array_equal(a.vertex_values.values, b.vertex_values.values)


def test_dof_budget_stops_before_next_sweep():
    net = random_net(np.random.default_rng(9), activation="sine")
    c = run_campaign(net, RunConfig(mode="uniform", K_max=8, dof_budget=100, n_total_err=500))
    assert [r.dofs for r in c.report] == [9, 25, 81, 289]


def test_basic_campaign_on_multilinear_field_stops_immediately():
    net = affine_net()
    c = run_campaign(net, RunConfig(mode="basic", tau=1e-6, K_max=5, n_total_err=500))
    assert len(c.report) == 1 and c.report[0].dofs == 4


def test_single_error_sample_is_enough():
    net = random_net(np.random.default_rng(10))
    c = run_campaign(net, RunConfig(n_err=1, K_max=2, n_total_err=500))
    assert len(c.report) >= 1


def test_pruning_mode_rejects_nets_without_hidden_layers():
    net = Mlp((LayerSpec([[1.0, 1.0]], [0.0], "identity"),), DomainBox([0, 0], [1, 1]))
    with pytest.raises(ValueError):
        run_campaign(net, RunConfig(K_max=1, n_total_err=10))


def test_time_slices():
    rng = np.random.default_rng(11)
    net = random_net(rng, (4, 8, 1), "tanh", lo=-np.ones(4), hi=np.ones(4))
    cfg = RunConfig(mode="uniform", K_max=1, n_total_err=500, time_slices=[0.0])
    (sc,) = run_time_slices(net, cfg)
    assert sc.t == 0.0 and sc.mesh.dim == 3
    with pytest.raises(ValueError):
        run_time_slices(net, RunConfig(time_slices=[2.0]))
    with pytest.raises(ValueError):
        run_time_slices(net, RunConfig())


def test_time_constant_net_gives_identical_slices():
    rng = np.random.default_rng(12)
    W = rng.standard_normal((10, 4))
    W[:, 3] = 0.0
    net = Mlp(
        (LayerSpec(W * 2, rng.uniform(-1, 1, 10), "tanh"), LayerSpec(rng.standard_normal((1, 10)), [0.0], "identity")),
        DomainBox(-np.ones(4), np.ones(4)),
    )
    cfg = RunConfig(T=1e-3, P=0.5, K_max=2, n_total_err=2000, initial_uniform_levels=1, time_slices=[-1, 0, 1])
    meshes = [[e.path for e in sc.mesh.leaves] for sc in run_time_slices(net, cfg)]
    assert meshes[0] == meshes[1] == meshes[2]
