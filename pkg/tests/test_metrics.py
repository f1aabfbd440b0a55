import numpy as np
import pytest

from conftest import constant_net, random_net
from inrmesh.mesh import MeshTree, VertexValues
from inrmesh.metrics import (
    REPORT_HEADER,
    IterationRecord,
    format_report,
    global_sample,
    read_report,
    total_error,
    write_report,
)
from inrmesh.network import DomainBox, LayerSpec, Mlp


def bilinear_net():
    # affine fields are multilinear, and an identity hidden layer reproduces them exactly
    return Mlp(
        (LayerSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], "identity"),
         LayerSpec([[0.5, -0.25]], [0.1], "identity")),
        DomainBox([0, 0], [1, 1]),
    )


def refined_randomly(net, seed=0, steps=8):
    mesh = MeshTree(net.domain)
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        leaves = mesh.leaves
        mesh.refine(leaves[int(rng.integers(len(leaves)))])
    return mesh


def test_multilinear_field_has_zero_error():
    net = bilinear_net()
    mesh = refined_randomly(net)
    vv = VertexValues.from_function(mesh, net)
    assert total_error(net, mesh, vv, 4096, 0) <= 1e-10


def test_constant_field_error_is_exactly_zero():
    net = constant_net(value=0.7)
    mesh = refined_randomly(net, 1)
    vv = VertexValues.from_function(mesh, net)
    assert total_error(net, mesh, vv, 4096, 0) == 0.0


def test_uniform_refinement_does_not_increase_error():
    net = random_net(np.random.default_rng(0), activation="tanh")
    mesh = MeshTree(net.domain)
    vv = VertexValues.from_function(mesh, net)
    errors = []
    for _ in range(5):
        mesh.refine_uniform(1)
        vv.update(mesh, net)
        errors.append(total_error(net, mesh, vv, 8192, 3))
    X = global_sample(net.domain, 8192, 3)
    assert errors[-1] == pytest.approx(np.sqrt(np.mean((net(X) - mesh.interpolate(vv, X)) ** 2)), rel=0, abs=0)
    for a, b in zip(errors, errors[1:]):
        assert b <= 1.01 * a


def test_global_sample_is_fixed_and_in_domain():
    dom = DomainBox([-1, 2], [1, 3])
    a = global_sample(dom, 1000, 5)
    assert np.array_equal(a, global_sample(dom, 1000, 5))
    assert not np.array_equal(a, global_sample(dom, 1000, 6))
    assert np.all(dom.contains(a))


def test_error_invariant_to_leaf_order():
    net = random_net(np.random.default_rng(2))
    m1 = MeshTree(net.domain)
    m1.refine_uniform(2)
    m2 = MeshTree(net.domain)
    m2.refine_uniform(1)
    m2.refine_many(list(reversed(m2.leaves)))
    v1 = VertexValues.from_function(m1, net)
    v2 = VertexValues.from_function(m2, net)
    assert total_error(net, m1, v1, 2048, 0) == total_error(net, m2, v2, 2048, 0)


def test_report_round_trip(tmp_path):
    records = [IterationRecord(1, 9, 0.1, 4, 0.25), IterationRecord(2, 25, 1 / 3, 16, 0.5)]
    path = tmp_path / "r.csv"
    write_report(records, path)
    text = path.read_text().splitlines()
    assert text[0] == ",".join(REPORT_HEADER)
    assert text[2].split(",")[3] == "0.33333333333333331"
    assert read_report(path) == records


def test_report_without_timing(tmp_path):
    path = tmp_path / "r.csv"
    write_report([IterationRecord(1, 9, 0.1, 4, 12.5)], path, include_timing=False)
    assert read_report(path)[0].wall_time == 0.0


def test_read_report_rejects_bad_header(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_report(path)


def test_format_report_lists_every_iteration():
    out = format_report([IterationRecord(1, 9, 0.1, 4), IterationRecord(2, 25, 0.05, 16)])
    assert len(out.splitlines()) == 3
