import math

import numpy as np
import pytest

from inrmesh.network import LayerSpec, Mlp, activate, load_inr
from inrmesh.trainer import (
    BENCHMARKS,
    TARGETS,
    FitDivergedError,
    FitSpec,
    fit,
    init_network,
    loss_and_grads,
)

STEP = 1e-5


def _with_params(net, flat):
    layers, i = [], 0
    for layer in net.layers:
        nW, nb = layer.W.size, layer.b.size
        W = flat[i:i + nW].reshape(layer.W.shape)
        b = flat[i + nW:i + nW + nb]
        layers.append(LayerSpec(W, b, layer.activation))
        i += nW + nb
    return Mlp(tuple(layers), net.domain, net.encoding)


def _flat(parts):
    return np.concatenate([p.ravel() for pair in parts for p in pair])


def _preacts(net, X):
    h = X if net.encoding is None else net.encoding(X)
    out = []
    for layer in net.layers:
        z = h @ layer.W.T + layer.b
        out.append(z)
        h = activate(layer.activation, z)
    return out


def directional_errors(activation, directions=100, seed=0):
    rng = np.random.default_rng(seed)
    spec = FitSpec("corner_osc", depth=3, width=8, activation=activation)
    net = init_network(spec, rng)
    X = rng.random((64, 2))
    y = np.sin(5 * X[:, 0]) * X[:, 1]
    loss, gW, gb = loss_and_grads(net, X, y)
    theta = _flat((layer.W, layer.b) for layer in net.layers)
    grad = _flat(zip(gW, gb))
    errors, tried = [], 0
    while len(errors) < directions:
        tried += 1
        v = rng.standard_normal(theta.size)
        v /= np.linalg.norm(v)
        plus, minus = _with_params(net, theta + STEP * v), _with_params(net, theta - STEP * v)
        if activation == "relu":
            # stay away from kinks: no unit may change sign between the two evaluations
            if any(np.any(np.sign(a) != np.sign(b)) for a, b in zip(_preacts(plus, X), _preacts(minus, X))):
                continue
        fd = (loss_and_grads(plus, X, y)[0] - loss_and_grads(minus, X, y)[0]) / (2 * STEP)
        an = float(grad @ v)
        errors.append(abs(fd - an) / max(abs(fd), abs(an), 1e-12))
    assert tried < 50 * directions
    return np.array(errors)


@pytest.mark.parametrize("activation", ["relu", "tanh", "swish", "sine"])
def test_gradients_match_central_differences(activation):
    assert directional_errors(activation).max() <= 1e-4


def test_gradients_with_fourier_features():
    rng = np.random.default_rng(1)
    spec = FitSpec("corner_osc", depth=2, width=6, activation="tanh", fourier_features=4, fourier_scale=2.0)
    net = init_network(spec, rng)
    X, y = rng.random((32, 2)), rng.random(32)
    _, gW, gb = loss_and_grads(net, X, y)
    W0 = np.array(net.layers[0].W)
    W0[1, 2] += STEP
    up = loss_and_grads(Mlp((LayerSpec(W0, net.layers[0].b, "tanh"),) + net.layers[1:], net.domain, net.encoding), X, y)[0]
    W0[1, 2] -= 2 * STEP
    down = loss_and_grads(Mlp((LayerSpec(W0, net.layers[0].b, "tanh"),) + net.layers[1:], net.domain, net.encoding), X, y)[0]
    assert (up - down) / (2 * STEP) == pytest.approx(gW[0][1, 2], rel=1e-5)


def test_constant_target_fits():
    net, err = fit(FitSpec("constant", depth=2, width=4, epochs=3000, learning_rate=3e-2))
    assert err <= 1e-4
    assert net.num_neurons == 8


def test_fit_is_reproducible(tmp_path):
    spec = FitSpec("multilinear", depth=2, width=8, activation="swish", epochs=50, learning_rate=1e-2)
    fit(spec, path=tmp_path / "a.json", log_path=tmp_path / "a.csv")
    fit(spec, path=tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    log = (tmp_path / "a.csv").read_text().splitlines()
    assert log[0] == "epoch,loss" and len(log) == 52
    assert load_inr(tmp_path / "a.json").input_dim == 2


def test_divergence_is_reported():
    spec = FitSpec("multilinear", depth=2, width=8, activation="relu", epochs=30, learning_rate=1e6)
    with pytest.raises(FitDivergedError):
        fit(spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        FitSpec("nope")
    with pytest.raises(ValueError):
        FitSpec("constant", activation="identity")
    with pytest.raises(ValueError):
        FitSpec("constant", detail_fraction=0.5)
    with pytest.raises(ValueError):
        FitSpec("corner_osc", detail_fraction=1.5)


def test_targets():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(TARGETS["corner_osc"].fn(X), [math.sin(50.0), math.sin(1 / (1 / 50 + 1))])
    assert TARGETS["multilinear"].fn(np.array([[1.0, 1.0]]))[0] == pytest.approx(1.35)
    assert TARGETS["moving_blob"].fn(np.array([[0.6, 0.0, 0.0, 1.0]]))[0] == 1.0
    assert TARGETS["radial_tanh"].fn(np.array([[0.5, 0.0, 0.0]]))[0] == 0.0
    assert TARGETS["moving_blob"].domain.dim == 4


def test_benchmark_specs_match_required_architectures():
    b = BENCHMARKS["corner_osc"]
    assert (b.depth, b.width, b.activation) == (4, 32, "relu")
    assert TARGETS[BENCHMARKS["moving_blob"].target].domain.dim == 4
    assert TARGETS[BENCHMARKS["radial_tanh"].target].domain.dim == 3


def test_corner_benchmark_fit_quality(corner_osc_fit):
    _, err = corner_osc_fit
    assert err <= 0.05
