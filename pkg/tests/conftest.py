import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pytest

from inrmesh.network import DomainBox, LayerSpec, Mlp, load_inr, save_inr
from inrmesh.trainer import BENCHMARKS, fit

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] AC{number:02d} {title}" + (f" -- {detail}" if detail else "")
        ACCEPTANCE_RESULTS.append(line)
        print(line)
        return ok

    return record


def random_net(rng, dims=(2, 16, 16, 1), activation="tanh", lo=None, hi=None):
    d = dims[0]
    layers = []
    for i, (n, m) in enumerate(zip(dims[:-1], dims[1:])):
        act = "identity" if i == len(dims) - 2 else activation
        layers.append(LayerSpec(rng.standard_normal((m, n)) / np.sqrt(n), rng.uniform(-1, 1, m), act))
    lo = np.zeros(d) if lo is None else lo
    hi = np.ones(d) if hi is None else hi
    return Mlp(tuple(layers), DomainBox(lo, hi))


def constant_net(dim=2, widths=(8, 8, 8), value=0.7):
    rng = np.random.default_rng(5)
    layers, n = [], dim
    for w in widths:
        layers.append(LayerSpec(np.zeros((w, n)), rng.uniform(0.1, 1.0, w), "tanh"))
        n = w
    out = LayerSpec(rng.standard_normal((1, n)), [0.0], "identity")
    net = Mlp(tuple(layers) + (out,), DomainBox(np.zeros(dim), np.ones(dim)))
    shift = value - net(np.zeros((1, dim)))[0]
    return Mlp(tuple(layers) + (LayerSpec(out.W, out.b + shift, "identity"),), net.domain)


def _cached_fit(request, name):
    spec = BENCHMARKS[name]
    digest = hashlib.sha1(json.dumps(asdict(spec), sort_keys=True).encode()).hexdigest()[:12]
    cache_dir = Path(request.config.cache.mkdir("inrmesh_fits"))
    path = cache_dir / f"{name}_{digest}.json"
    meta = cache_dir / f"{name}_{digest}.rmse"
    if path.exists() and meta.exists():
        return load_inr(path), float(meta.read_text())
    net, err = fit(spec)
    save_inr(net, path)
    meta.write_text(repr(err))
    return load_inr(path), err


@pytest.fixture(scope="session")
def corner_osc_fit(request):
    return _cached_fit(request, "corner_osc")


@pytest.fixture(scope="session")
def moving_blob_fit(request):
    return _cached_fit(request, "moving_blob")


@pytest.fixture(scope="session")
def radial_tanh_fit(request):
    return _cached_fit(request, "radial_tanh")
