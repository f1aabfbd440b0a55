"""Feed-forward INRs: weight-file I/O, evaluation, pruned reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "swish", "sine", "identity")
FORMAT_VERSION = 1


class WeightFileError(ValueError):
    """Raised when a weight file cannot be parsed or violates the network invariants."""


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "swish":
        return x * sigmoid(x)
    if kind == "sine":
        return np.sin(x)
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def activate_grad(kind: str, x: np.ndarray) -> np.ndarray:
    """Elementwise derivative of the activation, evaluated at pre-activation `x`."""
    if kind == "relu":
        return (x > 0).astype(x.dtype)
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "swish":
        s = sigmoid(x)
        return s * (1.0 + x * (1.0 - s))
    if kind == "sine":
        return np.cos(x)
    if kind == "identity":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}")


def rowwise(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``X @ W.T`` with every row rounded the same way whatever the batch.

    BLAS kernels treat tail rows differently, so a point's value could depend on
    its position in the batch by an ulp; einsum's loops do not.
    """
    return np.einsum("ij,kj->ik", X, W)


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise WeightFileError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DomainBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.lo, 1, "domain.lo")
        hi = _frozen(self.hi, 1, "domain.hi")
        if lo.shape != hi.shape:
            raise WeightFileError("domain lo/hi lengths differ")
        if lo.size not in (2, 3, 4):
            raise WeightFileError(f"domain dimension must be 2, 3 or 4, got {lo.size}")
        if not np.all(lo < hi):
            raise WeightFileError(f"domain requires lo < hi on every axis: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lo) & (X <= self.hi), axis=1)

    def drop_axis(self, axis: int) -> "DomainBox":
        return DomainBox(np.delete(self.lo, axis), np.delete(self.hi, axis))


@dataclass(frozen=True)
class FourierEncoding:
    """Fixed sinusoidal feature map ``[cos(2 pi (X B^T + phase)), sin(...)]``.

    The phase is zero for freshly built encodings; it becomes nonzero when an
    input axis is frozen at a constant value (see :func:`restrict`).
    """

    B: np.ndarray
    phase: np.ndarray | None = None

    def __post_init__(self):
        B = _frozen(self.B, 2, "fourier.B")
        phase = np.zeros(B.shape[0]) if self.phase is None else self.phase
        phase = _frozen(phase, 1, "fourier.phase")
        if phase.size != B.shape[0]:
            raise WeightFileError("fourier.phase length must equal the number of features")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "phase", phase)

    @property
    def num_features(self) -> int:
        return self.B.shape[0]

    @property
    def output_dim(self) -> int:
        return 2 * self.B.shape[0]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        arg = 2.0 * np.pi * (rowwise(X, self.B) + self.phase)
        return np.concatenate([np.cos(arg), np.sin(arg)], axis=1)


@dataclass(frozen=True)
class LayerSpec:
    W: np.ndarray
    b: np.ndarray
    activation: str

    def __post_init__(self):
        W = _frozen(self.W, 2, "weight")
        b = _frozen(self.b, 1, "bias")
        if b.size != W.shape[0]:
            raise WeightFileError(f"bias length {b.size} does not match weight rows {W.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise WeightFileError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def width(self) -> int:
        return self.W.shape[0]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return activate(self.activation, rowwise(X, self.W) + self.b)


@dataclass(frozen=True)
class Mlp:
    """An immutable fully connected INR.

    All layers but the last are hidden layers; the last one must be linear.
    Hidden neurons are the only prunable units, so ``num_neurons`` excludes
    both the encoding and the output layer.
    """

    layers: tuple[LayerSpec, ...]
    domain: DomainBox
    encoding: FourierEncoding | None = None
    output_component: int = 0
    input_dim: int = field(init=False)
    output_dim: int = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise WeightFileError("network needs at least one layer")
        d = self.domain.dim
        if self.encoding is not None and self.encoding.B.shape[1] != d:
            raise WeightFileError(
                f"fourier.B has {self.encoding.B.shape[1]} columns, domain has {d} axes"
            )
        n = d if self.encoding is None else self.encoding.output_dim
        for i, layer in enumerate(layers):
            if layer.W.shape[1] != n:
                raise WeightFileError(
                    f"shape mismatch: layer {i} expects {layer.W.shape[1]} inputs, "
                    f"previous stage produces {n}"
                )
            n = layer.width
        if layers[-1].activation != "identity":
            raise WeightFileError("output layer activation must be 'identity'")
        if not 0 <= self.output_component < n:
            raise WeightFileError(f"output_component {self.output_component} out of range for {n} outputs")
        object.__setattr__(self, "input_dim", d)
        object.__setattr__(self, "output_dim", n)

    @property
    def hidden(self) -> tuple[LayerSpec, ...]:
        return self.layers[:-1]

    @property
    def num_neurons(self) -> int:
        return sum(layer.width for layer in self.hidden)

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.width for layer in self.hidden]

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected points with {self.input_dim} coordinates, got shape {X.shape}")
        return X

    def hidden_activations(self, X) -> list[np.ndarray]:
        """Post-activation matrices of every hidden layer, each ``(len(X), width)``."""
        h = self._check_input(X)
        if self.encoding is not None:
            h = self.encoding(h)
        out = []
        for layer in self.hidden:
            h = layer(h)
            out.append(h)
        return out

    def forward_all(self, X) -> np.ndarray:
        h = self._check_input(X)
        if self.encoding is not None:
            h = self.encoding(h)
        for layer in self.layers:
            h = layer(h)
        return h

    def __call__(self, X) -> np.ndarray:
        return self.forward_all(X)[:, self.output_component]


def forward(net: Mlp, X) -> np.ndarray:
    """Evaluate the selected output component of `net` on a batch of points."""
    return net(X)


def rebuild_pruned(net: Mlp, decomps: Sequence) -> Mlp:
    """Build the pruned network defined by one interpolative decomposition per hidden layer.

    Hidden layer ``i`` keeps rows ``I_i`` of its weights and entries ``I_i`` of
    its bias; the following layer absorbs the interpolation matrix through
    ``W_{i+1} D_i^T``. Layers are rewritten first to last.
    """
    hidden = net.hidden
    if len(decomps) != len(hidden):
        raise ValueError(f"got {len(decomps)} decompositions for {len(hidden)} hidden layers")
    weights = [layer.W for layer in net.layers]
    biases = [layer.b for layer in net.layers]
    for i, dec in enumerate(decomps):
        idx = np.asarray(dec.index_set, dtype=np.intp)
        m = hidden[i].width
        if idx.size == 0 or idx.min() < 0 or idx.max() >= m:
            raise IndexError(f"index set of layer {i} out of range for width {m}")
        D = np.asarray(dec.D, dtype=np.float64)
        if D.shape != (idx.size, m):
            raise ValueError(f"interpolation matrix of layer {i} has shape {D.shape}, expected {(idx.size, m)}")
        weights[i] = weights[i][idx, :]
        biases[i] = biases[i][idx]
        weights[i + 1] = weights[i + 1] @ D.T
    layers = tuple(
        LayerSpec(W, b, layer.activation) for W, b, layer in zip(weights, biases, net.layers)
    )
    return Mlp(layers, net.domain, net.encoding, net.output_component)


def restrict(net: Mlp, axis: int, value: float) -> Mlp:
    """Freeze input `axis` at `value`, giving a network on the remaining axes."""
    d = net.input_dim
    if d <= 2:
        raise ValueError("cannot restrict a 2D network further")
    if not net.domain.lo[axis] <= value <= net.domain.hi[axis]:
        raise ValueError(
            f"value {value} outside domain extent [{net.domain.lo[axis]}, {net.domain.hi[axis]}] on axis {axis}"
        )
    layers = list(net.layers)
    encoding = net.encoding
    if encoding is None:
        first = layers[0]
        layers[0] = LayerSpec(np.delete(first.W, axis, axis=1), first.b + first.W[:, axis] * value, first.activation)
    else:
        encoding = FourierEncoding(
            np.delete(encoding.B, axis, axis=1), encoding.phase + encoding.B[:, axis] * value
        )
    return Mlp(tuple(layers), net.domain.drop_axis(axis), encoding, net.output_component)


def to_dict(net: Mlp) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "domain": {"lo": net.domain.lo.tolist(), "hi": net.domain.hi.tolist()},
    }
    if net.output_component:
        doc["output_component"] = net.output_component
    if net.encoding is not None:
        doc["fourier"] = {"B": net.encoding.B.tolist()}
        if np.any(net.encoding.phase):
            doc["fourier"]["phase"] = net.encoding.phase.tolist()
    doc["layers"] = [
        {"weight": layer.W.tolist(), "bias": layer.b.tolist(), "activation": layer.activation}
        for layer in net.layers
    ]
    return doc


def from_dict(doc: dict) -> Mlp:
    try:
        if doc.get("version") != FORMAT_VERSION:
            raise WeightFileError(f"unsupported weight-file version {doc.get('version')!r}")
        domain = DomainBox(doc["domain"]["lo"], doc["domain"]["hi"])
        encoding = None
        if doc.get("fourier") is not None:
            encoding = FourierEncoding(doc["fourier"]["B"], doc["fourier"].get("phase"))
        layers = tuple(
            LayerSpec(entry["weight"], entry["bias"], entry["activation"]) for entry in doc["layers"]
        )
        net = Mlp(layers, domain, encoding, int(doc.get("output_component", 0)))
        input_dim, output_dim = doc["input_dim"], doc["output_dim"]
    except (KeyError, TypeError) as exc:
        raise WeightFileError(f"malformed weight file: missing or invalid field {exc}") from exc
    if net.input_dim != input_dim:
        raise WeightFileError(f"input_dim {input_dim} disagrees with domain dimension {net.input_dim}")
    if net.output_dim != output_dim:
        raise WeightFileError(f"output_dim {output_dim} disagrees with last layer width {net.output_dim}")
    return net


def load_inr(path) -> Mlp:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: not a valid weight file ({exc})") from exc
    if not isinstance(doc, dict):
        raise WeightFileError(f"{path}: top level must be an object")
    return from_dict(doc)


def save_inr(net: Mlp, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net), indent=1) + "\n", encoding="utf-8")
