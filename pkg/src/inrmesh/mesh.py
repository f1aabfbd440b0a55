"""Adaptive 2^d-tree meshes of axis-aligned boxes.

Every element and vertex is addressed by integer coordinates on the finest
dyadic lattice the tree supports (``2**key_level`` cells per axis). Vertices
are deduplicated on those integers, never on floats, and mapped to physical
coordinates through a single function so the same vertex always gets the
same coordinates.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from .network import DomainBox

PURPOSES = {"global": 0, "id": 1, "err": 2, "basic": 3}


class MeshContractError(RuntimeError):
    """Raised on refinement requests that break the tree's contract."""


def key_level(dim: int) -> int:
    # packed vertex keys must fit in int64: (2**L + 1)**dim < 2**63
    return 63 // dim - 1


def corner_offsets(dim: int) -> np.ndarray:
    """``(2**dim, dim)`` 0/1 offsets; bit ``i`` of the corner index moves along axis ``i``."""
    c = np.arange(2**dim)
    return ((c[:, None] >> np.arange(dim)) & 1).astype(np.int64)


_OFFSET_TUPLES = {d: [tuple(int(v) for v in row) for row in corner_offsets(d)] for d in (1, 2, 3, 4)}


class Element:
    __slots__ = ("mesh", "level", "anchor", "done_refining", "children", "parent")

    def __init__(self, mesh: "MeshTree", level: int, anchor: tuple, parent=None):
        self.mesh = mesh
        self.level = level
        self.anchor = anchor
        self.parent = parent
        self.done_refining = False
        self.children: list[Element] | None = None

    def __repr__(self):
        return f"Element(level={self.level}, anchor={self.anchor}, done={self.done_refining})"

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def path(self) -> tuple[int, ...]:
        """Child indices from the root down to this element."""
        steps = []
        for depth in range(self.level - 1, -1, -1):
            steps.append(sum(((a >> depth) & 1) << i for i, a in enumerate(self.anchor)))
        return tuple(steps)

    def _keys(self, offset) -> np.ndarray:
        shift = self.mesh.key_level - self.level
        return (np.asarray(self.anchor, dtype=np.int64) + offset) << shift

    @property
    def lo(self) -> np.ndarray:
        return self.mesh.coords(self._keys(0))

    @property
    def hi(self) -> np.ndarray:
        return self.mesh.coords(self._keys(1))

    def corner_keys(self) -> np.ndarray:
        """Packed keys of the ``2**d`` corners, in corner-index order."""
        shift = self.mesh.key_level - self.level
        keys = (np.asarray(self.anchor, dtype=np.int64) + corner_offsets(self.mesh.dim)) << shift
        return self.mesh.pack(keys)

    def corners(self) -> np.ndarray:
        shift = self.mesh.key_level - self.level
        keys = (np.asarray(self.anchor, dtype=np.int64) + corner_offsets(self.mesh.dim)) << shift
        return self.mesh.coords(keys)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all((x >= self.lo) & (x <= self.hi)))


class MeshTree:
    """Isotropic 2^d-tree over a domain box; the leaves are the mesh."""

    def __init__(self, domain: DomainBox):
        self.domain = domain
        self.dim = domain.dim
        self.key_level = key_level(self.dim)
        self._full = 1 << self.key_level
        self._radix = self._full + 1
        self._span = domain.hi - domain.lo
        self.root = Element(self, 0, (0,) * self.dim)
        self.leaf_count = 1
        self._leaves: list[Element] | None = [self.root]
        self._cache: dict = {}

    # coordinates and keys ------------------------------------------------

    def coords(self, keys) -> np.ndarray:
        """Physical coordinates of integer lattice keys (last axis = dim)."""
        keys = np.asarray(keys, dtype=np.int64)
        x = self.domain.lo + self._span * (keys / self._full)
        return np.where(keys == self._full, self.domain.hi, x)

    def pack(self, keys) -> np.ndarray:
        """Pack ``(..., dim)`` lattice keys into int64 preserving lexicographic order."""
        keys = np.asarray(keys, dtype=np.int64)
        out = keys[..., 0].copy()
        for i in range(1, self.dim):
            out = out * self._radix + keys[..., i]
        return out

    def unpack(self, packed) -> np.ndarray:
        packed = np.asarray(packed, dtype=np.int64).copy()
        out = np.empty(packed.shape + (self.dim,), dtype=np.int64)
        for i in range(self.dim - 1, -1, -1):
            out[..., i] = packed % self._radix
            packed //= self._radix
        return out

    # structure -------------------------------------------------------------

    @property
    def leaves(self) -> list[Element]:
        """Leaves in depth-first tree-path order."""
        if self._leaves is None:
            out, stack = [], [self.root]
            while stack:
                e = stack.pop()
                if e.children is None:
                    out.append(e)
                else:
                    stack.extend(reversed(e.children))
            self._leaves = out
        return self._leaves

    @property
    def max_level(self) -> int:
        return max(e.level for e in self.leaves)

    def _split(self, element: Element) -> None:
        if element.children is not None:
            raise MeshContractError(f"{element!r} is not a leaf")
        if element.done_refining:
            raise MeshContractError(f"{element!r} is marked done and cannot be refined")
        if element.level + 1 > self.key_level:
            raise MeshContractError(f"maximum depth {self.key_level} reached for a {self.dim}D mesh")
        base = [2 * a for a in element.anchor]
        element.children = [
            Element(self, element.level + 1, tuple(b + o for b, o in zip(base, off)), element)
            for off in _OFFSET_TUPLES[self.dim]
        ]
        self.leaf_count += 2**self.dim - 1
        self._cache.clear()

    def refine(self, element: Element) -> None:
        self._split(element)
        self._leaves = None

    def refine_many(self, elements: Iterable[Element]) -> None:
        """Refine several leaves; the leaf order stays depth-first."""
        marked = set()
        for e in elements:
            self._split(e)
            marked.add(id(e))
        if self._leaves is not None:
            self._leaves = [c for e in self._leaves for c in (e.children if id(e) in marked else (e,))]

    def refine_uniform(self, times: int = 1) -> None:
        for _ in range(times):
            self.refine_many(list(self.leaves))

    # vectorized views --------------------------------------------------------

    def _leaf_arrays(self):
        if "leaf" not in self._cache:
            leaves = self.leaves
            levels = np.fromiter((e.level for e in leaves), dtype=np.int64, count=len(leaves))
            anchors = np.array([e.anchor for e in leaves], dtype=np.int64).reshape(len(leaves), self.dim)
            lo_keys = anchors << (self.key_level - levels)[:, None]
            size = (1 << (self.key_level - levels))
            self._cache["leaf"] = (levels, anchors, lo_keys, size)
        return self._cache["leaf"]

    def leaf_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        _, _, lo_keys, size = self._leaf_arrays()
        return self.coords(lo_keys), self.coords(lo_keys + size[:, None])

    def corner_keys(self) -> np.ndarray:
        """``(leaf_count, 2**dim)`` packed corner keys, leaves in tree order."""
        if "corners" not in self._cache:
            _, _, lo_keys, size = self._leaf_arrays()
            keys = lo_keys[:, None, :] + corner_offsets(self.dim)[None, :, :] * size[:, None, None]
            self._cache["corners"] = self.pack(keys)
        return self._cache["corners"]

    def vertex_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted unique packed vertex keys and the per-leaf corner index map."""
        if "vertices" not in self._cache:
            ck = self.corner_keys()
            keys, inverse = np.unique(ck, return_inverse=True)
            self._cache["vertices"] = (keys, inverse.reshape(ck.shape))
        return self._cache["vertices"]

    def unique_vertices(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct leaf corners in lexicographic order, plus the per-leaf corner index map."""
        keys, corner_index = self.vertex_keys()
        return self.coords(self.unpack(keys)), corner_index

    @property
    def dofs(self) -> int:
        return int(self.vertex_keys()[0].size)

    def _level_tables(self):
        if "levels" not in self._cache:
            levels, anchors, _, _ = self._leaf_arrays()
            tables = []
            for lev in np.unique(levels):
                idx = np.flatnonzero(levels == lev)
                packed = self.pack(anchors[idx])
                order = np.argsort(packed)
                tables.append((int(lev), packed[order], idx[order]))
            self._cache["levels"] = tables
        return self._cache["levels"]

    def locate(self, X) -> np.ndarray:
        """Index (into :attr:`leaves`) of the leaf containing each point.

        Points on shared faces go to the leaf with the smaller ``lo``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}D points, got shape {X.shape}")
        if not np.all(self.domain.contains(X)):
            raise ValueError("point outside the mesh domain")
        s = (X - self.domain.lo) / self._span * self._full
        q = np.clip(np.ceil(s).astype(np.int64) - 1, 0, self._full - 1)
        result = np.full(len(X), -1, dtype=np.int64)
        for lev, packed, idx in self._level_tables():
            pk = self.pack(q >> (self.key_level - lev))
            pos = np.minimum(np.searchsorted(packed, pk), packed.size - 1)
            hit = packed[pos] == pk
            result[hit] = idx[pos[hit]]
        return result

    def interpolate(self, vertex_values: "VertexValues", X) -> np.ndarray:
        """Multilinear interpolation of vertex data at points `X`."""
        single = np.ndim(X) == 1
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        leaf = self.locate(X)
        keys, corner_index = self.vertex_keys()
        values = vertex_values.lookup(keys)
        _, _, lo_keys, size = self._leaf_arrays()
        lo = self.coords(lo_keys[leaf])
        hi = self.coords(lo_keys[leaf] + size[leaf][:, None])
        u = np.clip((X - lo) / (hi - lo), 0.0, 1.0)
        out = multilinear(u, values[corner_index[leaf]])
        return out[0] if single else out


def _lerp(a, b, u):
    # exact at both ends and for a == b
    diff = b - a
    return np.where(u <= 0.5, a + u * diff, b - (1.0 - u) * diff)


def multilinear(u: np.ndarray, corner_values: np.ndarray) -> np.ndarray:
    """Interpolate inside unit boxes.

    `u` is ``(n, d)`` local coordinates in ``[0, 1]``; `corner_values` is
    ``(n, 2**d)`` in corner-index order (bit i of the index is axis i).
    """
    n, d = u.shape
    v = np.asarray(corner_values, dtype=np.float64).reshape((n,) + (2,) * d)
    for i in range(d):
        ui = u[:, i].reshape((n,) + (1,) * (d - i - 1))
        v = _lerp(v[..., 0], v[..., 1], ui)
    return v


class VertexValues:
    """Field values at mesh vertices, keyed by packed lattice keys."""

    def __init__(self, keys=None, values=None):
        self.keys = np.zeros(0, dtype=np.int64) if keys is None else np.asarray(keys, dtype=np.int64)
        self.values = np.zeros(0) if values is None else np.asarray(values, dtype=np.float64)
        order = np.argsort(self.keys, kind="stable")
        self.keys, self.values = self.keys[order], self.values[order]

    def __len__(self):
        return self.keys.size

    def missing(self, keys: np.ndarray) -> np.ndarray:
        return keys[~np.isin(keys, self.keys)]

    def add(self, keys: np.ndarray, values: np.ndarray) -> None:
        keys = np.asarray(keys, dtype=np.int64)
        all_keys = np.concatenate([self.keys, keys])
        all_values = np.concatenate([self.values, np.asarray(values, dtype=np.float64)])
        order = np.argsort(all_keys, kind="stable")
        self.keys, self.values = all_keys[order], all_values[order]

    def lookup(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        if self.keys.size == 0:
            raise KeyError("no vertex values stored")
        pos = np.minimum(np.searchsorted(self.keys, keys), self.keys.size - 1)
        if not np.all(self.keys[pos] == keys):
            raise KeyError(f"{int(np.sum(self.keys[pos] != keys))} vertices have no value")
        return self.values[pos]

    def update(self, mesh: MeshTree, fn: Callable[[np.ndarray], np.ndarray]) -> int:
        """Evaluate `fn` at mesh vertices not yet covered; returns how many were new."""
        new = self.missing(mesh.vertex_keys()[0])
        if new.size:
            self.add(new, fn(mesh.coords(mesh.unpack(new))))
        return int(new.size)

    @classmethod
    def from_function(cls, mesh: MeshTree, fn) -> "VertexValues":
        vv = cls()
        vv.update(mesh, fn)
        return vv

    @classmethod
    def from_mapping(cls, mesh: MeshTree, mapping: Mapping[tuple, float]) -> "VertexValues":
        """Build from ``{point tuple: value}``; points must be mesh vertices."""
        keys, _ = mesh.vertex_keys()
        coords = mesh.coords(mesh.unpack(keys))
        lut = {tuple(p): k for p, k in zip(coords.tolist(), keys.tolist())}
        pairs = [(lut[tuple(float(c) for c in p)], v) for p, v in mapping.items()]
        return cls([k for k, _ in pairs], [v for _, v in pairs])

    def aligned(self, mesh: MeshTree) -> np.ndarray:
        """Values in the order of :meth:`MeshTree.unique_vertices`."""
        return self.lookup(mesh.vertex_keys()[0])


def element_rng(seed: int, element: Element, purpose: str) -> np.random.Generator:
    """Counter-based stream keyed by seed, element position and purpose."""
    entropy = [int(seed), PURPOSES[purpose], element.level, *element.anchor]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def sample_uniform(element: Element, n: int, seed: int, purpose: str = "id") -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one sample")
    rng = element_rng(seed, element, purpose)
    lo, hi = element.lo, element.hi
    return lo + (hi - lo) * rng.random((n, element.mesh.dim))


def interpolate(mesh: MeshTree, vertex_values: VertexValues, x) -> np.ndarray:
    return mesh.interpolate(vertex_values, x)


def unique_vertices(mesh: MeshTree):
    return mesh.unique_vertices()


def refine(mesh: MeshTree, element: Element) -> None:
    mesh.refine(element)
