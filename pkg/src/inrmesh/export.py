"""Legacy ASCII VTK output for meshes, slices and per-cell diagnostics.

Numbers are written with ``repr`` (shortest round-trip decimal), so files
are byte-identical for identical inputs and parse back exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import MeshTree, VertexValues, corner_offsets
from .network import Mlp

VTK_QUAD = 9
VTK_HEXAHEDRON = 12
# corner-index order (bit i = axis i) to VTK node order
NODE_ORDER = {2: [0, 1, 3, 2], 3: [0, 1, 3, 2, 4, 5, 7, 6]}
CELL_TYPE = {2: VTK_QUAD, 3: VTK_HEXAHEDRON}


@dataclass
class VtkDataset:
    points: np.ndarray  # (n, 3)
    cells: np.ndarray  # (n_cells, 4 or 8), VTK node order
    cell_type: int
    point_scalars: tuple[str, np.ndarray] | None = None
    cell_scalars: tuple[str, np.ndarray] | None = None


def _num(x) -> str:
    return repr(float(x))


def _pad3(points: np.ndarray) -> np.ndarray:
    out = np.zeros((len(points), 3))
    out[:, : points.shape[1]] = points
    return out


def write_vtk(ds: VtkDataset, path, title: str = "inrmesh") -> None:
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(ds.points)} double",
    ]
    lines += [" ".join(_num(c) for c in p) for p in ds.points.tolist()]
    n_cells, npc = ds.cells.shape
    lines.append(f"CELLS {n_cells} {n_cells * (npc + 1)}")
    lines += [f"{npc} " + " ".join(str(i) for i in cell) for cell in ds.cells.tolist()]
    lines.append(f"CELL_TYPES {n_cells}")
    lines += [str(ds.cell_type)] * n_cells
    if ds.point_scalars is not None:
        name, values = ds.point_scalars
        lines += [f"POINT_DATA {len(ds.points)}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in values.tolist()]
    if ds.cell_scalars is not None:
        name, values = ds.cell_scalars
        lines += [f"CELL_DATA {n_cells}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def mesh_dataset(mesh: MeshTree, vertex_values: VertexValues | None = None, cell_scalars=None) -> VtkDataset:
    if mesh.dim not in NODE_ORDER:
        raise ValueError(f"cannot export a {mesh.dim}D mesh directly; slice it first")
    points, corner_index = mesh.unique_vertices()
    ds = VtkDataset(_pad3(points), corner_index[:, NODE_ORDER[mesh.dim]], CELL_TYPE[mesh.dim])
    if vertex_values is not None:
        ds.point_scalars = ("inr_value", vertex_values.aligned(mesh))
    if cell_scalars is not None:
        name, values = cell_scalars
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (mesh.leaf_count,):
            raise ValueError("need one cell value per leaf")
        ds.cell_scalars = (name, values)
    return ds


def export_vtk(mesh: MeshTree, vertex_values: VertexValues, path) -> VtkDataset:
    """Write the leaves of a 2D or 3D mesh with the INR sampled at its vertices."""
    ds = mesh_dataset(mesh, vertex_values)
    write_vtk(ds, path)
    return ds


def export_cell_scalars(mesh: MeshTree, values, path, name: str = "neuron_count") -> VtkDataset:
    ds = mesh_dataset(mesh, cell_scalars=(name, values))
    write_vtk(ds, path)
    return ds


def slice_dataset(mesh: MeshTree, net: Mlp, axis: int, value: float) -> VtkDataset:
    """Cross-section of `mesh` at ``x[axis] == value`` with freshly evaluated INR values.

    A leaf whose face lies on the slice belongs to it only if it is the one
    with the smaller ``lo`` (or the plane is the domain's lower face).
    """
    d = mesh.dim
    if d not in (3, 4):
        raise ValueError(f"slicing needs a 3D or 4D mesh, got {d}D")
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for a {d}D mesh")
    dlo, dhi = mesh.domain.lo[axis], mesh.domain.hi[axis]
    if not dlo <= value <= dhi:
        raise ValueError(f"slice value {value} outside [{dlo}, {dhi}] on axis {axis}")
    lo, hi = mesh.leaf_bounds()
    take = (lo[:, axis] < value) & (value <= hi[:, axis])
    if value == dlo:
        take = lo[:, axis] == value
    keep = [i for i in range(d) if i != axis]
    _, _, lo_keys, size = mesh._leaf_arrays()
    lo_keys, size = lo_keys[take][:, keep], size[take]
    offsets = corner_offsets(d - 1)
    sub = lo_keys[:, None, :] + offsets[None, :, :] * size[:, None, None]
    radix = (1 << mesh.key_level) + 1
    packed = np.zeros(sub.shape[:2], dtype=np.int64)
    for i in range(d - 1):
        packed = packed * radix + sub[..., i]
    keys, inverse = np.unique(packed, return_inverse=True)
    corner_index = inverse.reshape(packed.shape)
    # unpack sub-lattice keys, embed them back into d dimensions
    rem = keys.copy()
    sub_keys = np.empty((keys.size, d - 1), dtype=np.int64)
    for i in range(d - 2, -1, -1):
        sub_keys[:, i] = rem % radix
        rem //= radix
    full = np.zeros((keys.size, d), dtype=np.int64)
    full[:, keep] = sub_keys
    pts = mesh.coords(full)
    pts[:, axis] = value
    values = net(pts)
    return VtkDataset(
        _pad3(pts[:, keep]),
        corner_index[:, NODE_ORDER[d - 1]],
        CELL_TYPE[d - 1],
        point_scalars=("inr_value", values),
    )


def export_slice(mesh: MeshTree, net: Mlp, axis: int, value: float, path) -> VtkDataset:
    ds = slice_dataset(mesh, net, axis, value)
    write_vtk(ds, path)
    return ds


def output_filename(run: str, mode: str, iteration: int, axis: int | None = None, value: float | None = None) -> str:
    name = f"{run}_{mode}_iter{iteration}"
    if axis is not None:
        name += f"_slice_{axis}{value:g}"
    return name + ".vtk"
