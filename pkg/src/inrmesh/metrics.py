"""Global accuracy of a mesh against its INR, and the DOFs-vs-error report."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .mesh import PURPOSES, MeshTree, VertexValues
from .network import DomainBox, Mlp

REPORT_HEADER = ("iteration", "dofs", "leaf_count", "rmse", "wall_time_s")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    dofs: int
    rmse: float
    leaf_count: int
    wall_time: float = 0.0


def default_total_samples(dim: int) -> int:
    return 262144 if dim == 2 else 1048576


def global_sample(domain: DomainBox, n: int, seed: int) -> np.ndarray:
    """Uniform points over the whole domain; the stream depends only on (seed, n)."""
    ss = np.random.SeedSequence([int(seed), PURPOSES["global"]])
    rng = np.random.Generator(np.random.Philox(ss))
    return domain.lo + (domain.hi - domain.lo) * rng.random((n, domain.dim))


def rmse(reference: np.ndarray, approx: np.ndarray) -> float:
    # np.mean reduces pairwise, so the result does not depend on thread layout
    return float(np.sqrt(np.mean((reference - approx) ** 2)))


def total_error(net: Mlp, mesh: MeshTree, vertex_values: VertexValues, n_total: int, seed: int) -> float:
    """RMSE between the INR and the mesh interpolant on a fixed global sample."""
    X = global_sample(mesh.domain, n_total, seed)
    return rmse(net(X), mesh.interpolate(vertex_values, X))


def write_report(records, path, include_timing: bool = True) -> None:
    """Write the per-iteration CSV.

    With ``include_timing=False`` the wall-time column is zeroed so identical
    campaigns give byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in records:
            wall = r.wall_time if include_timing else 0.0
            w.writerow([r.iteration, r.dofs, r.leaf_count, f"{r.rmse:.17g}", f"{wall:.17g}"])


def read_report(path) -> list[IterationRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_HEADER:
            raise ValueError(f"{path}: unexpected report header {reader.fieldnames}")
        return [
            IterationRecord(
                iteration=int(row["iteration"]),
                dofs=int(row["dofs"]),
                rmse=float(row["rmse"]),
                leaf_count=int(row["leaf_count"]),
                wall_time=float(row["wall_time_s"]),
            )
            for row in reader
        ]


def format_report(records) -> str:
    lines = [f"{'iter':>4}  {'dofs':>10}  {'leaves':>10}  {'rmse':>12}  {'time [s]':>9}"]
    for r in records:
        lines.append(f"{r.iteration:>4}  {r.dofs:>10}  {r.leaf_count:>10}  {r.rmse:>12.5g}  {r.wall_time:>9.2f}")
    return "\n".join(lines)
