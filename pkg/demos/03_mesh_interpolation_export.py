"""Quadtree meshes, multilinear interpolation and legacy VTK output.

Vertex values are stored once per unique vertex. Hanging vertices are allowed;
every leaf interpolates from its own four corners.
"""
from pathlib import Path

import numpy as np

from inrmesh import DomainBox, MeshTree, VertexValues, export_vtk

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

mesh = MeshTree(DomainBox([0, 0], [2, 1]))
mesh.refine_uniform(2)
print("uniform level 2:", mesh.leaf_count, "leaves,", mesh.dofs, "vertices")

# refine towards the lower-left corner a few times
for _ in range(3):
    mesh.refine(mesh.leaves[0])
print("after local refinement:", mesh.leaf_count, "leaves,", mesh.dofs, "vertices")

field = lambda X: np.sin(3 * X[:, 0]) * X[:, 1]
values = VertexValues.from_function(mesh, field)
X = np.random.default_rng(0).random((2000, 2)) * [2, 1]
err = mesh.interpolate(values, X) - field(X)
print(f"interpolation error: max {np.abs(err).max():.3e}, rms {np.sqrt(np.mean(err**2)):.3e}")

ds = export_vtk(mesh, values, out / "demo_quadtree.vtk")
print("wrote", out / "demo_quadtree.vtk", "with", len(ds.points), "points and", len(ds.cells), "quads")
