"""How many neurons does each region of the domain need?

For every leaf of a uniform mesh the network is pruned at a fixed tolerance and
the surviving hidden neurons are counted. Regions with fine detail keep more.
"""
from pathlib import Path

import numpy as np

from inrmesh import MeshTree, export_cell_scalars, neuron_count_map
from inrmesh.trainer import FitSpec, fit

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

net, _ = fit(FitSpec("corner_osc", epochs=2000, learning_rate=1e-2, detail_fraction=0.5))
mesh = MeshTree(net.domain)
mesh.refine_uniform(3)
counts = neuron_count_map(net, mesh, eps=1e-3)

grid = np.zeros((8, 8), dtype=int)
for e, c in zip(mesh.leaves, counts):
    i, j = (e.lo * 8).astype(int)
    grid[j, i] = c
print(f"kept neurons per leaf (of {net.num_neurons}); origin at the bottom left")
print(np.flipud(grid))

export_cell_scalars(mesh, counts, out / "demo_neuron_map.vtk")
print("wrote", out / "demo_neuron_map.vtk")
