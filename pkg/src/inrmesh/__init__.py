"""Adaptive rectilinear meshes for implicit neural representations.

An INR (a small MLP over a box domain) is sampled on a quadtree/octree mesh
whose refinement is guided by how much of the network survives interpolative
pruning on each element.
"""

from .driver import Campaign, RunConfig, neuron_count_map, prune_on_element, run_campaign, run_time_slices
from .export import export_cell_scalars, export_slice, export_vtk
from .lowrank import DegenerateMatrixError, InterpDecomp, interp_decomp
from .mesh import MeshTree, VertexValues
from .metrics import IterationRecord, read_report, total_error, write_report
from .network import DomainBox, FourierEncoding, LayerSpec, Mlp, load_inr, rebuild_pruned, save_inr

__all__ = [
    "Campaign", "RunConfig", "neuron_count_map", "prune_on_element", "run_campaign", "run_time_slices",
    "export_cell_scalars", "export_slice", "export_vtk",
    "DegenerateMatrixError", "InterpDecomp", "interp_decomp",
    "MeshTree", "VertexValues",
    "IterationRecord", "read_report", "total_error", "write_report",
    "DomainBox", "FourierEncoding", "LayerSpec", "Mlp", "load_inr", "rebuild_pruned", "save_inr",
]
__version__ = "0.1.0"
