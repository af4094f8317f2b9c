"""Geometric and topological comparison of mesh sequences."""

from .distances import directed_distances, hausdorff_distance, mean_surface_distance, sample_points
from .branches import MATCH_GATE_MM, branch_metrics, curve_distance, match_branches
from .voxelize import voxelize
from .report import HEADER, MetricsRow, emit_report, read_report, summarize
from .sequence import mesh_tree, phase_meshes, validate_sequence

__all__ = [
    "directed_distances",
    "hausdorff_distance",
    "mean_surface_distance",
    "sample_points",
    "MATCH_GATE_MM",
    "branch_metrics",
    "curve_distance",
    "match_branches",
    "voxelize",
    "HEADER",
    "MetricsRow",
    "emit_report",
    "read_report",
    "summarize",
    "mesh_tree",
    "phase_meshes",
    "validate_sequence",
]
