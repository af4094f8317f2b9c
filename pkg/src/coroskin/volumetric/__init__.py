from .volume import FrangiParams, VoxelVolume
from .frangi import HessianEigen, compute_vesselness, hessian, hessian_eigen, segment, vesselness_from_eigen
from .tree import Bifurcation, Branch, CenterlinePoint, VesselTree
from .centerline import backtrack, extract_centerline, fast_march, find_endpoints
from .topology import analyze_topology, murray_residual

__all__ = [
    "FrangiParams",
    "VoxelVolume",
    "HessianEigen",
    "compute_vesselness",
    "hessian",
    "hessian_eigen",
    "segment",
    "vesselness_from_eigen",
    "Bifurcation",
    "Branch",
    "CenterlinePoint",
    "VesselTree",
    "backtrack",
    "extract_centerline",
    "fast_march",
    "find_endpoints",
    "analyze_topology",
    "murray_residual",
]
