from .fem import bilaplacian, lumped_mass, stiffness_matrix
from .activeset import BoxQP, kkt_residual
from .handles import HandleSet, build_handles, nearest_handle
from .weights import WeightMatrix, handle_constraints, normalize_weights, solve_weights
from .blend import apply_skinning, pivot_affine

__all__ = [
    "bilaplacian",
    "lumped_mass",
    "stiffness_matrix",
    "BoxQP",
    "kkt_residual",
    "HandleSet",
    "build_handles",
    "nearest_handle",
    "WeightMatrix",
    "handle_constraints",
    "normalize_weights",
    "solve_weights",
    "apply_skinning",
    "pivot_affine",
]
