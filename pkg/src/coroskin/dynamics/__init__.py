"""Cardiac-cycle motion synthesis."""

from .params import EPS_R_CAP, EnergyWeights, MechanicalConstraints
from .poses import KeyPose, SectionState, check_pose_set, deform_cross_section, interpolate_pose, slerp_rotations
from .regularize import HeatSmoother, dirichlet_energy, graph_laplacian, mesh_edges
from .constraints import ConstraintReport, Skeleton, Violation, build_skeleton, check_constraints
from .sequence import (
    MotionSequence,
    generate_sequence,
    laplacian_offsets,
    posed_vertices,
    regularize_velocity,
    section_rings,
    sequence_energy,
)

__all__ = [
    "EPS_R_CAP",
    "EnergyWeights",
    "MechanicalConstraints",
    "KeyPose",
    "SectionState",
    "check_pose_set",
    "deform_cross_section",
    "interpolate_pose",
    "slerp_rotations",
    "HeatSmoother",
    "dirichlet_energy",
    "graph_laplacian",
    "mesh_edges",
    "ConstraintReport",
    "Skeleton",
    "Violation",
    "build_skeleton",
    "check_constraints",
    "MotionSequence",
    "generate_sequence",
    "laplacian_offsets",
    "posed_vertices",
    "regularize_velocity",
    "section_rings",
    "sequence_energy",
]
