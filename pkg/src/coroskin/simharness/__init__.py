"""Headless guidewire and contrast replay over a deforming mesh."""

from .bvh import BoundingHierarchy, closest_points_on_triangles
from .wire import (
    Contact,
    Guidewire,
    advance_guidewire,
    collide_step,
    face_normals,
    follow_the_leader,
    signed_distance,
    winding_numbers,
)
from .contrast import ContrastParticles, advect_contrast, branch_point, inject, particle_positions
from .scenario import Scenario, Tick, log_to_json, phase_frames, run_scenario, tree_at_frame

__all__ = [
    "BoundingHierarchy",
    "closest_points_on_triangles",
    "Contact",
    "Guidewire",
    "advance_guidewire",
    "collide_step",
    "face_normals",
    "follow_the_leader",
    "signed_distance",
    "winding_numbers",
    "ContrastParticles",
    "advect_contrast",
    "branch_point",
    "inject",
    "particle_positions",
    "Scenario",
    "Tick",
    "log_to_json",
    "phase_frames",
    "run_scenario",
    "tree_at_frame",
]
