from .sizing import MeshSizingParams, local_mesh_size
from .frames import CrossSection, Frame, build_cross_sections, frame_rotation_deg, lofting_paths
from .mesh import PathLayout, SurfaceMesh, TetMesh, check_surface, check_tetmesh, signed_volumes
from .loft import loft_surface
from .tetra import tetrahedralize

__all__ = [
    "MeshSizingParams",
    "local_mesh_size",
    "CrossSection",
    "Frame",
    "build_cross_sections",
    "frame_rotation_deg",
    "lofting_paths",
    "PathLayout",
    "SurfaceMesh",
    "TetMesh",
    "check_surface",
    "check_tetmesh",
    "signed_volumes",
    "loft_surface",
    "tetrahedralize",
]
