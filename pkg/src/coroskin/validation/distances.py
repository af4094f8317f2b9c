"""Vertex-sampled surface distances."""

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InputError


def sample_points(mesh):
    """Vertices a mesh is sampled at: those on its surface triangles.

    Plain ``(n, 3)`` arrays are used as given.
    """
    if hasattr(mesh, "triangles"):
        ids = mesh.boundary_vertex_ids if len(mesh.triangles) else np.arange(mesh.n_vertices)
        pts = mesh.vertices[ids]
    else:
        pts = np.asarray(mesh, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise InputError("mesh has no vertices")
    return pts


def directed_distances(a, b):
    """Distance from every sample of ``a`` to its nearest sample of ``b``."""
    pa, pb = sample_points(a), sample_points(b)
    d, _ = cKDTree(pb).query(pa, k=1)
    return d


def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between two vertex samplings."""
    return float(max(directed_distances(a, b).max(), directed_distances(b, a).max()))


def mean_surface_distance(a, b):
    """Mean over ``a``'s samples of the distance to the nearest sample of ``b``.

    One-sided: ``mean_surface_distance(a, b)`` and ``(b, a)`` generally differ.
    """
    return float(directed_distances(a, b).mean())
