"""Template-sweep tetrahedralization of lofted tubes.

Every ring-to-ring layer is a fan of triangular prisms (axis node plus two
adjacent wall vertices on each ring); each prism is split into three tets.
Quad faces are cut through their lowest node id, which makes neighbouring
prisms conform and matches the surface triangulation.
"""

import numpy as np

from ..errors import MeshError
from .mesh import MIN_TET_VOLUME, TetMesh, signed_volumes

_REF = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1]], dtype=float)
_ROT = [(0, 1, 2, 3, 4, 5), (1, 2, 0, 4, 5, 3), (2, 0, 1, 5, 3, 4)]
_SWAP = (3, 4, 5, 0, 1, 2)


def _ref_volume(local):
    p = _REF[list(local)]
    return np.dot(p[1] - p[0], np.cross(p[2] - p[0], p[3] - p[0]))


def split_prism(ids):
    """Three positively oriented tets (local indices) for a prism with global ``ids``.

    ``ids`` lists bottom (0, 1, 2) then top (3, 4, 5), with 3 above 0 etc.
    """
    m = int(np.argmin(ids))
    perm = list(range(6))
    if m >= 3:
        perm = [perm[i] for i in _SWAP]
    pos = perm.index(m)
    perm = [perm[i] for i in _ROT[pos]]
    A, B, C, D, E, F = perm
    g = lambda k: ids[k]  # noqa: E731
    if min(g(B), g(F)) < min(g(C), g(E)):
        tets = [(A, B, C, F), (A, B, F, E), (A, E, F, D)]
    else:
        tets = [(A, B, C, E), (A, E, C, F), (A, E, F, D)]
    out = []
    for t in tets:
        if _ref_volume(t) < 0:
            t = (t[0], t[2], t[1], t[3])
        out.append(t)
    return out


def tetrahedralize(surface, tree=None):
    """Fill a lofted tube surface with tetrahedra.

    Nodes are the surface vertices (same order), then one centerline node per
    ring that has no cap vertex, then one free interior node per branch
    junction (the apex of its collar fan). Raises
    :class:`MeshError` naming the layer if any element is inverted or at or
    below the minimum volume.
    """
    if not surface.paths:
        raise MeshError("surface carries no ring layout; tetrahedralize needs a lofted surface")
    nodes = [surface.vertices]
    n_nodes = surface.n_vertices
    cl_ids, cl_branch, cl_arc = [], [], []
    axis_nodes = {}
    for p in surface.paths:
        K = len(p.rings)
        cn = np.empty(K, dtype=np.int64)
        for k in range(K):
            if k == 0 and p.start_cap is not None:
                cn[k] = p.start_cap
            elif k == K - 1 and p.end_cap is not None:
                cn[k] = p.end_cap
            else:
                cn[k] = n_nodes
                nodes.append(p.centers[k][None, :])
                n_nodes += 1
        axis_nodes[p.path_id] = cn
        cl_ids.extend(cn.tolist())
        cl_branch.extend(np.asarray(p.ring_branch).tolist())
        cl_arc.extend(np.asarray(p.ring_branch_s).tolist())
    apex_nodes = []
    for jn in surface.junctions:
        apex_nodes.append(n_nodes)
        nodes.append(np.asarray(jn.apex, dtype=float)[None, :])
        n_nodes += 1
    nodes = np.vstack(nodes)

    tets, origin = [], []
    for p in surface.paths:
        cn = axis_nodes[p.path_id]
        R = p.rings
        K, n = R.shape
        for k in range(K - 1):
            for j in range(n):
                j1 = (j + 1) % n
                ids = (cn[k], R[k, j], R[k, j1], cn[k + 1], R[k + 1, j], R[k + 1, j1])
                for t in split_prism(ids):
                    tets.append([ids[i] for i in t])
                    origin.append(f"path {p.path_id} layer {k}")
    for jn, apex in zip(surface.junctions, apex_nodes):
        where = f"junction of path {jn.child_path} into path {jn.parent_path}"
        ring = next(p for p in surface.paths if p.path_id == jn.child_path).rings[0]
        c0 = axis_nodes[jn.child_path][0]
        for tri in surface.triangles[jn.zipper]:
            tets.append([apex, tri[0], tri[1], tri[2]])
            origin.append(where + " (collar)")
        for tri in jn.hole_triangles:
            tets.append([apex, tri[0], tri[2], tri[1]])
            origin.append(where + " (hole)")
        for j in range(len(ring)):
            tets.append([apex, c0, ring[j], ring[(j + 1) % len(ring)]])
            origin.append(where + " (ring disk)")
    tets = np.array(tets, dtype=np.int64)
    vol = signed_volumes(nodes, tets)
    inverted = np.flatnonzero(vol < -MIN_TET_VOLUME)
    if inverted.size:
        i = int(inverted[0])
        raise MeshError(f"inverted tetrahedron #{i} in {origin[i]} (volume {vol[i]:.3g} mm^3)")
    flat = np.flatnonzero(vol <= MIN_TET_VOLUME)
    if flat.size:
        i = int(flat[0])
        raise MeshError(
            f"degenerate tetrahedron #{i} in {origin[i]}: volume {vol[i]:.3g} mm^3 is at or below {MIN_TET_VOLUME:g}"
        )
    cl_ids = np.asarray(cl_ids, dtype=np.int64)
    wall = np.setdiff1d(np.arange(surface.n_vertices), cl_ids)
    return TetMesh(nodes, tets, wall, cl_ids, np.asarray(cl_branch), np.asarray(cl_arc))
