"""Structured tube lofting with curvature-adaptive ring spacing.

Each lofting path becomes a ring-by-segment quad grid, split into triangles
along the diagonal through the lowest vertex id of each quad (the same rule
the tetrahedralizer uses, so surface and volume meshes conform). Side paths
are stitched into a hole cut in their parent tube.
"""

import logging

import numpy as np
from scipy.interpolate import PchipInterpolator, make_interp_spline
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from ..errors import InputError
from .mesh import MIN_TET_VOLUME, Junction, PathLayout, SurfaceMesh
from .sizing import MeshSizingParams, local_mesh_size

log = logging.getLogger(__name__)

MIN_SEGMENTS = 8


def _ramanujan_perimeter(a, b):
    h = ((a - b) / (a + b)) ** 2
    return np.pi * (a + b) * (1 + 3 * h / (10 + np.sqrt(4 - 3 * h)))


class _SectionSpline:
    """Longitudinal cubic interpolation through a path's cross-sections."""

    def __init__(self, sections):
        if len(sections) < 2:
            raise InputError(f"path {sections[0].path_id if sections else '?'} needs at least 2 cross-sections")
        self.s = np.array([c.path_s for c in sections])
        if np.any(np.diff(self.s) <= 0):
            raise InputError("cross-sections must be ordered by strictly increasing arc position")
        k = min(3, len(sections) - 1)
        self.origin = make_interp_spline(self.s, np.array([c.frame.origin for c in sections]), k=k)
        self.d1 = self.origin.derivative(1)
        self.d2 = self.origin.derivative(2) if k > 1 else None
        self.normal = make_interp_spline(self.s, np.array([c.frame.normal for c in sections]), k=k)
        ab = np.array([[c.a_mm, c.b_mm] for c in sections])
        self.ab = PchipInterpolator(self.s, ab) if len(sections) > 2 else make_interp_spline(self.s, ab, k=1)
        self.length = float(self.s[-1])
        self.branch = np.array([c.branch_id for c in sections])
        self.branch_s = np.array([c.branch_s for c in sections])

    def kappa(self, s):
        d1 = self.d1(s)
        if self.d2 is None:
            return np.zeros(np.shape(s))
        d2 = self.d2(s)
        return np.linalg.norm(np.cross(d1, d2), axis=-1) / np.linalg.norm(d1, axis=-1) ** 3

    def frames(self, s):
        x = self.origin(s)
        d1 = self.d1(s)
        t = d1 / np.linalg.norm(d1, axis=1, keepdims=True)
        n = self.normal(s)
        n = n - np.sum(n * t, axis=1, keepdims=True) * t
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return x, t, n, np.cross(t, n)

    def branch_tag(self, s):
        idx = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 1)
        nxt = np.minimum(idx + 1, len(self.s) - 1)
        same = self.branch[idx] == self.branch[nxt]
        br = np.where(same, self.branch[idx], self.branch[nxt])
        base = np.where(same, idx, nxt)
        return br, self.branch_s[base] + (s - self.s[base])


def ring_positions(spline, sizing):
    """Arc positions of rings: steps of the local curvature-adapted size, rescaled to end on the path end."""
    s, pos = 0.0, [0.0]
    L = spline.length
    while s < L:
        s += local_mesh_size(float(spline.kappa(np.array([min(s, L)]))[0]), sizing)
        pos.append(s)
    pos = np.asarray(pos)
    if len(pos) < 2:
        pos = np.array([0.0, L])
    return pos * (L / pos[-1])


def segment_count(ab, sizing):
    """Circumferential segments: perimeter over the contour-curvature size, at least 8."""
    a, b = ab[:, 0], ab[:, 1]
    kappa = 1.0 / np.minimum(a, b)
    h = local_mesh_size(kappa, sizing)
    n = np.ceil(_ramanujan_perimeter(a, b) / h).astype(int)
    return max(MIN_SEGMENTS, int(n.max()))


def _ring_points(x, n_, b_, ab, nseg):
    phi = 2.0 * np.pi * np.arange(nseg) / nseg
    return (
        x[:, None, :]
        + ab[:, 0, None, None] * np.cos(phi)[None, :, None] * n_[:, None, :]
        + ab[:, 1, None, None] * np.sin(phi)[None, :, None] * b_[:, None, :]
    )


def quad_triangles(ring_a, ring_b):
    """Triangulate the band between two rings with min-id diagonals, outward facing."""
    n = len(ring_a)
    tris = []
    for j in range(n):
        j1 = (j + 1) % n
        a, b, c, d = ring_a[j], ring_a[j1], ring_b[j], ring_b[j1]
        if min(a, b, c, d) == a:
            tris += [(a, b, d), (a, d, c)]
        else:
            tris += [(a, b, c), (b, d, c)]
    return tris


def _check_contours(sections):
    for c in sections:
        pts = np.asarray(c.contour, dtype=float)
        if _self_intersects_2d(pts):
            raise InputError(
                f"cross-section contour at path {c.path_id}, s={c.path_s:.3f} mm is self-intersecting"
            )


def _self_intersects_2d(pts):
    n = len(pts)
    if n < 4:
        return False
    a = pts
    b = np.roll(pts, -1, axis=0)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _seg_cross(a[i], b[i], a[j], b[j]):
                return True
    return False


def _seg_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _boundary_loops(tris):
    """Directed boundary loops of a triangle set (edges whose twin is absent)."""
    directed = set()
    for t in tris:
        for k in range(3):
            directed.add((t[k], t[(k + 1) % 3]))
    bnd = [e for e in directed if (e[1], e[0]) not in directed]
    nxt = {}
    for a, b in bnd:
        if a in nxt:
            return None  # pinched boundary
        nxt[a] = b
    loops, seen = [], set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop, cur = [], start
        while cur not in seen:
            seen.add(cur)
            loop.append(cur)
            cur = nxt.get(cur)
            if cur is None:
                return None
        loops.append(loop)
    return loops


def _is_disk(tris):
    tris = [tuple(t) for t in tris]
    if not tris:
        return False
    verts = {v for t in tris for v in t}
    edges = {tuple(sorted((t[k], t[(k + 1) % 3]))) for t in tris for k in range(3)}
    loops = _boundary_loops(tris)
    return loops is not None and len(loops) == 1 and len(verts) - len(edges) + len(tris) == 1


class _Builder:
    def __init__(self):
        self.verts = []
        self.n = 0
        self.tris = []
        self.lateral = {}  # path id -> list of triangle indices
        self.removed = set()

    def add_vertices(self, pts):
        pts = np.asarray(pts).reshape(-1, 3)
        ids = np.arange(self.n, self.n + len(pts))
        self.verts.append(pts)
        self.n += len(pts)
        return ids

    def add_tris(self, tris):
        start = len(self.tris)
        self.tris.extend(tuple(int(v) for v in t) for t in tris)
        return list(range(start, len(self.tris)))

    def vertex_array(self):
        return np.vstack(self.verts) if self.verts else np.zeros((0, 3))


def _outside_parent(points, parent_tree, parent_radius, margin=0.02):
    d, idx = parent_tree.query(points)
    return d > parent_radius[idx] * (1.0 + margin)


def loft_surface(sections, sizing=None):
    """Closed triangulated tube surface through per-path cross-section lists.

    ``sections`` is the output of :func:`build_cross_sections`: one list per
    lofting path. Rings follow the longitudinal mesh size, segment counts the
    circumferential one (never fewer than 8). Side paths are joined to their
    parent through a stitched hole; if no star-shaped collar can be found the
    side tube is kept as a separate capped component and a warning is logged.
    """
    sizing = (sizing or MeshSizingParams()).validate()
    sections = [list(p) for p in sections if len(p)]
    if not sections:
        raise InputError("no cross-sections to loft")
    for p in sections:
        _check_contours(p)
    b = _Builder()
    layouts, junctions = {}, []
    dense = {}  # path id -> (kdtree of dense centres, radius per sample)
    for p in sections:
        pid = p[0].path_id
        parent = p[0].parent_path
        sp = _SectionSpline(p)
        s = ring_positions(sp, sizing)
        x, t, n_, b_ = sp.frames(s)
        ab = sp.ab(s)
        nseg = segment_count(ab, sizing)
        pts = _ring_points(x, n_, b_, ab, nseg)
        k0, plan = 0, None
        if parent is not None and parent in dense:
            ptree, prad = dense[parent]
            outside = np.array([_outside_parent(pts[k], ptree, prad).all() for k in range(len(s))])
            first = int(np.argmax(outside)) if outside.any() else len(s)
            for k in range(first, min(first + 4, len(s) - 1)):
                plan = _plan_junction(b, layouts[parent], pts[k], x[k], sp.origin(0.0))
                if plan is not None:
                    k0 = k
                    break
            if plan is None:
                log.warning("path %d cannot be stitched to path %d; kept as a separate capped tube", pid, parent)
        s, x, ab, pts = s[k0:], x[k0:], ab[k0:], pts[k0:]
        rings = b.add_vertices(pts.reshape(-1, 3)).reshape(len(s), nseg)
        lateral = []
        for k in range(len(s) - 1):
            lateral += b.add_tris(quad_triangles(rings[k], rings[k + 1]))
        b.lateral[pid] = lateral
        start_cap = None
        if plan is None:
            start_cap = int(b.add_vertices(x[0])[0])
            b.add_tris([(start_cap, rings[0][(j + 1) % nseg], rings[0][j]) for j in range(nseg)])
        end_cap = int(b.add_vertices(x[-1])[0])
        b.add_tris([(end_cap, rings[-1][j], rings[-1][(j + 1) % nseg]) for j in range(nseg)])
        br, bs = sp.branch_tag(s)
        layouts[pid] = PathLayout(
            pid, sorted(set(int(v) for v in sp.branch)), rings, x, s, br, bs, start_cap, end_cap, parent, ab
        )
        fine = np.linspace(0.0, sp.length, max(2, int(np.ceil(sp.length / 0.05)) + 1))
        dense[pid] = (cKDTree(sp.origin(fine)), np.max(sp.ab(fine), axis=1))
        if plan is not None:
            hole, zipper, apex = plan
            ring = rings[0]
            zipper = [tuple(int(ring[-1 - v]) if v < 0 else int(v) for v in tri) for tri in zipper]
            hole_tris = np.array([b.tris[i] for i in hole], dtype=np.int64)
            b.removed.update(hole)
            junctions.append(Junction(pid, parent, hole_tris, np.array(b.add_tris(zipper)), apex))
    verts = b.vertex_array()
    keep = [i for i in range(len(b.tris)) if i not in b.removed]
    remap = -np.ones(len(b.tris), dtype=int)
    remap[keep] = np.arange(len(keep))
    tris = np.array([b.tris[i] for i in keep], dtype=np.int64)
    for j in junctions:
        j.zipper = remap[j.zipper]
    return SurfaceMesh(verts, tris, [layouts[k] for k in sorted(layouts)], junctions)


def _tri_normals(p):
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    return n, np.linalg.norm(n, axis=1)


def _edge_components(tris, seed):
    """Triangles edge-connected to ``tris[seed]`` (indices into ``tris``)."""
    by_edge = {}
    for i, t in enumerate(tris):
        for k in range(3):
            by_edge.setdefault(frozenset((t[k], t[(k + 1) % 3])), []).append(i)
    comp, stack = {seed}, [seed]
    while stack:
        i = stack.pop()
        t = tris[i]
        for k in range(3):
            for j in by_edge[frozenset((t[k], t[(k + 1) % 3]))]:
                if j not in comp:
                    comp.add(j)
                    stack.append(j)
    return sorted(comp)


def _zip_loops(verts, loop, ring_pts, c0, d):
    """Zipper triangles between a hole loop (vertex ids) and a ring (placeholders -1-j)."""
    u = ring_pts[0] - c0
    u = u - (u @ d) * d
    u /= np.linalg.norm(u)
    w = np.cross(d, u)

    def angles(p):
        r = p - c0
        return np.arctan2(r @ w, r @ u)

    la = angles(verts[loop])
    if np.sum(np.diff(np.unwrap(np.append(la, la[0])))) <= 0:
        return None
    start = int(np.argmin(np.abs(la)))
    loop = loop[start:] + loop[:start]
    la = np.unwrap(angles(verts[loop]))
    la = la - 2 * np.pi * np.round(la[0] / (2 * np.pi))
    la = np.append(la, la[0] + 2 * np.pi)
    n = len(ring_pts)
    lb = 2 * np.pi * np.arange(n + 1) / n
    A = list(loop) + [loop[0]]
    B = [-1 - j for j in range(n)] + [-1]
    i = j = 0
    m = len(loop)
    tris = []
    while i < m or j < n:
        if j == n or (i < m and la[i + 1] <= lb[j + 1]):
            tris.append((A[i], A[i + 1], B[j]))
            i += 1
        else:
            tris.append((A[i], B[j + 1], B[j]))
            j += 1
    return tris


def _collar_apex(faces):
    """Interior point seeing every collar face from inside, or None if the collar is not star-shaped."""
    nrm, area2 = _tri_normals(faces)
    if np.any(area2 <= 0):
        return None
    nrm = nrm / area2[:, None]
    A = np.hstack([nrm, np.ones((len(nrm), 1))])
    rhs = np.einsum("ij,ij->i", nrm, faces[:, 0])
    res = linprog([0, 0, 0, -1], A_ub=A, b_ub=rhs, bounds=[(None, None)] * 3 + [(None, 1.0)], method="highs")
    if res.status != 0:
        return None
    apex = res.x[:3]
    dist = rhs - nrm @ apex
    if np.min(area2 * dist / 6.0) <= 10 * MIN_TET_VOLUME:
        return None
    return apex


def _plan_junction(b, parent, ring_pts, c0, anchor):
    """Pick a hole in the parent under a child ring and a collar apex.

    Returns (hole triangle indices, zipper triangles with ring placeholders,
    apex) or None when no candidate hole yields a star-shaped collar.
    """
    verts = b.vertex_array()
    axis = c0 - anchor
    depth = np.linalg.norm(axis)
    if depth == 0:
        return None
    d = axis / depth
    r_ring = float(np.max(np.linalg.norm(ring_pts - c0, axis=1)))
    cand = np.array([i for i in b.lateral[parent.path_id] if i not in b.removed])
    ctris = np.array([b.tris[i] for i in cand])
    tv = verts[ctris]
    nrm, area2 = _tri_normals(tv)
    facing = (nrm @ d) / np.maximum(area2, 1e-300)
    rel = tv.mean(axis=1) - anchor
    along = rel @ d
    radial = np.linalg.norm(rel - along[:, None] * d, axis=1)
    n = len(ring_pts)
    disk = np.stack([np.repeat(c0[None], n, 0), ring_pts, np.roll(ring_pts, -1, axis=0)], axis=1)
    for factor in (1.0, 0.85, 0.7, 0.55, 0.4):
        for min_facing in (0.0, 0.3, -1.0):
            hit = np.flatnonzero((along > 0) & (along < depth) & (radial <= factor * r_ring) & (facing > min_facing))
            if hit.size == 0:
                continue
            sub = [tuple(ctris[i]) for i in hit]
            comp = _edge_components(sub, int(np.argmin(radial[hit])))
            hole_local = hit[comp]
            hole_tris = [tuple(ctris[i]) for i in hole_local]
            if not _is_disk(hole_tris):
                continue
            loop = _boundary_loops(hole_tris)[0]
            zipper = _zip_loops(verts, loop, ring_pts, c0, d)
            if zipper is None:
                continue
            pos = lambda v: ring_pts[-1 - v] if v < 0 else verts[v]  # noqa: E731
            zf = np.array([[pos(v) for v in t] for t in zipper])
            hf = verts[np.array(hole_tris)][:, [0, 2, 1]]
            apex = _collar_apex(np.concatenate([zf, hf, disk]))
            if apex is not None:
                return cand[hole_local].tolist(), zipper, apex
    return None
