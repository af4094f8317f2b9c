"""Surface and tetrahedral mesh containers plus validity checks."""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshError

MIN_TRIANGLE_AREA = 1e-12
MIN_TET_VOLUME = 1e-7


@dataclass
class PathLayout:
    """Ring structure of one lofted tube."""

    path_id: int
    branch_ids: list
    rings: np.ndarray  # (K, n) vertex ids
    centers: np.ndarray  # (K, 3) ring centres on the centerline
    ring_s: np.ndarray  # (K,) arc position along the path
    ring_branch: np.ndarray  # (K,) branch id of each ring
    ring_branch_s: np.ndarray  # (K,) arc position within that branch
    start_cap: int = None  # vertex id of the start cap centre
    end_cap: int = None
    parent_path: int = None
    ring_ab: np.ndarray = None  # (K, 2) rest semi-axes of each ring


@dataclass
class Junction:
    """Stitch between a side path's first ring and a hole in its parent."""

    child_path: int
    parent_path: int
    hole_triangles: np.ndarray  # removed parent triangles, original orientation
    zipper: np.ndarray  # indices into SurfaceMesh.triangles
    apex: np.ndarray = None  # interior point every collar face is visible from


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    paths: list = field(default_factory=list)
    junctions: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def with_vertices(self, vertices):
        return SurfaceMesh(np.asarray(vertices, dtype=float), self.triangles, self.paths, self.junctions)

    def ring_tags(self):
        """Per-vertex (path, ring, segment); caps get ring -1 and segment -1."""
        tags = np.full((self.n_vertices, 3), -1, dtype=int)
        for p in self.paths:
            K, n = p.rings.shape
            tags[p.rings.ravel(), 0] = p.path_id
            tags[p.rings.ravel(), 1] = np.repeat(np.arange(K), n)
            tags[p.rings.ravel(), 2] = np.tile(np.arange(n), K)
            for cap in (p.start_cap, p.end_cap):
                if cap is not None:
                    tags[cap, 0] = p.path_id
        return tags

    def edges(self):
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def adjacency_edges(self):
        """Surface edges plus those of removed junction-hole triangles.

        Vertices inside a junction hole are no longer on the boundary but still
        move with the mesh; the hole edges keep them connected.
        """
        tris = [self.triangles] + [np.asarray(j.hole_triangles).reshape(-1, 3) for j in self.junctions]
        t = np.vstack(tris)
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def boundary_vertex_ids(self):
        """Vertices referenced by at least one surface triangle."""
        return np.unique(self.triangles)

    def areas(self):
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def euler_characteristic(self):
        used = np.unique(self.triangles)
        return len(used) - len(self.edges()) + len(self.triangles)

    def enclosed_volume(self):
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def directed_edge_counts(triangles):
    t = np.asarray(triangles)
    return Counter(map(tuple, np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]).tolist()))


def check_surface(mesh, closed=True):
    """Raise :class:`MeshError` unless ``mesh`` is a consistently oriented manifold."""
    tri = mesh.triangles
    if len(tri) == 0:
        raise MeshError("surface has no triangles")
    if np.any(tri < 0) or np.any(tri >= mesh.n_vertices):
        raise MeshError("triangle references a vertex out of range")
    if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
        raise MeshError("triangle with repeated vertex")
    small = np.flatnonzero(mesh.areas() <= MIN_TRIANGLE_AREA)
    if small.size:
        raise MeshError(f"{small.size} degenerate triangle(s), first is #{small[0]}")
    directed = directed_edge_counts(tri)
    dup = [e for e, c in directed.items() if c > 1]
    if dup:
        raise MeshError(f"inconsistent orientation or non-manifold edge at {dup[0]}")
    if closed:
        open_edges = [e for e in directed if (e[1], e[0]) not in directed]
        if open_edges:
            raise MeshError(f"surface is not closed; {len(open_edges)} boundary edge(s), e.g. {open_edges[0]}")
    _check_vertex_manifold(tri)
    return True


def _check_vertex_manifold(tri):
    # the triangles around every vertex must form a single fan
    by_vertex = {}
    for t in tri.tolist():
        for k in range(3):
            by_vertex.setdefault(t[k], []).append((t[(k + 1) % 3], t[(k + 2) % 3]))
    for v, fan in by_vertex.items():
        nxt = {a: b for a, b in fan}
        start = fan[0][0]
        cur, steps = start, 0
        while True:
            cur = nxt.get(cur)
            steps += 1
            if cur is None or cur == start or steps > len(fan):
                break
        if cur == start and steps != len(fan):
            raise MeshError(f"vertex {v} is non-manifold (several triangle fans)")


@dataclass
class TetMesh:
    nodes: np.ndarray
    tets: np.ndarray
    wall_node_ids: np.ndarray
    centerline_node_ids: np.ndarray
    # per centerline node: owning branch and arc position within it
    centerline_branch: np.ndarray = None
    centerline_arc: np.ndarray = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)
        self.wall_node_ids = np.asarray(self.wall_node_ids, dtype=np.int64)
        self.centerline_node_ids = np.asarray(self.centerline_node_ids, dtype=np.int64)
        if self.centerline_branch is not None:
            self.centerline_branch = np.asarray(self.centerline_branch, dtype=np.int64)
        if self.centerline_arc is not None:
            self.centerline_arc = np.asarray(self.centerline_arc, dtype=float)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def interior_node_ids(self):
        """Nodes that are neither wall nor centerline (junction collar apices)."""
        return np.setdiff1d(np.arange(self.n_nodes), np.union1d(self.wall_node_ids, self.centerline_node_ids))

    def volumes(self):
        return signed_volumes(self.nodes, self.tets)

    def boundary_faces(self):
        """Faces used by exactly one tet, oriented outward."""
        t = self.tets
        faces = np.vstack([t[:, [1, 2, 3]], t[:, [0, 3, 2]], t[:, [0, 1, 3]], t[:, [0, 2, 1]]])
        key = np.sort(faces, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return faces[counts[inv.ravel()] == 1]

    def edges(self):
        t = self.tets
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        e = np.vstack([t[:, list(p)] for p in pairs])
        return np.unique(np.sort(e, axis=1), axis=0)


def signed_volumes(nodes, tets):
    p = np.asarray(nodes)[np.asarray(tets)]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    c = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def check_tetmesh(tm):
    vol = tm.volumes()
    bad = np.flatnonzero(vol <= MIN_TET_VOLUME)
    if bad.size:
        raise MeshError(f"{bad.size} tetrahedra at or below the volume threshold; first #{bad[0]} ({vol[bad[0]]:.3g})")
    both = np.intersect1d(tm.wall_node_ids, tm.centerline_node_ids)
    if both.size:
        raise MeshError(f"node {both[0]} is tagged both wall and centerline")
    tagged = np.union1d(tm.wall_node_ids, tm.centerline_node_ids)
    if tagged.size + tm.interior_node_ids.size != tm.n_nodes:
        raise MeshError("wall, centerline and interior node sets do not partition the nodes")
    used = np.unique(tm.tets)
    if used.size != tm.n_nodes:
        raise MeshError(f"{tm.n_nodes - used.size} node(s) are not referenced by any tetrahedron")
    return True
