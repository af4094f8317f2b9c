"""Kinematic guidewire: node-sphere contacts and follow-the-leader motion."""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .bvh import closest_points_on_triangles

log = logging.getLogger(__name__)

RESOLVE_MARGIN_MM = 1e-4  # nodes are pushed this far inside the wall
RESOLVE_ROUNDS = 25
PENETRATION_TOL_MM = 1e-3


@dataclass
class Guidewire:
    """Chain of nodes, tip first, with constant spacing."""

    nodes: np.ndarray
    segment_length_mm: float
    tip_radius_mm: float = 0.3

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        if len(self.nodes) < 2:
            raise InputError("a guidewire needs at least two nodes")
        if not (self.segment_length_mm > 0 and self.tip_radius_mm > 0):
            raise InputError("segment length and tip radius must be positive")

    @property
    def tip(self):
        return self.nodes[0]

    @property
    def heading(self):
        d = self.nodes[0] - self.nodes[1]
        return d / np.linalg.norm(d)

    def segment_lengths(self):
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    def check(self, tol=1e-9):
        err = np.abs(self.segment_lengths() - self.segment_length_mm).max()
        if err > tol:
            raise AssertionError(f"segment length drift {err:.3g} mm exceeds {tol:g}")
        return True

    @classmethod
    def straight(cls, tip, heading, n_nodes, segment_length_mm, tip_radius_mm=0.3):
        h = np.asarray(heading, dtype=float)
        h = h / np.linalg.norm(h)
        k = np.arange(n_nodes)[:, None]
        return cls(np.asarray(tip, dtype=float) - k * segment_length_mm * h, segment_length_mm, tip_radius_mm)

    def copy(self, nodes=None):
        return Guidewire(self.nodes.copy() if nodes is None else nodes, self.segment_length_mm, self.tip_radius_mm)


@dataclass(frozen=True)
class Contact:
    triangle: int
    node: int
    depth_mm: float  # distance past the wall; negative means clearance
    normal: tuple  # unit inward normal of the triangle


def face_normals(vertices, triangles):
    P = vertices[triangles]
    n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def contacts_for_pairs(points, vertices, triangles, node_ids, tri_ids, radius):
    """Contacts among candidate (node, triangle) pairs within ``radius``."""
    if len(node_ids) == 0:
        return []
    T = triangles[tri_ids]
    p = points[node_ids]
    q = closest_points_on_triangles(p, vertices[T[:, 0]], vertices[T[:, 1]], vertices[T[:, 2]])
    d = np.linalg.norm(p - q, axis=1)
    keep = d <= radius
    n_out = face_normals(vertices, T[keep])
    side = np.einsum("ij,ij->i", p[keep] - q[keep], n_out)
    depth = np.where(side > 0, d[keep], -d[keep])
    return [
        Contact(int(t), int(n), float(dd), tuple(float(x) for x in -nn))
        for t, n, dd, nn in zip(tri_ids[keep], node_ids[keep], depth, n_out)
    ]


def collide_step(wire, mesh, bvh):
    """Every wire node / triangle pair closer than the tip radius.

    ``bvh`` must have been refit against ``mesh``'s current vertices.
    Results are sorted by (node, triangle).
    """
    if bvh.dirty or bvh.vertices is None:
        raise InputError("bounding hierarchy is stale; refit it against the current phase mesh")
    V = mesh.vertices
    if bvh.vertices is not V and not np.array_equal(bvh.vertices, V):
        raise InputError("bounding hierarchy was refit against different vertices than this mesh")
    r = wire.tip_radius_mm
    nodes, tris = [], []
    for i, p in enumerate(wire.nodes):
        cand = bvh.query_sphere(p, r)
        nodes.append(np.full(len(cand), i))
        tris.append(cand)
    node_ids = np.concatenate(nodes).astype(np.int64)
    tri_ids = np.concatenate(tris).astype(np.int64)
    out = contacts_for_pairs(wire.nodes, V, mesh.triangles, node_ids, tri_ids, r)
    return sorted(out, key=lambda c: (c.node, c.triangle))


def follow_the_leader(nodes, L):
    """Pull every node toward its predecessor so that all spacings equal ``L``."""
    out = nodes.copy()
    for i in range(1, len(out)):
        d = out[i] - out[i - 1]
        n = np.linalg.norm(d)
        if n == 0:  # coincident nodes: keep the original chain direction
            d = nodes[i] - nodes[i - 1] if i < 2 else out[i - 1] - out[i - 2]
            n = np.linalg.norm(d) or 1.0
        out[i] = out[i - 1] + (L / n) * d
    return out


def _push(nodes, contacts):
    """Move each penetrating node along the inward normal of its deepest contact."""
    deepest = {}
    for c in contacts:
        if c.depth_mm > 0 and c.depth_mm > deepest.get(c.node, (0.0, None))[0]:
            deepest[c.node] = (c.depth_mm, c.normal)
    out = nodes.copy()
    for i, (depth, normal) in deepest.items():
        out[i] = out[i] + (depth + RESOLVE_MARGIN_MM) * np.asarray(normal)
    return out, bool(deepest)


def winding_numbers(points, vertices, triangles):
    """Generalized winding number of a closed triangle mesh at each point."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    out = np.zeros(len(P))
    T = vertices[triangles]
    for i, p in enumerate(P):
        a, b, c = T[:, 0] - p, T[:, 1] - p, T[:, 2] - p
        la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la + np.einsum("ij,ij->i", c, a) * lb
        out[i] = np.arctan2(num, den).sum() / (2 * np.pi)
    return out


def signed_distance(points, mesh):
    """Distance to the surface, positive outside, with the closest surface points."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    V, T = mesh.vertices, mesh.triangles
    dist, closest = np.empty(len(P)), np.empty_like(P)
    for i, p in enumerate(P):
        q = closest_points_on_triangles(np.broadcast_to(p, (len(T), 3)), V[T[:, 0]], V[T[:, 1]], V[T[:, 2]])
        d = np.linalg.norm(q - p, axis=1)
        k = int(np.argmin(d))
        dist[i], closest[i] = d[k], q[k]
    inside = winding_numbers(P, V, T) > 0.5
    return np.where(inside, -dist, dist), closest


def _pull_inside(nodes, mesh, tol):
    """Move nodes that are outside by more than ``tol`` just inside the wall."""
    sd, q = signed_distance(nodes, mesh)
    out = np.flatnonzero(sd > tol)
    if out.size == 0:
        return nodes, False
    nodes = nodes.copy()
    for i in out:
        inward = (q[i] - nodes[i]) / np.linalg.norm(q[i] - nodes[i])
        nodes[i] = q[i] + RESOLVE_MARGIN_MM * inward
    return nodes, True


def advance_guidewire(wire, advancement_mm, contacts=(), mesh=None, bvh=None):
    """Advance the tip along its heading and resolve wall penetration.

    The tip moves ``advancement_mm``; the other nodes follow the leader.
    Penetrating nodes of ``contacts`` are pushed back along the contact
    normals. With ``mesh`` (a closed surface) the push / re-chain cycle then
    repeats on every node found outside the surface until none is outside by
    more than 1e-3 mm. Segment lengths are restored after every push.
    """
    if advancement_mm < 0:
        raise InputError(f"advancement must be >= 0, got {advancement_mm}")
    L = wire.segment_length_mm
    nodes = wire.nodes
    if advancement_mm > 0:
        nodes = nodes.copy()
        nodes[0] = nodes[0] + advancement_mm * wire.heading
        nodes = follow_the_leader(nodes, L)
    if contacts:
        pushed, moved = _push(nodes, contacts)
        if moved:
            nodes = follow_the_leader(pushed, L)
    if mesh is not None:
        for _ in range(RESOLVE_ROUNDS):
            pulled, moved = _pull_inside(nodes, mesh, 0.5 * PENETRATION_TOL_MM)
            if not moved:
                break
            nodes = follow_the_leader(pulled, L)
        else:
            log.warning("wire penetration not fully resolved after %d rounds", RESOLVE_ROUNDS)
    return wire.copy(nodes) if nodes is not wire.nodes else wire
