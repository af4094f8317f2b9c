"""Kinematic contrast-particle transport along a centerline tree."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError

OFFSET_MAX = 0.8  # particles stay within this fraction of the local radius


@dataclass
class ContrastParticles:
    """Particles addressed by (branch, arc coordinate) plus a radial offset.

    ``offset`` is a 2-vector in units of the local radius, expressed in a
    cross-section frame of the branch.
    """

    branch: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    offset: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    injection_rate: int = 0
    seed: int = 0
    injected: int = 0
    outflow: int = 0

    def __post_init__(self):
        self.branch = np.asarray(self.branch, dtype=np.int64)
        self.s = np.asarray(self.s, dtype=float)
        self.offset = np.asarray(self.offset, dtype=float).reshape(-1, 2)
        self.rng = np.random.default_rng(self.seed)

    def __len__(self):
        return len(self.s)

    def _keep(self, mask):
        self.branch, self.s, self.offset = self.branch[mask], self.s[mask], self.offset[mask]


def _branch_geometry(tree, b):
    return tree.branch_polyline(b), tree.branch_arc(b), tree.branch_radii(b)


def _section_frame(tangent):
    ref = np.array([0.0, 0.0, 1.0]) if abs(tangent[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    n1 = np.cross(tangent, ref)
    n1 /= np.linalg.norm(n1)
    return n1, np.cross(tangent, n1)


def branch_point(tree, b, s):
    """Centre, unit tangent and radius at arc coordinate(s) ``s`` of branch ``b``."""
    P, arc, r = _branch_geometry(tree, b)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    k = np.clip(np.searchsorted(arc, s, side="right") - 1, 0, len(arc) - 2)
    seg = arc[k + 1] - arc[k]
    u = np.divide(s - arc[k], seg, out=np.zeros_like(s), where=seg > 0)[:, None]
    c = P[k] + u * (P[k + 1] - P[k])
    t = P[k + 1] - P[k]
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    rad = r[k] + u[:, 0] * (r[k + 1] - r[k])
    return c, t, rad


def particle_positions(p, tree):
    out = np.zeros((len(p), 3))
    for b in np.unique(p.branch):
        m = p.branch == b
        c, t, rad = branch_point(tree, int(b), p.s[m])
        for i, idx in enumerate(np.flatnonzero(m)):
            n1, n2 = _section_frame(t[i])
            out[idx] = c[i] + rad[i] * (p.offset[idx, 0] * n1 + p.offset[idx, 1] * n2)
    return out


def inject(p, tree, count=None):
    """Add ``count`` (default: the injection rate) particles at the root inlet."""
    count = p.injection_rate if count is None else int(count)
    if count <= 0:
        return p
    root = tree.roots()[0]
    rho = OFFSET_MAX * np.sqrt(p.rng.random(count))
    phi = 2 * np.pi * p.rng.random(count)
    p.branch = np.concatenate([p.branch, np.full(count, root, dtype=np.int64)])
    p.s = np.concatenate([p.s, np.zeros(count)])
    p.offset = np.vstack([p.offset, np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])])
    p.injected += count
    return p


def _child_start_radius(tree, b):
    return float(tree.radii[tree.branch(b).point_ids[0]])


def advect_contrast(p, tree, dt, speed_mm_s):
    """Move every particle ``speed * dt`` along its branch.

    At a bifurcation the child is drawn with probability proportional to its
    radius cubed; particles leaving a terminal branch are counted as outflow.
    """
    if not dt > 0:
        raise InputError(f"time step must be positive, got {dt}")
    if speed_mm_s < 0:
        raise InputError(f"speed must be nonnegative, got {speed_mm_s}")
    if len(p) == 0 or speed_mm_s == 0:
        return p
    p.s = p.s + speed_mm_s * dt
    lengths = {b.branch_id: tree.branch_length(b.branch_id) for b in tree.branches}
    alive = np.ones(len(p), dtype=bool)
    # resolve branch exits in particle order so random draws are reproducible
    while True:
        L = np.array([lengths[int(b)] for b in p.branch])
        over = np.flatnonzero(alive & (p.s > L))
        if over.size == 0:
            break
        for i in over:
            b = int(p.branch[i])
            kids = tree.children(b)
            if not kids:
                alive[i] = False
                continue
            w = np.array([_child_start_radius(tree, k) ** 3 for k in kids])
            child = kids[int(p.rng.choice(len(kids), p=w / w.sum()))] if len(kids) > 1 else kids[0]
            p.s[i] -= L[i]
            p.branch[i] = child
    p.outflow += int((~alive).sum())
    p._keep(alive)
    return p
