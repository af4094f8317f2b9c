"""Motion sequence synthesis from key poses."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConstraintViolation, InputError
from ..skinning.blend import apply_skinning
from .constraints import check_constraints
from .params import EnergyWeights, MechanicalConstraints
from .poses import check_pose_set, interpolate_pose
from .regularize import (
    SMOOTH_MAX_ITER,
    SMOOTH_TOL,
    HeatSmoother,
    finite_difference_velocity,
    graph_laplacian,
    reintegrate,
)

log = logging.getLogger(__name__)

MAX_REFINE = 6


@dataclass
class MotionSequence:
    """Per-frame vertex positions over one normalized cardiac period.

    ``closing_frame`` is P(T), evaluated independently by interpolating from
    the last key pose back to the first; periodicity means it equals frame 0.
    """

    frames: np.ndarray  # (nf, n, 3)
    t: np.ndarray  # (nf,) in [0, 1)
    closing_frame: np.ndarray  # (n, 3)
    edges: np.ndarray  # (ne, 2) vertex adjacency
    key_poses: list = field(default_factory=list)
    key_frame_indices: np.ndarray = None
    rr_percent: np.ndarray = None
    rotations: np.ndarray = None  # (nf, nb, 3, 3)
    translations: np.ndarray = None  # (nf, nb, 3)
    pivots: np.ndarray = None  # (nf, nb, 3)
    sections: np.ndarray = None  # (nf, ns, 3)
    velocities: np.ndarray = None  # (nf, n, 3)
    period_T: float = 1.0
    skeleton: object = None
    report: object = None
    energies: dict = None
    smoothing_history: list = None
    surface: object = None  # rest surface the frames deform

    def phase_frame(self, phase, n_phases):
        """Index of the frame at t = phase / n_phases (None if not sampled)."""
        hit = np.flatnonzero(np.isclose(self.t, phase / n_phases, rtol=0, atol=1e-12))
        return int(hit[0]) if hit.size else None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        if len(self.t) != len(self.frames):
            raise InputError("one time value per frame is required")
        if np.any(np.diff(self.t) <= 0):
            raise InputError("frames must be ordered by strictly increasing t")

    @property
    def n_frames(self):
        return len(self.frames)

    @property
    def dt(self):
        return np.diff(np.append(self.t, self.period_T))

    def periodicity_gap(self):
        return float(np.abs(self.closing_frame - self.frames[0]).max(initial=0.0))


def section_rings(surface):
    """(ring vertex ids, centre, rest semi-axes) of every ring, in path order."""
    out = []
    for lay in surface.paths:
        ab = lay.ring_ab if lay.ring_ab is not None else np.full((len(lay.rings), 2), np.nan)
        for k in range(len(lay.rings)):
            out.append((np.asarray(lay.rings[k]), np.asarray(lay.centers[k], dtype=float), ab[k]))
    return out


def posed_vertices(pose, surface, W, rings=None):
    """Rest vertices with ring scaling from ``pose.sections``, then skinned."""
    verts = surface.vertices
    if len(pose.sections):
        rings = section_rings(surface) if rings is None else rings
        if len(rings) != len(pose.sections):
            raise InputError(f"pose has {len(pose.sections)} sections but the surface has {len(rings)} rings")
        verts = verts.copy()
        for (ids, c, ab), (a, _, _) in zip(rings, pose.sections):
            s = a / ab[0]
            if s != 1.0:
                verts[ids] = c + s * (verts[ids] - c)
    R, t = pose.affine()
    return apply_skinning(verts, W, R, t)


def regularize_velocity(seq, weights=None, tol=SMOOTH_TOL, max_iter=SMOOTH_MAX_ITER):
    """Smooth the per-frame velocity field and re-integrate positions.

    Key frames (and the closing frame) are pinned, so key poses are kept
    exactly.
    """
    weights = (weights or EnergyWeights()).validate()
    if seq.n_frames < 1:
        raise InputError("velocity regularization needs at least 2 frames (including the closing frame)")
    n = seq.frames.shape[1]
    L = graph_laplacian(n, seq.edges)
    dt = seq.dt
    v = finite_difference_velocity(seq.frames, seq.closing_frame, dt)
    flat = np.moveaxis(v, 0, 1).reshape(n, -1)
    smoothed, history = HeatSmoother(L, weights.lambda_smooth).run(flat, tol, max_iter)
    v2 = np.moveaxis(smoothed.reshape(n, seq.n_frames, 3), 1, 0)
    anchors = seq.key_frame_indices if seq.key_frame_indices is not None else [0]
    frames = reintegrate(seq.frames, v2, dt, anchors, seq.closing_frame)
    return replace(seq, frames=frames, velocities=finite_difference_velocity(frames, seq.closing_frame, dt), smoothing_history=history)


def laplacian_offsets(P, edges):
    """Neighbourhood-mean difference (1/|N(i)|) sum_j (P_j - P_i) for every vertex."""
    n = len(P)
    e = np.asarray(edges, dtype=np.int64)
    acc = np.zeros_like(P)
    np.add.at(acc, e[:, 0], P[e[:, 1]])
    np.add.at(acc, e[:, 1], P[e[:, 0]])
    deg = np.bincount(e.ravel(), minlength=n).astype(float)
    if np.any(deg == 0):
        raise InputError("every vertex needs at least one neighbour")
    return acc / deg[:, None] - P


def sequence_energy(seq, weights=None, edges=None):
    """(E_temp, E_spatial, E_total) of a sequence or an (nf, n, 3) array.

    E_temp sums squared frame-to-frame displacements; E_spatial sums the
    squared neighbourhood-mean offsets over all vertices and frames.
    """
    weights = (weights or EnergyWeights()).validate()
    if hasattr(seq, "frames"):
        P = seq.frames
        edges = seq.edges if edges is None else edges
    else:
        P = np.asarray(seq, dtype=float)
    if edges is None:
        raise InputError("sequence_energy needs mesh edges for an array input")
    if len(P) < 2:
        raise InputError("sequence energy needs at least 2 frames")
    e_temp = float(np.sum(np.diff(P, axis=0) ** 2))
    e_spatial = float(sum(np.sum(laplacian_offsets(Pt, edges) ** 2) for Pt in P))
    return e_temp, e_spatial, weights.omega1 * e_temp + weights.omega2 * e_spatial


def _synthesize(poses, m, surface, W, rings):
    nk = len(poses)
    frames, ts, rr, rots, trans, piv, secs, keys = [], [], [], [], [], [], [], []
    for k in range(nk):
        p1, p2 = poses[k], poses[(k + 1) % nk]
        keys.append(len(frames))
        for j in range(m[k]):
            u = j / m[k]
            pose = interpolate_pose(p1, p2, u)
            frames.append(posed_vertices(pose, surface, W, rings))
            ts.append((k + u) / nk)
            rr.append(p1.rr_percent + u * ((p2.rr_percent - p1.rr_percent) % 100.0))
            rots.append(pose.rotations)
            trans.append(pose.translations)
            piv.append(pose.pivots)
            secs.append(pose.sections)
    closing = posed_vertices(interpolate_pose(poses[-1], poses[0], 1.0), surface, W, rings)
    return MotionSequence(
        np.array(frames),
        np.array(ts),
        closing,
        surface.adjacency_edges(),
        list(poses),
        np.array(keys),
        np.array(rr),
        np.array(rots),
        np.array(trans),
        np.array(piv),
        np.array(secs),
        surface=surface,
    )


def generate_sequence(key_poses, subdivision, surface, W, mc=None, weights=None, skeleton=None, regularize=True):
    """Frames between consecutive key poses (wrapping last -> first), skinned,
    regularized and checked against the mechanical limits.

    With ``mc.enforce_delta`` segments whose frame-to-frame displacement exceeds
    delta are subdivided further (doubling, at most MAX_REFINE times). With
    ``mc.strict`` any violation raises ConstraintViolation.
    """
    mc = (mc or MechanicalConstraints()).validate()
    weights = (weights or EnergyWeights()).validate()
    if int(subdivision) < 1:
        raise InputError(f"subdivision must be >= 1, got {subdivision}")
    poses = check_pose_set(key_poses, mc.eps_r_cap)
    nb = W.values.shape[1] if hasattr(W, "values") else np.asarray(W).shape[1]
    if poses[0].n_handles != nb:
        raise InputError(f"key poses carry {poses[0].n_handles} handles but the weights have {nb} columns")
    rings = section_rings(surface) if len(poses[0].sections) else None
    delta = mc.delta_for(surface.vertices)
    m = [int(subdivision)] * len(poses)
    for round_ in range(MAX_REFINE + 1):
        seq = _synthesize(poses, m, surface, W, rings)
        if regularize:
            seq = regularize_velocity(seq, weights)
        if not mc.enforce_delta:
            break
        nxt = np.concatenate([seq.frames[1:], seq.closing_frame[None]])
        step = np.linalg.norm(nxt - seq.frames, axis=2).max(axis=1)
        seg = np.searchsorted(seq.key_frame_indices, np.arange(seq.n_frames), side="right") - 1
        bad = np.unique(seg[step > delta])
        if bad.size == 0:
            break
        if round_ == MAX_REFINE:
            log.warning("displacement limit still exceeded after %d refinements", MAX_REFINE)
            break
        for k in bad:
            m[k] *= 2
    seq.skeleton = skeleton
    seq.report = check_constraints(seq, mc, skeleton)
    e = sequence_energy(seq, weights)
    seq.energies = {"E_temp": e[0], "E_spatial": e[1], "E_total": e[2]}
    if seq.report.violations:
        log.info("%d constraint violation(s) in the generated sequence", len(seq.report.violations))
        if mc.strict:
            raise ConstraintViolation(seq.report.violations)
    return seq
