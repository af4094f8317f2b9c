"""Mechanical constraint checks on a generated sequence."""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InputError


@dataclass
class Skeleton:
    """Rest chords of the handles and the joints between adjacent handles."""

    chord_start: np.ndarray  # (nb, 3)
    chord_end: np.ndarray  # (nb, 3)
    joints: np.ndarray  # (nj, 2) proximal, distal handle

    def __post_init__(self):
        self.chord_start = np.asarray(self.chord_start, dtype=float).reshape(-1, 3)
        self.chord_end = np.asarray(self.chord_end, dtype=float).reshape(-1, 3)
        self.joints = np.asarray(self.joints, dtype=np.int64).reshape(-1, 2)


def build_skeleton(tetmesh, handles, tree=None):
    """Chords from the first to the last centerline node of every handle.

    Consecutive handles of a branch form joints; with a ``tree`` the last
    handle of a parent branch is also joined to the first handle of each child.
    """
    cl = np.asarray(tetmesh.centerline_node_ids)
    arc = tetmesh.centerline_arc
    arc_of = dict(zip(cl.tolist(), (arc if arc is not None else np.arange(len(cl))).tolist()))
    nb = len(handles)
    start, end = np.zeros((nb, 3)), np.zeros((nb, 3))
    lo = np.zeros(nb)
    for b, ids in enumerate(handles.handles):
        s = np.array([arc_of.get(int(i), 0.0) for i in ids])
        order = ids[np.argsort(s, kind="stable")]
        start[b], end[b] = tetmesh.nodes[order[0]], tetmesh.nodes[order[-1]]
        lo[b] = s.min()
    joints = []
    first, last = {}, {}
    for br in np.unique(handles.branch_ids):
        hs = np.flatnonzero(handles.branch_ids == br)
        hs = hs[np.argsort(lo[hs], kind="stable")]
        joints += [(int(a), int(b)) for a, b in zip(hs[:-1], hs[1:])]
        first[int(br)], last[int(br)] = int(hs[0]), int(hs[-1])
    if tree is not None:
        for br in tree.branches:
            if br.parent_branch is not None and br.branch_id in first and br.parent_branch in last:
                joints.append((last[br.parent_branch], first[br.branch_id]))
    return Skeleton(start, end, np.array(joints, dtype=np.int64).reshape(-1, 2))


@dataclass
class Violation:
    kind: str  # bend_angle, curvature_radius, strain, displacement, periodicity
    frame: int
    location: str
    value: float
    limit: float

    def __str__(self):
        return f"{self.kind} at frame {self.frame}, {self.location}: {self.value:.6g} (limit {self.limit:.6g})"


@dataclass
class ConstraintReport:
    max_bend_deg: np.ndarray
    min_radius_mm: np.ndarray
    max_strain: np.ndarray
    max_stress_mpa: np.ndarray
    max_displacement_mm: np.ndarray
    periodicity_gap_mm: float
    delta_mm: float
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        """JSON-safe dict; infinite radii (straight joints) become None."""
        d = {k: _finite_or_none(v) for k, v in self.__dict__.items() if k != "violations"}
        d["violations"] = [asdict(v) for v in self.violations]
        return d


def _finite_or_none(v):
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, list):
        return [_finite_or_none(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    return v


def _joint_geometry(skel, R, t, pivots):
    """Turning angle (rad), discrete curvature radius and chord data per joint."""
    def move(p):
        return np.einsum("bij,bj->bi", R, p - pivots) + pivots + t

    s, e = move(skel.chord_start), move(skel.chord_end)
    d = e - s
    n = np.linalg.norm(d, axis=1)
    unit = np.divide(d, n[:, None], out=np.zeros_like(d), where=n[:, None] > 0)
    a, b = skel.joints[:, 0], skel.joints[:, 1]
    cosang = np.clip(np.einsum("ij,ij->i", unit[a], unit[b]), -1.0, 1.0)
    theta = np.arccos(cosang)
    theta[(n[a] == 0) | (n[b] == 0)] = 0.0
    mid = 0.5 * (s + e)
    span = np.linalg.norm(mid[b] - mid[a], axis=1)
    with np.errstate(divide="ignore"):
        radius = np.where(theta > 1e-12, span / np.maximum(theta, 1e-300), np.inf)
    return theta, radius


def check_constraints(seq, mc, skeleton=None):
    """Report every mechanical-limit and coherence violation in ``seq``."""
    mc.validate()
    P = np.asarray(seq.frames)
    if len(P) == 0:
        raise InputError("sequence has no frames")
    nf = len(P)
    skel = skeleton if skeleton is not None else getattr(seq, "skeleton", None)
    delta = mc.delta_for(P[0])
    viol = []
    bend, rmin = np.zeros(nf), np.full(nf, np.inf)
    strain, disp = np.zeros(nf), np.zeros(nf)
    nxt = np.concatenate([P[1:], seq.closing_frame[None]], axis=0)
    rest_piv = seq.pivots[0] if seq.pivots is not None else None

    for f in range(nf):
        if skel is not None and len(skel.joints):
            th, rad = _joint_geometry(skel, seq.rotations[f], seq.translations[f], seq.pivots[f])
            j = int(np.argmax(th))
            bend[f] = np.degrees(th[j])
            for k in np.flatnonzero(np.degrees(th) > mc.theta_max_deg):
                viol.append(Violation("bend_angle", f, f"joint {tuple(int(v) for v in skel.joints[k])}", float(np.degrees(th[k])), mc.theta_max_deg))
            rmin[f] = rad.min()
            for k in np.flatnonzero(rad < mc.r_min_mm):
                viol.append(Violation("curvature_radius", f, f"joint {tuple(int(v) for v in skel.joints[k])}", float(rad[k]), mc.r_min_mm))
        # axial strain between adjacent pivots plus radial strain of the sections
        worst, where = 0.0, "none"
        if skel is not None and len(skel.joints) and rest_piv is not None:
            a, b = skel.joints[:, 0], skel.joints[:, 1]
            L0 = np.linalg.norm(rest_piv[b] - rest_piv[a], axis=1)
            cur = seq.pivots[f] + seq.translations[f]
            L = np.linalg.norm(cur[b] - cur[a], axis=1)
            ax = np.abs(np.divide(L, L0, out=np.ones_like(L), where=L0 > 0) - 1.0)
            if ax.size and ax.max() > worst:
                k = int(np.argmax(ax))
                worst, where = float(ax[k]), f"joint {tuple(int(v) for v in skel.joints[k])}"
        if seq.sections is not None and seq.sections.shape[1]:
            rs = np.abs(seq.sections[f][:, 2])
            if rs.max() > worst:
                k = int(np.argmax(rs))
                worst, where = float(rs[k]), f"section {k}"
        strain[f] = worst
        if worst > mc.eps_max:
            viol.append(Violation("strain", f, where, worst, mc.eps_max))
        step = np.linalg.norm(nxt[f] - P[f], axis=1)
        v = int(np.argmax(step))
        disp[f] = step[v]
        if step[v] > delta:
            viol.append(Violation("displacement", f, f"vertex {v}", float(step[v]), delta))

    gap = float(np.abs(seq.closing_frame - P[0]).max(initial=0.0))
    if gap > 1e-9:
        viol.append(Violation("periodicity", nf, "closing frame", gap, 1e-9))
    return ConstraintReport(bend, rmin, strain, mc.youngs_modulus_mpa * strain, disp, gap, delta, viol)
