"""Centerline frames and cross-section construction.

Frenet-Serret frames are used wherever the curvature is large enough to
define a normal; elsewhere frames are carried forward (or backward from the
first Frenet frame) by double-reflection rotation minimisation.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import make_interp_spline

from ..errors import InputError

KAPPA_EPS = 1e-6  # 1/mm; below this the Frenet normal is undefined
FRENET_SNAP_DEG = 15.0  # Frenet normal is taken only this close to the transported one


@dataclass
class Frame:
    origin: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray

    @property
    def matrix(self):
        """Columns are tangent, normal, binormal."""
        return np.column_stack([self.tangent, self.normal, self.binormal])


@dataclass
class CrossSection:
    frame: Frame
    a_mm: float
    b_mm: float
    branch_id: int = 0
    branch_s: float = 0.0
    path_id: int = 0
    path_s: float = 0.0
    parent_path: int = None
    kappa: float = 0.0
    area0_mm2: float = None
    contour: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.a_mm > 0 and self.b_mm > 0):
            raise InputError(f"cross-section semi-axes must be positive, got a={self.a_mm}, b={self.b_mm}")
        if self.area0_mm2 is None:
            self.area0_mm2 = float(np.pi * self.a_mm * self.b_mm)
        if self.contour is None:
            self.contour = ellipse_contour(self.a_mm, self.b_mm, 32)

    def sample(self, n):
        """``n`` contour points in 3-D, counter-clockwise about the tangent."""
        local = ellipse_contour(self.a_mm, self.b_mm, n)
        f = self.frame
        return f.origin + local[:, :1] * f.normal + local[:, 1:] * f.binormal


def ellipse_contour(a, b, n):
    phi = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([a * np.cos(phi), b * np.sin(phi)])


def perpendicular(t):
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(t)))] = 1.0
    n = axis - np.dot(axis, t) * t
    return n / np.linalg.norm(n)


def _orthonormalize(t, n):
    n = n - np.dot(n, t) * t
    return n / np.linalg.norm(n)


def rmf_step(x0, x1, t0, t1, r0):
    """Double-reflection transport of normal ``r0`` from (x0, t0) to (x1, t1)."""
    v1 = x1 - x0
    c1 = np.dot(v1, v1)
    if c1 == 0:
        return _orthonormalize(t1, r0)
    rl = r0 - (2.0 / c1) * np.dot(v1, r0) * v1
    tl = t0 - (2.0 / c1) * np.dot(v1, t0) * v1
    v2 = t1 - tl
    c2 = np.dot(v2, v2)
    r1 = rl if c2 < 1e-30 else rl - (2.0 / c2) * np.dot(v2, rl) * v2
    return _orthonormalize(t1, r1)


_SNAP_COS = np.cos(np.radians(FRENET_SNAP_DEG))


def curve_frames(points, tangents, d2):
    """Frames at samples of a curve given first-derivative directions and second derivatives.

    Returns (tangents, normals, binormals, kappa, is_frenet). Near
    inflections the Frenet normal spins quickly; there the transported normal
    is kept until the Frenet one comes back within ``FRENET_SNAP_DEG``.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    T = tangents / np.linalg.norm(tangents, axis=1, keepdims=True)
    speed = np.linalg.norm(tangents, axis=1)
    kappa = np.linalg.norm(np.cross(tangents, d2), axis=1) / speed**3
    frenet = kappa >= KAPPA_EPS
    N = np.zeros((n, 3))
    for i in np.flatnonzero(frenet):
        N[i] = _orthonormalize(T[i], d2[i])
    first = int(np.argmax(frenet)) if frenet.any() else None
    out = np.zeros((n, 3))
    if first is None:
        out[0] = perpendicular(T[0])
        first = 0
    else:
        out[first] = N[first]
    for i in range(first + 1, n):
        carried = rmf_step(points[i - 1], points[i], T[i - 1], T[i], out[i - 1])
        cand = N[i] if np.dot(N[i], carried) >= 0 else -N[i]
        if frenet[i] and np.dot(cand, carried) >= _SNAP_COS:
            out[i] = cand
        else:
            out[i] = carried
    for i in range(first - 1, -1, -1):
        out[i] = rmf_step(points[i + 1], points[i], T[i + 1], T[i], out[i + 1])
    B = np.cross(T, out)
    return T, out, B, kappa, frenet


def frame_rotation_deg(f0, f1):
    """Angle of the rotation taking frame ``f0`` to ``f1``."""
    r = f0.matrix.T @ f1.matrix
    c = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


@dataclass
class LoftPath:
    """A chain of branches lofted as one tube."""

    path_id: int
    branch_ids: list
    parent_path: int
    points: np.ndarray
    radii: np.ndarray
    point_branch: np.ndarray
    point_branch_s: np.ndarray


def _continuation(tree, branch_id):
    kids = tree.children(branch_id)
    if not kids:
        return None
    pts = tree.branch_polyline(branch_id)
    end_dir = pts[-1] - pts[max(0, len(pts) - 4)]
    end_dir = end_dir / (np.linalg.norm(end_dir) or 1.0)

    def score(c):
        cp = tree.branch_polyline(c)
        d = cp[min(3, len(cp) - 1)] - cp[0]
        d = d / (np.linalg.norm(d) or 1.0)
        return (float(np.dot(d, end_dir)), float(tree.radii[tree.branch(c).point_ids[0]]), -c)

    return max(kids, key=score)


def lofting_paths(tree):
    """Decompose ``tree`` into tubes: each path follows the best-aligned child."""
    paths = []
    branch_path = {}
    queue = [(r, None) for r in tree.roots()]
    while queue:
        start, parent_path = queue.pop(0)
        chain = [start]
        while True:
            nxt = _continuation(tree, chain[-1])
            if nxt is None:
                break
            chain.append(nxt)
        pid = len(paths)
        pts, rad, pb, ps = [], [], [], []
        for k, b in enumerate(chain):
            anchor = k == 0 and tree.branch(b).parent_branch is not None
            p = tree.branch_polyline(b, with_anchor=anchor)
            pts.append(p)
            rad.append(tree.branch_radii(b, with_anchor=anchor))
            pb.append(np.full(len(p), b))
            ps.append(tree.branch_arc(b, with_anchor=anchor))
        paths.append(
            LoftPath(pid, chain, parent_path, np.vstack(pts), np.concatenate(rad), np.concatenate(pb), np.concatenate(ps))
        )
        for b in chain:
            branch_path[b] = pid
        for b in chain:
            for c in tree.children(b):
                if c not in chain:
                    queue.append((c, pid))
    return paths


def smooth_polyline(points, sigma_mm):
    """Gaussian smoothing along a polyline with both endpoints held fixed."""
    points = np.asarray(points, dtype=float)
    if sigma_mm <= 0 or len(points) < 3:
        return points
    step = np.mean(np.linalg.norm(np.diff(points, axis=0), axis=1))
    sig = sigma_mm / max(step, 1e-12)
    out = ndimage.gaussian_filter1d(points, sig, axis=0, mode="nearest")
    # add the linear ramp that puts both ends back on the input endpoints
    u = np.linspace(0.0, 1.0, len(points))[:, None]
    return out + (1 - u) * (points[0] - out[0]) + u * (points[-1] - out[-1])


class PathCurve:
    """Cubic interpolation of a path's points, radii and branch tags over arc length."""

    def __init__(self, path, smoothing_mm=0.0):
        pts = smooth_polyline(path.points, smoothing_mm)
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        bad = np.flatnonzero(steps <= 1e-9)
        if bad.size:
            raise InputError(
                f"path {path.path_id} (branches {path.branch_ids}) has coincident consecutive points at index {bad[0]}"
            )
        self.path = path
        self.u = np.concatenate([[0.0], np.cumsum(steps)])
        self.length = float(self.u[-1])
        k = min(3, len(pts) - 1)
        self.pos = make_interp_spline(self.u, pts, k=k)
        self.d1 = self.pos.derivative(1)
        self.d2 = self.pos.derivative(2) if k > 1 else None
        self.rad = make_interp_spline(self.u, path.radii, k=1)

    def evaluate(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        x = self.pos(s)
        d1 = self.d1(s)
        d2 = self.d2(s) if self.d2 is not None else np.zeros_like(d1)
        return x, d1, d2

    def radius(self, s):
        return self.rad(np.clip(s, 0.0, self.length))

    def branch_tag(self, s):
        """(branch id, arc within branch) at path arc positions ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.u, s, side="right") - 1, 0, len(self.u) - 1)
        nxt = np.minimum(idx + 1, len(self.u) - 1)
        pb = self.path.point_branch
        br = np.where(pb[idx] == pb[nxt], pb[idx], pb[nxt])
        # arc within branch, measured from the nearest sample of that branch
        base = np.where(pb[idx] == br, idx, nxt)
        bs = self.path.point_branch_s[base] + (s - self.u[base])
        return br, bs


def frames_along(curve, s):
    x, d1, d2 = curve.evaluate(s)
    T, N, B, kappa, frenet = curve_frames(x, d1, d2)
    return x, T, N, B, kappa


KINK_DEG = 15.0


def _auto_smoothing(path):
    d = np.diff(path.points, axis=0)
    d = d[np.linalg.norm(d, axis=1) > 0]
    if len(d) < 2:
        return 0.0
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    turn = np.degrees(np.arccos(np.clip(np.sum(d[1:] * d[:-1], axis=1), -1.0, 1.0)))
    return float(np.mean(path.radii)) if turn.max() > KINK_DEG else 0.0


MAX_KAPPA_R = 0.8  # bend radius kept above 1.25 tube radii
SMOOTH_GROWTH = 1.5
SMOOTH_ROUNDS = 8


def _fitted_curve(path):
    """PathCurve with the auto smoothing widened until the bend radius clears the tube."""
    sigma = _auto_smoothing(path)
    curve = PathCurve(path, sigma)
    for _ in range(SMOOTH_ROUNDS):
        s = np.linspace(0.0, curve.length, max(8, int(curve.length * 10)))
        x, d1, d2 = curve.evaluate(s)
        kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / np.linalg.norm(d1, axis=1) ** 3
        if np.max(kappa * curve.radius(s)) <= MAX_KAPPA_R:
            break
        sigma = SMOOTH_GROWTH * sigma if sigma > 0 else float(np.mean(path.radii))
        curve = PathCurve(path, sigma)
    return curve


def build_cross_sections(tree, sections_per_mm=2.0, smoothing_mm=None, curves=None):
    """Cross-sections at uniform arc spacing along every lofting path.

    Returns a list (one entry per lofting path) of lists of CrossSection,
    each section tagged with its branch id and arc positions. Contours are
    circles of the local radius. ``smoothing_mm`` is the Gaussian width used
    to round off kinks before lofting. By default a path is smoothed by its
    mean radius only if it turns by more than ``KINK_DEG`` between samples
    (voxel staircases, branch joints), and the width is then grown until the
    bend radius is at least ``1 / MAX_KAPPA_R`` tube radii.
    """
    if not sections_per_mm > 0:
        raise InputError(f"sections_per_mm must be > 0, got {sections_per_mm}")
    for br in tree.branches:
        if len(tree.branch_polyline(br.branch_id)) < 2:
            raise InputError(f"branch {br.branch_id} has fewer than 2 points")
    if curves is None:
        curves = [
            _fitted_curve(p) if smoothing_mm is None else PathCurve(p, smoothing_mm)
            for p in lofting_paths(tree)
        ]
    out = []
    for curve in curves:
        n = max(2, int(np.ceil(curve.length * sections_per_mm)) + 1)
        s = np.linspace(0.0, curve.length, n)
        x, T, N, B, kappa = frames_along(curve, s)
        r = curve.radius(s)
        br, bs = curve.branch_tag(s)
        out.append(
            [
                CrossSection(
                    Frame(x[i], T[i], N[i], B[i]),
                    float(r[i]),
                    float(r[i]),
                    branch_id=int(br[i]),
                    branch_s=float(bs[i]),
                    path_id=curve.path.path_id,
                    path_s=float(s[i]),
                    parent_path=curve.path.parent_path,
                    kappa=float(kappa[i]),
                )
                for i in range(n)
            ]
        )
    return out
