"""Analytic vessel phantoms: volumes, ground-truth trees and surfaces, motion key poses."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .errors import InputError
from .geometry import MeshSizingParams, build_cross_sections, loft_surface
from .volumetric import VesselTree, VoxelVolume, analyze_topology

KINDS = ("straight_tube", "bent_tube", "y_branch", "helix", "torus_arc")
MODES = ("rigid_translate", "bend_cycle", "breathe")
MURRAY_CHILD = 2.0 ** (-1.0 / 3.0)
ARM_DEG = 30.0


@dataclass
class PhantomSpec:
    kind: str = "straight_tube"
    radius_mm: float = 1.5
    length_mm: float = 20.0
    voxel_spacing_mm: float = 0.25
    # Gaussian profile sigma; None puts the half-maximum on the wall
    profile_width_mm: float = None
    seed: int = 0
    shape: tuple = None  # force volume dims (straight_tube only)
    margin_mm: float = None
    sections_per_mm: float = 2.0

    def validate(self):
        if self.kind not in KINDS:
            raise InputError(f"PhantomSpec.kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("radius_mm", "length_mm", "voxel_spacing_mm", "sections_per_mm"):
            if not getattr(self, name) > 0:
                raise InputError(f"PhantomSpec.{name} must be > 0, got {getattr(self, name)}")
        if self.profile_width_mm is not None and not self.profile_width_mm > 0:
            raise InputError(f"PhantomSpec.profile_width_mm must be > 0, got {self.profile_width_mm}")
        if self.radius_mm < 2 * self.voxel_spacing_mm:
            raise InputError(
                f"tube radius {self.radius_mm} mm is under 2 voxels at spacing {self.voxel_spacing_mm} mm"
            )
        return self

    def width_for(self, radius):
        if self.profile_width_mm is not None:
            return self.profile_width_mm * radius / self.radius_mm
        return radius / np.sqrt(2.0 * np.log(2.0))


@dataclass
class Phantom:
    volume: VoxelVolume
    tree: VesselTree
    surface: object
    seed: tuple
    endpoints: list
    mask: VoxelVolume

    def __iter__(self):
        return iter((self.volume, self.tree, self.surface))


def _resample(points, step):
    points = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(2, int(np.ceil(s[-1] / step)) + 1)
    u = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(u, s, points[:, k]) for k in range(3)])


def _curves(spec):
    """Branch polylines (mm, origin-free), radii and parents for each phantom kind."""
    r, L = spec.radius_mm, spec.length_mm
    if spec.kind == "straight_tube":
        return [np.array([[0, 0, 0], [0, 0, L]], float)], [r], [None]
    if spec.kind == "bent_tube":
        straight = np.array([[0, 0, 0], [0, 0, L / 2]], float)
        rb = L / np.pi  # quarter arc of length L/2
        th = np.linspace(0, np.pi / 2, 64)
        arc = np.column_stack([rb * (1 - np.cos(th)), np.zeros_like(th), L / 2 + rb * np.sin(th)])
        return [np.vstack([straight, arc[1:]])], [r], [None]
    if spec.kind == "y_branch":
        trunk = np.array([[0, 0, 0], [0, 0, L / 2]], float)
        kids = []
        for sign in (-1.0, 1.0):
            a = np.radians(ARM_DEG) * sign
            end = trunk[-1] + (L / 2) * np.array([np.sin(a), 0.0, np.cos(a)])
            kids.append(np.array([trunk[-1], end]))
        return [trunk, kids[0], kids[1]], [r, r * MURRAY_CHILD, r * MURRAY_CHILD], [None, 0, 0]
    if spec.kind == "helix":
        R, pitch = 4.0 * r, 6.0 * r
        turn = np.hypot(2 * np.pi * R, pitch)
        th = np.linspace(0, 2 * np.pi * L / turn, max(64, int(L / (0.25 * r))))
        return [np.column_stack([R * np.cos(th), R * np.sin(th), pitch * th / (2 * np.pi)])], [r], [None]
    R = max(4.0 * r, 2.0 * L / np.pi)
    th = np.linspace(0, L / R, max(64, int(L / (0.25 * r))))
    return [np.column_stack([R * (1 - np.cos(th)), np.zeros_like(th), R * np.sin(th)])], [r], [None]


def _tree(curves, radii, parents, step):
    paths = []
    for c, p in zip(curves, parents):
        pts = _resample(c, step)
        paths.append(pts if p is None else pts[1:])
    return VesselTree.from_paths(paths, radii, parents)


def _render(shape, spacing, origin, curves, radii, widths):
    """Max over branches of the Gaussian of the distance to each branch polyline."""
    grid = np.stack(np.meshgrid(*[origin[k] + spacing[k] * np.arange(shape[k]) for k in range(3)], indexing="ij"), -1)
    flat = grid.reshape(-1, 3)
    out = np.zeros(len(flat))
    for c, r, w in zip(curves, radii, widths):
        c = np.asarray(c, dtype=float)
        a, b = c[:-1], c[1:]
        # nearest vertex, then exact distance to its two adjacent segments
        _, idx = cKDTree(c).query(flat)
        d2 = np.full(len(flat), np.inf)
        for seg in (idx - 1, idx):
            ok = (seg >= 0) & (seg < len(a))
            sg = np.clip(seg, 0, len(a) - 1)
            ab = b[sg] - a[sg]
            t = np.clip(np.einsum("ij,ij->i", flat - a[sg], ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
            dd = np.sum((a[sg] + t[:, None] * ab - flat) ** 2, axis=1)
            d2 = np.where(ok, np.minimum(d2, dd), d2)
        out = np.maximum(out, np.exp(-d2 / (2.0 * w * w)))
    return out.reshape(shape)


def make_phantom(spec, sizing=None):
    """Render a phantom volume with its ground-truth tree and lofted surface."""
    spec = (spec if isinstance(spec, PhantomSpec) else PhantomSpec(**spec)).validate()
    sp = spec.voxel_spacing_mm
    curves, radii, parents = _curves(spec)
    widths = [spec.width_for(r) for r in radii]
    allpts = np.vstack(curves)
    if spec.kind == "straight_tube":
        if spec.shape is not None:
            shape = tuple(int(v) for v in spec.shape)
        else:
            margin = spec.margin_mm if spec.margin_mm is not None else spec.radius_mm + 3 * widths[0]
            n_xy = int(np.ceil(2 * margin / sp)) + 1
            shape = (n_xy, n_xy, int(round(spec.length_mm / sp)) + 1)
        # axis on voxel centre n//2, running the full z extent
        origin = np.array([-(shape[0] // 2) * sp, -(shape[1] // 2) * sp, 0.0])
        curves = [np.array([[0, 0, 0], [0, 0, (shape[2] - 1) * sp]], float)]
    else:
        margin = spec.margin_mm if spec.margin_mm is not None else max(radii) + 3 * max(widths)
        lo, hi = allpts.min(0) - margin, allpts.max(0) + margin
        shape = tuple(int(v) for v in np.ceil((hi - lo) / sp).astype(int) + 1)
        origin = lo
    spacing = (sp, sp, sp)
    values = _render(shape, spacing, origin, curves, radii, widths).astype(np.float32)
    volume = VoxelVolume(values, spacing, tuple(float(v) for v in origin)).validate()
    mask = volume.like((values >= 0.5).astype(np.float32))

    tree = _tree(curves, radii, parents, step=sp)
    if tree.bifurcations:
        analyze_topology(tree)
    sections = build_cross_sections(tree, spec.sections_per_mm)
    surface = loft_surface(sections, sizing or MeshSizingParams(h_min_mm=spec.radius_mm / 5, h_max_mm=spec.radius_mm / 2))

    def vox(p):
        ijk = np.rint(volume.mm_to_index(p)).astype(int)
        return tuple(int(v) for v in np.clip(ijk, 0, np.array(shape) - 1))

    root = tree.branch(tree.roots()[0])
    seed = vox(tree.positions[root.point_ids[0]])
    leaves = [b.branch_id for b in tree.branches if not tree.children(b.branch_id)]
    endpoints = [vox(tree.positions[tree.branch(b).point_ids[-1]]) for b in leaves]
    return Phantom(volume, tree, surface, seed, endpoints, mask)


def _rotation_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return Rotation.from_rotvec(axis / np.linalg.norm(axis) * angle).as_matrix()


def make_motion_keyposes(tree, mode, n_phases=20, amplitude=None, handles=None, rest_sections=None, direction=(1, 0, 0)):
    """Closed key-pose cycle for a synthetic motion.

    ``handles`` supplies the per-handle pivots (defaults to one handle at the
    tree centroid); ``rest_sections`` is an (n, 2) array of rest semi-axes.
    Amplitudes: mm for rigid_translate, degrees for bend_cycle, strain for
    breathe.
    """
    from .dynamics import KeyPose, deform_cross_section

    if mode not in MODES:
        raise InputError(f"motion mode must be one of {MODES}, got {mode!r}")
    if n_phases < 2:
        raise InputError(f"n_phases must be >= 2, got {n_phases}")
    if amplitude is None:
        amplitude = {"rigid_translate": 1.0, "bend_cycle": 15.0, "breathe": 0.05}[mode]
    pivots = np.atleast_2d(handles.pivots if handles is not None else tree.positions.mean(0)).astype(float)
    nb = len(pivots)
    rest = np.zeros((0, 2)) if rest_sections is None else np.asarray(rest_sections, dtype=float).reshape(-1, 2)

    root = tree.branch(tree.roots()[0])
    base = tree.positions[root.point_ids[0]]
    head = tree.positions[root.point_ids[-1]] - base
    axis_dir = head / (np.linalg.norm(head) or 1.0)
    along = (pivots - base) @ axis_dir
    span = max(float(np.ptp(along)), 1e-12)
    ramp = np.clip((along - along.min()) / span, 0.0, 1.0)
    bend_axis = np.cross(axis_dir, [0.0, 1.0, 0.0])
    if np.linalg.norm(bend_axis) < 1e-9:
        bend_axis = np.cross(axis_dir, [1.0, 0.0, 0.0])
    direction = np.asarray(direction, dtype=float)

    poses = []
    for k in range(n_phases):
        phi = k / n_phases
        R = np.repeat(np.eye(3)[None], nb, axis=0)
        t = np.zeros((nb, 3))
        eps = np.zeros(len(rest))
        if mode == "rigid_translate":
            t[:] = amplitude * np.sin(2 * np.pi * phi) * direction
        elif mode == "bend_cycle":
            theta = np.radians(amplitude) * np.sin(np.pi * phi) ** 2
            for b in range(nb):
                R[b] = _rotation_about(bend_axis, theta * ramp[b])
                t[b] = R[b] @ (pivots[b] - base) + base - pivots[b]
        else:
            eps[:] = amplitude * np.sin(2 * np.pi * phi)
        sections = np.zeros((len(rest), 3))
        for i, (a0, b0) in enumerate(rest):
            a, b, e, _ = deform_cross_section((a0, b0), eps[i])
            sections[i] = (a, b, e)
        poses.append(KeyPose(k, 100.0 * phi, R, t, pivots.copy(), sections))
    return poses
