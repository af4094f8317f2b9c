"""Key poses, their interpolation and cross-section deformation."""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from ..errors import InputError
from .params import EPS_R_CAP

log = logging.getLogger(__name__)


@dataclass
class KeyPose:
    """Per-handle rigid transforms plus per-section ellipse state at one phase.

    A handle maps ``v -> R (v - c) + c + t`` with pivot ``c``. ``sections``
    holds rows ``(a_mm, b_mm, eps_r)``, one per surface ring.
    """

    phase_index: int
    rr_percent: float
    rotations: np.ndarray  # (nb, 3, 3)
    translations: np.ndarray  # (nb, 3)
    pivots: np.ndarray  # (nb, 3)
    sections: np.ndarray = None  # (ns, 3)

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=float).reshape(-1, 3, 3)
        nb = len(self.rotations)
        self.translations = np.asarray(self.translations, dtype=float).reshape(nb, 3)
        self.pivots = np.asarray(self.pivots, dtype=float).reshape(nb, 3)
        self.sections = np.zeros((0, 3)) if self.sections is None else np.asarray(self.sections, dtype=float).reshape(-1, 3)

    @property
    def n_handles(self):
        return len(self.rotations)

    def validate(self, eps_r_cap=EPS_R_CAP):
        if not (0 <= int(self.phase_index)):
            raise InputError(f"phase index must be nonnegative, got {self.phase_index}")
        for name in ("rotations", "translations", "pivots", "sections"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"key pose {self.phase_index}: {name} contain non-finite values")
        if np.any(np.abs(self.sections[:, 2]) > eps_r_cap + 1e-12):
            raise InputError(f"key pose {self.phase_index}: |eps_r| exceeds the cap {eps_r_cap}")
        return self

    def affine(self):
        """Per-handle (R, t') with ``R v + t'`` equal to the pivoted transform."""
        R = self.rotations
        return R, self.pivots + self.translations - np.einsum("bij,bj->bi", R, self.pivots)

    def to_dict(self):
        return {
            "phase_index": int(self.phase_index),
            "rr_percent": float(self.rr_percent),
            "rotations": self.rotations.tolist(),
            "translations": self.translations.tolist(),
            "pivots": self.pivots.tolist(),
            "sections": self.sections.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["phase_index"], d["rr_percent"], d["rotations"], d["translations"], d["pivots"], d.get("sections"))


def check_pose_set(poses, eps_r_cap=EPS_R_CAP):
    """Validate a key-pose list and return it sorted by phase index."""
    poses = list(poses)
    if len(poses) < 2:
        raise InputError(f"need at least 2 key poses, got {len(poses)}")
    idx = [int(p.phase_index) for p in poses]
    if len(set(idx)) != len(idx):
        raise InputError("key pose phase indices must be unique")
    ref = poses[0]
    for p in poses:
        p.validate(eps_r_cap)
        _check_same_structure(ref, p)
    return sorted(poses, key=lambda p: p.phase_index)


def _check_same_structure(p1, p2):
    if p1.rotations.shape != p2.rotations.shape or p1.sections.shape != p2.sections.shape:
        raise InputError(
            f"key poses {p1.phase_index} and {p2.phase_index} differ in structure: "
            f"{p1.n_handles} vs {p2.n_handles} handles, {len(p1.sections)} vs {len(p2.sections)} sections"
        )


def slerp_rotations(R1, R2, t):
    """Shortest-arc spherical interpolation of stacked rotation matrices."""
    out = np.empty_like(R1)
    for b in range(len(R1)):
        rots = Rotation.from_matrix(np.stack([R1[b], R2[b]]))
        out[b] = Slerp([0.0, 1.0], rots)([t]).as_matrix()[0]
    return out


def interpolate_pose(p1, p2, t):
    """Pose at fraction ``t`` between two key poses.

    Translations, pivots, section parameters and the R-R percentage blend
    linearly; rotations follow the shortest great arc. The endpoints return
    the key poses' own arrays unchanged.
    """
    if not 0.0 <= t <= 1.0:
        raise InputError(f"interpolation parameter must lie in [0, 1], got {t}")
    _check_same_structure(p1, p2)
    if t == 0.0 or t == 1.0:
        src = p1 if t == 0.0 else p2
        return KeyPose(src.phase_index, src.rr_percent, src.rotations.copy(), src.translations.copy(), src.pivots.copy(), src.sections.copy())

    def lerp(a, b):
        return (1.0 - t) * a + t * b

    return KeyPose(
        p1.phase_index,
        lerp(p1.rr_percent, p2.rr_percent),
        slerp_rotations(p1.rotations, p2.rotations, t),
        lerp(p1.translations, p2.translations),
        lerp(p1.pivots, p2.pivots),
        _blend_sections(p1.sections, p2.sections, t),
    )


def _blend_sections(s1, s2, t):
    """Linear blend of (a, b, eps) rows, axes rescaled so pi*a*b = A0 (1 + eps)."""
    out = (1.0 - t) * s1 + t * s2
    if not len(out):
        return out
    a1, b1, e1 = s1.T
    if np.any(a1 <= 0) or np.any(b1 <= 0) or np.any(1.0 + e1 <= 0):
        return out
    area0 = np.pi * a1 * b1 / (1.0 + e1)
    scale = np.sqrt(area0 * (1.0 + out[:, 2]) / (np.pi * out[:, 0] * out[:, 1]))
    out[:, 0] *= scale
    out[:, 1] *= scale
    return out


class SectionState(NamedTuple):
    a_mm: float
    b_mm: float
    eps_r: float
    clamped: bool


def deform_cross_section(section, eps_r, cap=EPS_R_CAP, area0=None):
    """Ellipse semi-axes after a radial strain, conserving pi*a*b = A0 (1 + eps_r).

    ``section`` is a CrossSection or an ``(a0, b0)`` pair; the aspect ratio is
    kept. Strains beyond ``cap`` are clamped and flagged.
    """
    if hasattr(section, "a_mm"):
        a0, b0 = section.a_mm, section.b_mm
        area0 = section.area0_mm2 if area0 is None else area0
    else:
        a0, b0 = (float(v) for v in section)
    if area0 is None:
        area0 = np.pi * a0 * b0
    if not (a0 > 0 and b0 > 0 and area0 > 0):
        raise InputError(f"reference cross-section must have positive area, got a0={a0}, b0={b0}, A0={area0}")
    eps = float(eps_r)
    clamped = abs(eps) > cap
    if clamped:
        log.warning("radial strain %.4g clamped to +-%.4g", eps, cap)
        eps = float(np.clip(eps, -cap, cap))
    s = np.sqrt(area0 * (1.0 + eps) / (np.pi * a0 * b0))
    return SectionState(a0 * s, b0 * s, eps, clamped)
