"""Closed-surface voxelization by z-ray parity."""

import numpy as np

from ..errors import InputError
from ..volumetric import VoxelVolume

# rays are nudged off the voxel-centre lattice so they never graze mesh edges
_RAY_JITTER = (1.2345678e-6, 2.3456789e-6)


def voxelize(surface, spacing_mm=0.25, margin_mm=None):
    """Binary VoxelVolume (1 inside) of a closed, consistently oriented surface."""
    sp = float(spacing_mm)
    if not sp > 0:
        raise InputError(f"voxel spacing must be positive, got {spacing_mm}")
    V = np.asarray(surface.vertices, dtype=float)
    T = np.asarray(surface.triangles, dtype=np.int64)
    if len(T) == 0:
        raise InputError("surface has no triangles")
    margin = 2 * sp if margin_mm is None else float(margin_mm)
    used = V[np.unique(T)]
    lo = used.min(0) - margin
    shape = tuple(int(n) for n in np.ceil((used.max(0) + margin - lo) / sp).astype(int) + 1)

    P = V[T]  # (m, 3, 3)
    jx, jy = (j * sp for j in _RAY_JITTER)
    gx = (P[:, :, 0] - lo[0] - jx) / sp
    gy = (P[:, :, 1] - lo[1] - jy) / sp
    i0 = np.clip(np.ceil(gx.min(1)).astype(int), 0, shape[0] - 1)
    i1 = np.clip(np.floor(gx.max(1)).astype(int), -1, shape[0] - 1)
    j0 = np.clip(np.ceil(gy.min(1)).astype(int), 0, shape[1] - 1)
    j1 = np.clip(np.floor(gy.max(1)).astype(int), -1, shape[1] - 1)
    nx, ny = np.maximum(i1 - i0 + 1, 0), np.maximum(j1 - j0 + 1, 0)
    cnt = nx * ny
    tri = np.repeat(np.arange(len(T)), cnt)
    local = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    ci = i0[tri] + local // np.maximum(ny[tri], 1)
    cj = j0[tri] + local % np.maximum(ny[tri], 1)
    x = lo[0] + ci * sp + jx
    y = lo[1] + cj * sp + jy

    a, b, c = P[tri, 0], P[tri, 1], P[tri, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    ok = det != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = ((x - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (y - a[:, 1])) / det
        v = ((b[:, 0] - a[:, 0]) * (y - a[:, 1]) - (x - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1)
    z = a[hit, 2] + u[hit] * (b[hit, 2] - a[hit, 2]) + v[hit] * (c[hit, 2] - a[hit, 2])
    kz = np.clip(np.ceil((z - lo[2]) / sp).astype(int), 0, shape[2])

    count = np.zeros((shape[0], shape[1], shape[2] + 1), dtype=np.int32)
    np.add.at(count, (ci[hit], cj[hit], kz), 1)
    inside = (np.cumsum(count, axis=2)[:, :, :-1] % 2) == 1
    return VoxelVolume(inside.astype(np.float32), (sp, sp, sp), tuple(float(o) for o in lo))
