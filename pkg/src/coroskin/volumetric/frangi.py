"""Multiscale Hessian vesselness and threshold segmentation."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import InputError
from .volume import FrangiParams, VoxelVolume

log = logging.getLogger(__name__)

# second-derivative orders for the six unique Hessian entries
_HESSIAN_ORDERS = (
    ((2, 0, 0), (0, 0)),
    ((0, 2, 0), (1, 1)),
    ((0, 0, 2), (2, 2)),
    ((1, 1, 0), (0, 1)),
    ((1, 0, 1), (0, 2)),
    ((0, 1, 1), (1, 2)),
)

_CHUNK = 1 << 19


@dataclass
class HessianEigen:
    """Hessian eigenvalues sorted so that |lambda1| <= |lambda2| <= |lambda3|."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray

    @property
    def S(self):
        return np.sqrt(self.lambda1**2 + self.lambda2**2 + self.lambda3**2)

    @property
    def R_A(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.lambda2) / np.abs(self.lambda3)

    @property
    def R_B(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.lambda1) / np.sqrt(np.abs(self.lambda2 * self.lambda3))


def sort_by_magnitude(eigvals):
    """Sort the last axis of ``eigvals`` by ascending absolute value."""
    order = np.argsort(np.abs(eigvals), axis=-1, kind="stable")
    return np.take_along_axis(eigvals, order, axis=-1)


def hessian(values, sigma_mm, spacing_mm):
    """Scale-normalised Hessian components (six arrays, xx yy zz xy xz yz).

    Derivatives are taken in mm; the sigma^2 factor makes responses comparable
    across scales.
    """
    spacing = np.asarray(spacing_mm, dtype=float)
    sigma_vox = sigma_mm / spacing
    values = np.asarray(values, dtype=float)
    out = []
    for order, (a, b) in _HESSIAN_ORDERS:
        d = ndimage.gaussian_filter(values, sigma_vox, order=order, mode="reflect")
        out.append(d * (sigma_mm**2 / (spacing[a] * spacing[b])))
    return out


def hessian_eigen(components):
    """Eigenvalues of the symmetric Hessian given as six component arrays."""
    xx, yy, zz, xy, xz, yz = (np.ravel(c) for c in components)
    n = xx.size
    lam = np.empty((n, 3))
    for start in range(0, n, _CHUNK):
        sl = slice(start, start + _CHUNK)
        m = np.empty((xx[sl].size, 3, 3))
        m[:, 0, 0], m[:, 1, 1], m[:, 2, 2] = xx[sl], yy[sl], zz[sl]
        m[:, 0, 1] = m[:, 1, 0] = xy[sl]
        m[:, 0, 2] = m[:, 2, 0] = xz[sl]
        m[:, 1, 2] = m[:, 2, 1] = yz[sl]
        lam[sl] = np.linalg.eigvalsh(m)
    lam = sort_by_magnitude(lam)
    return HessianEigen(lam[:, 0], lam[:, 1], lam[:, 2])


def vesselness_from_eigen(eig, alpha, beta, c, bright=True):
    """Single-scale vesselness V0 for given eigenvalues.

    Voxels whose two largest-magnitude eigenvalues have the wrong sign for the
    chosen polarity, or where the ratios are undefined, get 0.
    """
    l1, l2, l3 = eig.lambda1, eig.lambda2, eig.lambda3
    if not bright:
        l1, l2, l3 = -l1, -l2, -l3
    v = np.zeros(np.shape(l1))
    if c is None or not c > 0:
        return v
    ok = (l2 <= 0) & (l3 <= 0) & (l3 != 0) & (l2 * l3 != 0)
    if not np.any(ok):
        return v
    a, b, g = np.abs(l1[ok]), np.abs(l2[ok]), np.abs(l3[ok])
    ra2 = (b / g) ** 2
    rb2 = a * a / (b * g)
    s2 = a * a + b * b + g * g
    v[ok] = (
        (1.0 - np.exp(-ra2 / (2.0 * alpha**2)))
        * np.exp(-rb2 / (2.0 * beta**2))
        * (1.0 - np.exp(-s2 / (2.0 * c**2)))
    )
    return v


def _frobenius_max(components):
    xx, yy, zz, xy, xz, yz = components
    return float(np.sqrt((xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + xz * xz + yz * yz)).max()))


def compute_vesselness(volume, params=None, return_scale=False):
    """Maximum single-scale vesselness over geometrically spaced scales.

    Output lies in [0, 1] and shares the grid of ``volume``. When ``params.c``
    is None it is set to half the largest Hessian Frobenius norm found at any
    scale.
    """
    params = (params or FrangiParams()).validate()
    volume.validate()
    values = np.asarray(volume.values, dtype=float)
    out = np.zeros(values.size)
    best = np.zeros(values.size)
    span = float(values.max() - values.min())
    if span == 0.0:
        result = volume.like(out.reshape(values.shape))
        return (result, best.reshape(values.shape)) if return_scale else result
    # centring removes the constant offset before filtering
    values = values - values.mean()
    # Hessian norms below this are treated as numerical zero
    floor = 1e-9 * span / min(volume.spacing_mm) ** 2
    c = params.c
    if c is None:
        # one c for all scales, so that broad scales (which see the wall as a
        # tube) are not boosted to the strength of the matched scale
        c = 0.5 * max(_frobenius_max(hessian(values, s, volume.spacing_mm)) for s in params.scales())
    for sigma in params.scales():
        eig = hessian_eigen(hessian(values, sigma, volume.spacing_mm))
        S = eig.S
        if c <= floor:
            log.debug("scale %.3f mm has no structure above the noise floor", sigma)
            continue
        v0 = vesselness_from_eigen(eig, params.alpha, params.beta, c, params.bright)
        v0[S <= floor] = 0.0
        upd = v0 > out
        out[upd] = v0[upd]
        best[upd] = sigma
    out = np.clip(out, 0.0, 1.0).reshape(values.shape)
    result = volume.like(out)
    return (result, best.reshape(values.shape)) if return_scale else result


def segment(vesselness, threshold=0.05, largest_component=True):
    """Binary mask from a vesselness map, keeping the largest 26-connected blob."""
    if not 0 <= threshold < 1:
        raise InputError(f"segmentation threshold must lie in [0, 1), got {threshold}")
    mask = np.asarray(vesselness.values) > threshold
    if largest_component and mask.any():
        labels, n = ndimage.label(mask, structure=np.ones((3, 3, 3)))
        if n > 1:
            sizes = np.bincount(labels.ravel())
            sizes[0] = 0
            mask = labels == int(np.argmax(sizes))
    return vesselness.like(mask.astype(np.float32))
