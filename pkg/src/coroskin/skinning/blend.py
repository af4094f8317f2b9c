"""Linear blend skinning."""

import numpy as np

from ..errors import InputError


def pivot_affine(rotations, translations, pivots):
    """Per-handle (R, t') such that R v + t' = R (v - c) + c + t."""
    R = np.asarray(rotations, dtype=float)
    t = np.asarray(translations, dtype=float)
    c = np.asarray(pivots, dtype=float)
    return R, c + t - np.einsum("bij,bj->bi", R, c)


def apply_skinning(surface, W, rotations, translations):
    """Blend per-handle rigid transforms ``v -> R_b v + t_b`` with weights ``W``.

    ``surface`` is a SurfaceMesh or an (n, 3) vertex array; ``W`` a
    WeightMatrix or array whose first n rows belong to those vertices. The
    return type follows ``surface``.
    """
    verts = surface.vertices if hasattr(surface, "vertices") else np.asarray(surface, dtype=float)
    w = W.values if hasattr(W, "values") else np.asarray(W)
    R = np.asarray(rotations, dtype=float)
    t = np.asarray(translations, dtype=float)
    n, nb = len(verts), w.shape[1]
    if w.shape[0] < n:
        raise InputError(f"weight matrix has {w.shape[0]} rows but the surface has {n} vertices")
    if R.shape != (nb, 3, 3) or t.shape != (nb, 3):
        raise InputError(
            f"expected {nb} transforms (rotations {(nb, 3, 3)}, translations {(nb, 3)}), "
            f"got {R.shape} and {t.shape}"
        )
    w = w[:n]
    # blend the offsets (R - I, t) so identity transforms return v bit for bit
    M = w @ np.concatenate([(R - np.eye(3)).reshape(nb, 9), t], axis=1)
    out = verts + (np.einsum("nij,nj->ni", M[:, :9].reshape(n, 3, 3), verts) + M[:, 9:])
    return surface.with_vertices(out) if hasattr(surface, "with_vertices") else out
