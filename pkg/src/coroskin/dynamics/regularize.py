"""Velocity-field regularization by implicit graph-heat smoothing.

The smoothing law dv/dtau = -(1/lambda) L v is stepped with backward
Euler of unit step, i.e. each step solves (I + L/lambda) v' = v with L the
combinatorial graph Laplacian of the surface. Constant fields are fixed
points and the graph Dirichlet energy v'Lv never increases.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InputError, NumericalError

SMOOTH_TOL = 1e-6
SMOOTH_MAX_ITER = 100


def mesh_edges(triangles):
    t = np.asarray(triangles, dtype=np.int64)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def graph_laplacian(n, edges):
    """Combinatorial Laplacian D - A; rejects isolated vertices."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    A = ((A + A.T) > 0).astype(float).tocsr()
    deg = np.asarray(A.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise InputError(f"vertex {int(np.flatnonzero(deg == 0)[0])} has no neighbours; adjacency is degenerate")
    return (sp.diags(deg) - A).tocsr()


def dirichlet_energy(L, v):
    """sum over edges of |v_i - v_j|^2 for an (n,) or (n, k) field."""
    v = np.asarray(v, dtype=float).reshape(L.shape[0], -1)
    return float(np.einsum("ij,ij->", v, L @ v))


class HeatSmoother:
    """Backward-Euler heat steps sharing a single factorization."""

    def __init__(self, L, lam):
        if not lam > 0:
            raise InputError(f"smoothing parameter lambda must be positive, got {lam}")
        self.L = sp.csc_matrix(L)
        self.lam = float(lam)
        n = self.L.shape[0]
        self.lu = spla.splu((sp.identity(n, format="csc") + self.L / self.lam).tocsc())

    def step(self, v):
        v = np.asarray(v, dtype=float)
        out = self.lu.solve(v.reshape(v.shape[0], -1))
        return out.reshape(v.shape)

    def run(self, v, tol=SMOOTH_TOL, max_iter=SMOOTH_MAX_ITER):
        """Repeat steps until the per-step change, relative to |v|_inf, is <= tol.

        Returns the smoothed field and the per-step (residual, energy) history.
        """
        v = np.asarray(v, dtype=float)
        n = v.shape[0]
        flat = v.reshape(n, -1)
        scale = max(np.abs(flat).max(initial=0.0), 1e-300)
        e_prev = dirichlet_energy(self.L, flat)
        history = []
        for _ in range(max_iter):
            nxt = self.lu.solve(flat)
            res = float(np.abs(nxt - flat).max(initial=0.0) / scale)
            e = dirichlet_energy(self.L, nxt)
            if e > e_prev * (1 + 1e-12) + 1e-300:
                raise NumericalError(f"smoothing step raised the Dirichlet energy from {e_prev:.6g} to {e:.6g}")
            history.append((res, e))
            flat, e_prev = nxt, e
            if res <= tol:
                break
        return flat.reshape(v.shape), history


def finite_difference_velocity(frames, closing_frame, dt):
    """Forward differences v_j = (P_{j+1} - P_j) / dt_j with P_N the closing frame."""
    P = np.concatenate([frames, closing_frame[None]], axis=0)
    return np.diff(P, axis=0) / np.asarray(dt, dtype=float)[:, None, None]


def reintegrate(frames, velocity, dt, anchors, closing_frame):
    """Rebuild positions from velocities between pinned anchor frames.

    ``anchors`` are increasing frame indices starting at 0; the segment after
    the last anchor ends at ``closing_frame``. Each segment is integrated
    forward from its start and the end mismatch is removed by a linear ramp,
    so anchor frames keep their exact values.
    """
    frames = np.asarray(frames, dtype=float)
    out = frames.copy()
    nf = len(frames)
    dt = np.asarray(dt, dtype=float)
    bounds = list(anchors) + [nf]
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = b - a
        if m <= 1:
            continue
        target = closing_frame if b == nf else frames[b]
        steps = np.cumsum(velocity[a:b] * dt[a:b, None, None], axis=0)
        err = (frames[a] + steps[-1]) - target
        ramp = (np.arange(1, m) / m)[:, None, None]
        out[a + 1 : b] = frames[a] + steps[:-1] - ramp * err
    return out
