"""Box-constrained convex QP by active-set iteration.

Solves  min 1/2 x'Qx + g'x  s.t.  lo <= x <= hi  for sparse SPD ``Q``.

A first phase repeatedly fixes bound variables whose gradient points
outward, clamps every violator of the resulting subspace minimizer and
re-solves; it identifies most of the active set in a few solves. A
textbook primal active-set phase (one working-set change per step, with a
ratio test) then finishes degenerate cases where the first phase would
oscillate. Subspace solves use a Schur complement on a single factorization
of ``Q`` when few variables are fixed and a factorization of the free block
otherwise.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericalError

log = logging.getLogger(__name__)

KKT_TOL = 1e-8
MAX_ITER = 200
SCHUR_LIMIT = 600


@dataclass
class QPResult:
    x: np.ndarray
    lower: np.ndarray  # bool mask of variables held at the lower bound
    upper: np.ndarray
    iterations: int
    kkt_residual: float


def factorize(Q):
    Q = sp.csc_matrix(Q)
    try:
        return spla.splu(Q, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:  # exactly singular
        raise NumericalError(f"bi-Laplacian block is singular: {exc}") from exc


def kkt_residual(Q, g, x, lo=0.0, hi=1.0):
    """Projected-gradient KKT residual, relative to max(1, |g|_inf).

    Zero exactly when x is feasible, the gradient vanishes on free variables
    and points outward on bound ones.
    """
    grad = Q @ x + g
    pg = x - np.clip(x - grad, lo, hi)
    infeas = max(np.maximum(lo - x, 0).max(initial=0.0), np.maximum(x - hi, 0).max(initial=0.0))
    return max(np.abs(pg).max(initial=0.0), infeas) / max(1.0, np.abs(g).max(initial=0.0))


class _ColumnCache:
    """Columns of Q^-1 keyed by variable index, computed in blocks."""

    def __init__(self, lu, n, limit=2 * SCHUR_LIMIT):
        self.lu, self.n, self.limit = lu, n, limit
        self.cols = {}

    def get(self, idx):
        missing = [i for i in idx if i not in self.cols]
        if missing:
            if len(self.cols) + len(missing) > self.limit:
                self.cols.clear()
                missing = list(idx)
            rhs = np.zeros((self.n, len(missing)))
            rhs[missing, np.arange(len(missing))] = 1.0
            sol = self.lu.solve(rhs)
            for k, i in enumerate(missing):
                self.cols[i] = sol[:, k]
        return np.column_stack([self.cols[i] for i in idx]) if len(idx) else np.zeros((self.n, 0))


class BoxQP:
    """Reusable solver for several right-hand sides sharing one ``Q``."""

    def __init__(self, Q, lo=0.0, hi=1.0, tol=KKT_TOL, max_iter=MAX_ITER):
        self.Q = sp.csr_matrix(Q)
        self.n = self.Q.shape[0]
        self.lo, self.hi = lo, hi
        self.tol, self.max_iter = tol, max_iter
        self.lu = factorize(self.Q)
        self.cache = _ColumnCache(self.lu, self.n)

    def _solve_fixed(self, g, x0, fixed, values):
        """Minimizer with x[fixed] = values; returns x and the gradient."""
        if fixed.size == 0:
            return x0.copy()
        if fixed.size <= min(SCHUR_LIMIT, self.n // 4):
            Z = self.cache.get(fixed.tolist())
            S = Z[fixed]
            try:
                mu = la.solve(S, values - x0[fixed], assume_a="pos")
            except (la.LinAlgError, ValueError):
                mu = la.lstsq(S, values - x0[fixed])[0]
            x = x0 + Z @ mu
        else:
            free = np.setdiff1d(np.arange(self.n), fixed)
            x = np.empty(self.n)
            x[fixed] = values
            if free.size:
                Qff = self.Q[free][:, free]
                rhs = -(g[free] + self.Q[free][:, fixed] @ values)
                x[free] = factorize(Qff).solve(rhs)
        x[fixed] = values
        return x

    def objective(self, g, x):
        return 0.5 * x @ (self.Q @ x) + g @ x

    def _subspace(self, g, x0, lower, upper):
        fixed = np.flatnonzero(lower | upper)
        values = np.where(upper[fixed], self.hi, self.lo).astype(float)
        return self._solve_fixed(g, x0, fixed, values)

    def solve(self, g, label=""):
        g = np.asarray(g, dtype=float)
        lo, hi = self.lo, self.hi
        scale = max(1.0, np.abs(g).max(initial=0.0))
        x0 = self.lu.solve(-g)
        x = np.clip(x0, lo, hi)
        f = self.objective(g, x)
        res = kkt_residual(self.Q, g, x, lo, hi)
        it, stalled, best = 0, 0, res
        # phase 1: fix outward-gradient bounds, clamp violators, re-solve
        while res > self.tol and stalled < 3 and it < self.max_iter:
            grad = self.Q @ x + g
            # release only bounds whose multiplier is clearly of the wrong sign
            eps = self.tol * scale
            lower = (x <= lo) & (grad > -eps)
            upper = (x >= hi) & (grad < eps)
            while it < self.max_iter:
                it += 1
                t = self._subspace(g, x0, lower, upper)
                below, above = t < lo, t > hi
                if not (below.any() or above.any()):
                    break
                lower |= below
                upper |= above
            ft = self.objective(g, t)
            if ft > f + 1e-12 * abs(f):
                break
            x, f = np.clip(t, lo, hi), ft
            res = kkt_residual(self.Q, g, x, lo, hi)
            stalled = stalled + 1 if res >= best else 0
            best = min(best, res)
        # phase 2: primal active set from the current feasible point
        W_lo, W_hi = x <= lo, x >= hi
        while res > self.tol:
            it += 1
            if it > self.max_iter:
                raise NumericalError(
                    f"active-set solve {label} did not converge in {self.max_iter} iterations (KKT residual {res:.3g})"
                )
            t = self._subspace(g, x0, W_lo, W_hi)
            p = t - x
            if np.abs(p).max(initial=0.0) <= 1e-15:
                grad = self.Q @ x + g
                wrong = np.where(W_lo, -grad, 0.0) + np.where(W_hi, grad, 0.0)
                release = wrong > self.tol * scale
                if not release.any():
                    break
                W_lo &= ~release
                W_hi &= ~release
                continue
            free = ~(W_lo | W_hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(free & (p < 0), (x - lo) / -p, np.inf)
                ratio = np.minimum(ratio, np.where(free & (p > 0), (hi - x) / p, np.inf))
            alpha = min(1.0, float(ratio.min(initial=np.inf)))
            x = np.clip(x + alpha * p, lo, hi)
            if alpha < 1.0:
                # every variable blocking at this step length joins the working set
                hit = ratio <= alpha * (1 + 1e-12)
                x[hit & (p < 0)] = lo
                x[hit & (p > 0)] = hi
                W_lo |= hit & (p < 0)
                W_hi |= hit & (p > 0)
            res = kkt_residual(self.Q, g, x, lo, hi)
        grad = self.Q @ x + g
        return QPResult(x, (x <= lo) & (grad > 0), (x >= hi) & (grad < 0), it, res)
