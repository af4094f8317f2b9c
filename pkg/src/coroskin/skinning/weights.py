"""Bounded biharmonic skinning weights."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericalError
from .activeset import KKT_TOL, MAX_ITER, BoxQP
from .fem import bilaplacian
from .handles import nearest_handle

log = logging.getLogger(__name__)


@dataclass
class WeightMatrix:
    values: np.ndarray  # (n_rows, n_handles)
    nearest: np.ndarray = None  # geodesically nearest handle per row
    fallback_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    iterations: list = field(default_factory=list)
    kkt_residuals: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InputError(f"weight matrix must be 2-D, got shape {self.values.shape}")

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_handles(self):
        return self.values.shape[1]

    def rows(self, ids):
        return WeightMatrix(self.values[ids], None if self.nearest is None else self.nearest[ids])


def handle_constraints(tetmesh, handles):
    """Constrained node ids and their (n_constrained, n_handles) 0/1 values."""
    owner = handles.node_handle(tetmesh.n_nodes)
    fixed = np.flatnonzero(owner >= 0)
    values = np.zeros((fixed.size, len(handles)))
    values[np.arange(fixed.size), owner[fixed]] = 1.0
    return fixed, values


def solve_weights(tetmesh, handles, normalize=True, tol=KKT_TOL, max_iter=MAX_ITER):
    """Per-handle bounded biharmonic weights over every tet-mesh node.

    For each handle b, minimizes w' K M^-1 K w with w = 1 on b's centerline
    nodes, 0 on the other handles' centerline nodes and 0 <= w <= 1 elsewhere.
    Rows are then normalized unless ``normalize`` is False.
    """
    handles.validate(tetmesh.n_nodes)
    n, nb = tetmesh.n_nodes, len(handles)
    nearest = nearest_handle(tetmesh, handles)
    if np.any(nearest < 0):
        bad = int(np.flatnonzero(nearest < 0)[0])
        raise NumericalError(
            f"node {bad} lies in a mesh component without any handle; the weight system is singular there"
        )
    fixed, cvals = handle_constraints(tetmesh, handles)
    if nb == 1:
        return WeightMatrix(np.ones((n, 1)), nearest, iterations=[0], kkt_residuals=[0.0])
    Q, _, _ = bilaplacian(tetmesh.nodes, tetmesh.tets)
    free = np.setdiff1d(np.arange(n), fixed)
    W = np.zeros((n, nb))
    W[fixed] = cvals
    iters, res = [], []
    if free.size:
        Qff = Q[free][:, free]
        Qfc = Q[free][:, fixed]
        qp = BoxQP(Qff, 0.0, 1.0, tol=tol, max_iter=max_iter)
        for b in range(nb):
            out = qp.solve(Qfc @ cvals[:, b], label=f"for handle {b}")
            W[free, b] = out.x
            iters.append(out.iterations)
            res.append(out.kkt_residual)
    wm = WeightMatrix(W, nearest, iterations=iters, kkt_residuals=res)
    return normalize_weights(wm) if normalize else wm


def normalize_weights(W, nearest=None):
    """Divide each row by its sum; all-zero rows become the nearest handle's indicator."""
    wm = W if isinstance(W, WeightMatrix) else WeightMatrix(W, nearest)
    vals = wm.values.copy()
    if not np.all(np.isfinite(vals)):
        raise InputError("weight matrix has non-finite entries")
    near = wm.nearest if nearest is None else np.asarray(nearest)
    sums = vals.sum(axis=1)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        log.warning("%d weight row(s) sum to zero; using the nearest handle instead", zero.size)
        vals[zero] = 0.0
        if near is None:
            vals[zero] = 1.0 / vals.shape[1]
        else:
            vals[zero, near[zero]] = 1.0
        sums[zero] = vals[zero].sum(axis=1)
    vals /= sums[:, None]
    return WeightMatrix(vals, near, zero, list(wm.iterations), list(wm.kkt_residuals))
