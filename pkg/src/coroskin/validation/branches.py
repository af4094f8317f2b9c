"""Branch completeness and continuity between two centerline trees."""

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InputError

MATCH_GATE_MM = 5.0


def _resample(poly, step):
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return poly[:1]
    u = np.linspace(0.0, s[-1], max(2, int(np.ceil(s[-1] / step)) + 1))
    return np.column_stack([np.interp(u, s, poly[:, k]) for k in range(3)])


def curve_distance(p, q, step=0.1):
    """Symmetric mean nearest-point distance between two polylines."""
    a, b = _resample(np.asarray(p, float), step), _resample(np.asarray(q, float), step)
    return 0.5 * (cKDTree(b).query(a)[0].mean() + cKDTree(a).query(b)[0].mean())


def match_branches(tree_i, tree_r, gate_mm=MATCH_GATE_MM):
    """Greedy unique matching by increasing curve distance, gated at ``gate_mm``.

    Returns a list of ``(branch_i, branch_r, distance)``.
    """
    bi = [b.branch_id for b in tree_i.branches]
    br = [b.branch_id for b in tree_r.branches]
    polys_i = {b: tree_i.branch_polyline(b) for b in bi}
    polys_r = {b: tree_r.branch_polyline(b) for b in br}
    cand = sorted(
        (curve_distance(polys_i[a], polys_r[b]), a, b) for a in bi for b in br
    )
    used_i, used_r, out = set(), set(), []
    for d, a, b in cand:
        if d > gate_mm:
            break
        if a in used_i or b in used_r:
            continue
        used_i.add(a)
        used_r.add(b)
        out.append((a, b, float(d)))
    return out


def branch_metrics(tree_i, tree_r, gate_mm=MATCH_GATE_MM):
    """(BCR, BCS) of an interpolated tree against a reference tree.

    BCR is the branch-count ratio. BCS averages min(L_i / L_r, 1) over matched
    branches (0 if nothing matches).
    """
    n_i, n_r = len(tree_i.branches), len(tree_r.branches)
    if n_r == 0:
        raise InputError("reference tree has no branches")
    if n_i == 0:
        raise InputError("interpolated tree has no branches")
    matches = match_branches(tree_i, tree_r, gate_mm)
    ratios = []
    for a, b, _ in matches:
        L_i, L_r = tree_i.branch_length(a), tree_r.branch_length(b)
        ratios.append(min(L_i / L_r, 1.0) if L_r > 0 else 1.0)
    bcs = float(np.mean(ratios)) if ratios else 0.0
    return n_i / n_r, bcs
