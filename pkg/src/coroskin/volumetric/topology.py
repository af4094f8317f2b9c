"""Bifurcation annotation: Murray residuals, branching angles, main path."""

import itertools

import numpy as np

from ..errors import TopologyError
from .tree import Bifurcation


def murray_residual(r_parent, r_children):
    """r_p^3 minus the sum of daughter r^3 (zero for an ideal Murray split)."""
    r_children = np.asarray(r_children, dtype=float)
    return float(r_parent) ** 3 - float(np.sum(r_children**3))


def _end_radius(tree, branch_id, window, at_start):
    ids = tree.branch(branch_id).point_ids
    ids = ids[:window] if at_start else ids[-window:]
    return float(np.median(tree.radii[ids]))


def _child_direction(tree, branch_id, window):
    pts = tree.branch_polyline(branch_id)
    k = min(window, len(pts) - 1)
    d = pts[k] - pts[0]
    n = np.linalg.norm(d)
    if n == 0:
        raise TopologyError(f"branch {branch_id} has no extent near its bifurcation")
    return d / n


def subtree_length(tree, branch_id):
    return tree.branch_length(branch_id) + sum(subtree_length(tree, c) for c in tree.children(branch_id))


def main_path(tree, root):
    """Branch ids from ``root`` following the child with the longest subtree."""
    path = [root]
    while True:
        kids = tree.children(path[-1])
        if not kids:
            return path
        path.append(max(kids, key=lambda c: (subtree_length(tree, c), -c)))


def analyze_topology(tree, window=3):
    """Annotate each bifurcation of ``tree`` in place and return it.

    Radii are medians over ``window`` points at the end of the parent branch
    and the start of each child. Angles are between every pair of child
    directions, measured over the first ``window`` steps of each child.
    """
    bifs = tree.bifurcations or [
        Bifurcation(pid, sorted(kids), parent_branch=int(tree.branch_of[pid]))
        for pid, kids in sorted(tree.bifurcation_points().items())
    ]
    out = []
    for bif in bifs:
        if len(bif.child_branches) < 2:
            raise TopologyError(
                f"bifurcation at point {bif.point_id} references {len(bif.child_branches)} child branch(es); need >= 2"
            )
        parent = int(tree.branch_of[bif.point_id])
        r_p = _end_radius(tree, parent, window, at_start=False)
        r_d = [_end_radius(tree, c, window, at_start=True) for c in bif.child_branches]
        dirs = [_child_direction(tree, c, window) for c in bif.child_branches]
        angles = [
            float(np.degrees(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0))))
            for a, b in itertools.combinations(dirs, 2)
        ]
        out.append(
            Bifurcation(
                bif.point_id,
                list(bif.child_branches),
                angles,
                murray_residual(r_p, r_d),
                parent,
            )
        )
    tree.bifurcations = out
    tree.main_branches = [b for r in tree.roots() for b in main_path(tree, r)]
    return tree
