"""Centerline tree data structures."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TopologyError


@dataclass
class CenterlinePoint:
    id: int
    pos_mm: tuple
    radius_mm: float
    arc_length_mm: float
    branch_id: int
    parent_id: int = None


@dataclass
class Branch:
    branch_id: int
    point_ids: list
    parent_branch: int = None


@dataclass
class Bifurcation:
    point_id: int
    child_branches: list
    angles_deg: list = field(default_factory=list)
    murray_residual_mm3: float = None
    parent_branch: int = None


class VesselTree:
    """Forest of centerline branches.

    Points are stored in flat arrays indexed by point id. A child branch hangs
    off a bifurcation point, which is the last point of its parent branch; the
    child's first point records that bifurcation point as ``parent_id`` and its
    arc length starts at the distance from it.
    """

    def __init__(self, positions, radii, branches, bifurcations=None, main_branches=None):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(radii, dtype=float).ravel()
        self.branches = list(branches)
        self.bifurcations = list(bifurcations or [])
        self.main_branches = list(main_branches or [])
        n = len(self.positions)
        if self.radii.shape != (n,):
            raise TopologyError("radii and positions must have matching lengths")
        self.branch_of = np.full(n, -1, dtype=int)
        self.parent_of = np.full(n, -1, dtype=int)
        for br in self.branches:
            ids = np.asarray(br.point_ids, dtype=int)
            if ids.size == 0:
                raise TopologyError(f"branch {br.branch_id} has no points")
            if np.any(self.branch_of[ids] >= 0):
                raise TopologyError(f"branch {br.branch_id} reuses points of another branch")
            self.branch_of[ids] = br.branch_id
            self.parent_of[ids[1:]] = ids[:-1]
        if np.any(self.branch_of < 0):
            raise TopologyError("every centerline point must belong to exactly one branch")
        self._by_id = {br.branch_id: br for br in self.branches}
        for br in self.branches:
            if br.parent_branch is not None:
                parent = self._by_id.get(br.parent_branch)
                if parent is None:
                    raise TopologyError(f"branch {br.branch_id} has unknown parent {br.parent_branch}")
                self.parent_of[br.point_ids[0]] = parent.point_ids[-1]
        self._check_acyclic()
        self.arc_length = self._arc_lengths()

    def _check_acyclic(self):
        for br in self.branches:
            seen = {br.branch_id}
            cur = br.parent_branch
            while cur is not None:
                if cur in seen:
                    raise TopologyError(f"branch parent links form a cycle through {cur}")
                seen.add(cur)
                cur = self._by_id[cur].parent_branch

    def _arc_lengths(self):
        arc = np.zeros(len(self.positions))
        for br in self.branches:
            ids = np.asarray(br.point_ids)
            steps = np.linalg.norm(np.diff(self.positions[ids], axis=0), axis=1)
            start = 0.0
            if br.parent_branch is not None:
                anchor = self.positions[self.parent_of[ids[0]]]
                start = float(np.linalg.norm(self.positions[ids[0]] - anchor))
            arc[ids] = start + np.concatenate([[0.0], np.cumsum(steps)])
        return arc

    # -- lookup helpers -------------------------------------------------
    def branch(self, branch_id):
        return self._by_id[branch_id]

    def children(self, branch_id):
        return [b.branch_id for b in self.branches if b.parent_branch == branch_id]

    def roots(self):
        return [b.branch_id for b in self.branches if b.parent_branch is None]

    def branch_length(self, branch_id):
        return float(self.arc_length[self._by_id[branch_id].point_ids[-1]])

    def branch_polyline(self, branch_id, with_anchor=True):
        """Positions along a branch, prefixed by its bifurcation point if any."""
        br = self._by_id[branch_id]
        pts = self.positions[br.point_ids]
        if with_anchor and br.parent_branch is not None:
            anchor = self.positions[self.parent_of[br.point_ids[0]]]
            pts = np.vstack([anchor, pts])
        return pts

    def branch_radii(self, branch_id, with_anchor=True):
        br = self._by_id[branch_id]
        r = self.radii[br.point_ids]
        if with_anchor and br.parent_branch is not None:
            r = np.concatenate([[self.radii[self.parent_of[br.point_ids[0]]]], r])
        return r

    def branch_arc(self, branch_id, with_anchor=True):
        br = self._by_id[branch_id]
        s = self.arc_length[br.point_ids]
        if with_anchor and br.parent_branch is not None:
            s = np.concatenate([[0.0], s])
        return s

    @property
    def points(self):
        return [
            CenterlinePoint(
                id=i,
                pos_mm=tuple(self.positions[i]),
                radius_mm=float(self.radii[i]),
                arc_length_mm=float(self.arc_length[i]),
                branch_id=int(self.branch_of[i]),
                parent_id=None if self.parent_of[i] < 0 else int(self.parent_of[i]),
            )
            for i in range(len(self.positions))
        ]

    def __len__(self):
        return len(self.positions)

    def __repr__(self):
        return (
            f"VesselTree({len(self)} points, {len(self.branches)} branches, "
            f"{len(self.bifurcations)} bifurcations)"
        )

    def bifurcation_points(self):
        """Map point id -> child branch ids for every branching point."""
        out = {}
        for br in self.branches:
            if br.parent_branch is not None:
                out.setdefault(int(self.parent_of[br.point_ids[0]]), []).append(br.branch_id)
        return out

    def copy_with_positions(self, positions):
        return VesselTree(
            positions,
            self.radii.copy(),
            [Branch(b.branch_id, list(b.point_ids), b.parent_branch) for b in self.branches],
            [
                Bifurcation(f.point_id, list(f.child_branches), list(f.angles_deg), f.murray_residual_mm3, f.parent_branch)
                for f in self.bifurcations
            ],
            list(self.main_branches),
        )

    @classmethod
    def from_paths(cls, paths, radii, parents=None):
        """Build a tree from branch polylines.

        ``paths[k]`` holds the positions of branch ``k`` excluding its anchor
        point; ``parents[k]`` is the parent branch index or None. Each child is
        attached to the last point of its parent.
        """
        parents = parents or [None] * len(paths)
        pos, rad, branches = [], [], []
        n = 0
        for k, (p, r) in enumerate(zip(paths, radii)):
            p = np.asarray(p, dtype=float).reshape(-1, 3)
            r = np.broadcast_to(np.asarray(r, dtype=float), (len(p),))
            ids = list(range(n, n + len(p)))
            n += len(p)
            pos.append(p)
            rad.append(r)
            branches.append(Branch(k, ids, parents[k]))
        tree = cls(np.vstack(pos), np.concatenate(rad), branches)
        tree.bifurcations = [
            Bifurcation(pid, sorted(kids), parent_branch=int(tree.branch_of[pid]))
            for pid, kids in sorted(tree.bifurcation_points().items())
            if len(kids) >= 2
        ]
        return tree
