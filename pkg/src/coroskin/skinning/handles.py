"""Handles: centerline segments acting as rigid bones."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from ..errors import InputError


@dataclass
class HandleSet:
    handles: list  # per handle: array of centerline node ids
    pivots: np.ndarray  # (nb, 3) rest-pose centre of each handle
    branch_ids: np.ndarray  # (nb,) branch each handle lies on
    arc_ranges: np.ndarray = None  # (nb, 2) arc interval within the branch

    def __post_init__(self):
        self.handles = [np.asarray(h, dtype=np.int64) for h in self.handles]
        self.pivots = np.asarray(self.pivots, dtype=float).reshape(-1, 3)
        self.branch_ids = np.asarray(self.branch_ids, dtype=np.int64)

    def __len__(self):
        return len(self.handles)

    def validate(self, n_nodes=None):
        if not self.handles:
            raise InputError("handle set is empty")
        allids = np.concatenate(self.handles)
        for b, h in enumerate(self.handles):
            if h.size == 0:
                raise InputError(f"handle {b} has no centerline nodes")
        if np.unique(allids).size != allids.size:
            raise InputError("handle node sets overlap")
        if n_nodes is not None and (allids.min() < 0 or allids.max() >= n_nodes):
            raise InputError(f"handle node ids must lie in [0, {n_nodes})")
        return self

    def node_handle(self, n_nodes):
        """Handle index per node (-1 for unconstrained nodes)."""
        out = np.full(n_nodes, -1, dtype=np.int64)
        for b, h in enumerate(self.handles):
            out[h] = b
        return out


def build_handles(tetmesh, segment_mm=5.0):
    """Split every branch's centerline nodes into segments of about ``segment_mm``."""
    if not segment_mm > 0:
        raise InputError(f"handle segment length must be > 0, got {segment_mm}")
    cl = tetmesh.centerline_node_ids
    br = tetmesh.centerline_branch
    arc = tetmesh.centerline_arc
    if br is None or arc is None:
        br = np.zeros(len(cl), dtype=np.int64)
        arc = np.linalg.norm(tetmesh.nodes[cl] - tetmesh.nodes[cl[0]], axis=1)
    handles, pivots, bids, ranges = [], [], [], []
    for b in np.unique(br):
        sel = np.flatnonzero(br == b)
        s = arc[sel]
        lo, hi = float(s.min()), float(s.max())
        n = max(1, int(round((hi - lo) / segment_mm)))
        edges = np.linspace(lo, hi, n + 1)
        seg = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, n - 1)
        for k in range(n):
            ids = cl[sel[seg == k]]
            if ids.size == 0:
                continue
            handles.append(np.sort(ids))
            pivots.append(tetmesh.nodes[ids].mean(axis=0))
            bids.append(int(b))
            ranges.append((edges[k], edges[k + 1]))
    return HandleSet(handles, np.array(pivots), np.array(bids), np.array(ranges)).validate(tetmesh.n_nodes)


def edge_graph(tetmesh):
    e = tetmesh.edges()
    w = np.linalg.norm(tetmesh.nodes[e[:, 0]] - tetmesh.nodes[e[:, 1]], axis=1)
    n = tetmesh.n_nodes
    return sp.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()


def nearest_handle(tetmesh, handles):
    """Geodesically (mesh-edge) nearest handle of every node; -1 if unreachable."""
    sources = np.concatenate(handles.handles)
    owner = handles.node_handle(tetmesh.n_nodes)
    dist, _, src = dijkstra(edge_graph(tetmesh), directed=False, indices=sources, min_only=True, return_predecessors=True)
    out = np.where(src >= 0, owner[np.maximum(src, 0)], -1)
    return out
