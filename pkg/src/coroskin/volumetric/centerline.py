"""Fast-marching centerline extraction with steepest-descent backtracking."""

import heapq
import itertools
import logging
import math

import numpy as np
from scipy import ndimage

from ..errors import InputError
from .tree import Branch, Bifurcation, VesselTree

log = logging.getLogger(__name__)

_OFFSETS26 = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


class _Grid:
    """Flat indexing over a mask padded by one voxel of background."""

    def __init__(self, mask, spacing):
        self.mask = np.pad(np.asarray(mask) > 0, 1)
        self.shape = self.mask.shape
        self.spacing = np.asarray(spacing, dtype=float)
        nx, ny, nz = self.shape
        self.strides = (ny * nz, nz, 1)
        self.flat = self.mask.ravel()
        self.axis_nbrs = [
            (self.strides[a], self.spacing[a]) for a in range(3)
        ]
        self.nbrs26 = [
            (dx * self.strides[0] + dy * self.strides[1] + dz * self.strides[2],
             float(np.linalg.norm(np.array((dx, dy, dz)) * self.spacing)))
            for dx, dy, dz in _OFFSETS26
        ]

    def flat_index(self, ijk):
        i, j, k = (int(v) + 1 for v in ijk)
        return (i * self.shape[1] + j) * self.shape[2] + k

    def unflat(self, f):
        i, rem = divmod(int(f), self.strides[0])
        j, k = divmod(rem, self.strides[1])
        return (i - 1, j - 1, k - 1)

    def inside(self, ijk):
        ijk = tuple(int(v) for v in ijk)
        if any(v < 0 or v >= n - 2 for v, n in zip(ijk, self.shape)):
            return False
        return bool(self.flat[self.flat_index(ijk)])


def _solve_eikonal(tvals, hs, inv_f):
    """Upwind first-order update from the sorted known neighbour times."""
    pairs = sorted(zip(tvals, hs))
    a = b = c = 0.0
    t = math.inf
    for n, (ta, h) in enumerate(pairs):
        if ta == math.inf:
            break
        w = 1.0 / (h * h)
        a += w
        b -= 2.0 * ta * w
        c += ta * ta * w
        disc = b * b - 4.0 * a * (c - inv_f * inv_f)
        if disc < 0:
            break
        cand = (-b + math.sqrt(disc)) / (2.0 * a)
        if n + 1 < len(pairs) and cand > pairs[n + 1][0]:
            t = cand
            continue
        t = cand
        break
    return t


def fast_march(mask, spacing, seed, speed=None):
    """First-arrival times from ``seed`` over the mask (6-connected upwind FMM).

    ``speed`` is a positive array on the mask grid; defaults to 1. Voxels not
    reached keep ``inf``. Returns times shaped like ``mask``.
    """
    grid = _Grid(mask, spacing)
    if not grid.inside(seed):
        raise InputError(f"seed {tuple(int(v) for v in seed)} lies outside the mask")
    n = grid.flat.size
    T = np.full(n, math.inf)
    known = np.zeros(n, dtype=bool)
    if speed is None:
        inv_speed = np.ones(n)
    else:
        sp = np.pad(np.asarray(speed, dtype=float), 1, constant_values=1.0).ravel()
        inv_speed = 1.0 / sp
    tl = T.tolist()
    flat = grid.flat
    s0 = grid.flat_index(seed)
    tl[s0] = 0.0
    heap = [(0.0, s0)]
    axes = grid.axis_nbrs
    while heap:
        t, f = heapq.heappop(heap)
        if known[f]:
            continue
        known[f] = True
        for st, _ in axes:
            for g in (f - st, f + st):
                if known[g] or not flat[g]:
                    continue
                tv, hv = [], []
                for st2, h2 in axes:
                    tv.append(min(tl[g - st2] if known[g - st2] else math.inf,
                                  tl[g + st2] if known[g + st2] else math.inf))
                    hv.append(h2)
                cand = _solve_eikonal(tv, hv, inv_speed[g])
                if cand < tl[g]:
                    tl[g] = cand
                    heapq.heappush(heap, (cand, g))
    T = np.asarray(tl).reshape(grid.shape)[1:-1, 1:-1, 1:-1]
    return T


def medial_speed(mask, spacing):
    """Speed (1 + d)^2 with d the distance to background in voxels."""
    dist = ndimage.distance_transform_edt(np.asarray(mask) > 0)
    return (1.0 + dist) ** 2


def backtrack(times, mask, spacing, start):
    """Steepest descent on arrival times from ``start`` down to the seed.

    Returns voxel indices ordered from ``start`` to the seed (time 0).
    """
    grid = _Grid(mask, spacing)
    tl = np.pad(np.asarray(times, dtype=float), 1, constant_values=math.inf).ravel()
    f = grid.flat_index(start)
    if not grid.inside(start) or not math.isfinite(tl[f]):
        raise InputError(f"endpoint {tuple(int(v) for v in start)} is unreachable from the seed")
    path = [f]
    while tl[f] > 0.0:
        best, best_slope = None, 0.0
        for off, d in grid.nbrs26:
            g = f + off
            dt = tl[f] - tl[g]
            if dt > 0.0 and grid.flat[g]:
                slope = dt / d
                if slope > best_slope:
                    best, best_slope = g, slope
        if best is None:
            raise InputError(f"backtracking stalled at voxel {grid.unflat(f)}")
        f = best
        path.append(f)
    return [grid.unflat(p) for p in path]


class _Forest:
    """Incremental merge of backtracked paths into branches of voxel tuples."""

    def __init__(self):
        self.branches = []  # each: {"vox": [...], "parent": idx or None}
        self.where = {}

    def _reindex(self, b):
        for k, v in enumerate(self.branches[b]["vox"]):
            self.where[v] = (b, k)

    def _near(self, v):
        best = None
        for d in [(0, 0, 0)] + _OFFSETS26:
            w = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            hit = self.where.get(w)
            if hit is not None:
                key = (d[0] ** 2 + d[1] ** 2 + d[2] ** 2, hit)
                if best is None or key < best[0]:
                    best = (key, w)
        return None if best is None else best[1]

    def children(self, b):
        return [i for i, br in enumerate(self.branches) if br["parent"] == b]

    def add(self, path):
        """``path`` runs from an endpoint toward the seed."""
        if not self.branches:
            self.branches.append({"vox": list(reversed(path)), "parent": None})
            self._reindex(0)
            return True
        m = None
        for i, v in enumerate(path):
            if self._near(v) is not None:
                m = i
                break
        if m is None:
            raise InputError("backtracked path never met the existing tree")
        junction = self._near(path[m])
        new = path[:m] if junction == path[m] else path[: m + 1]
        if not new:
            return False
        new = list(reversed(new))
        b, j = self.where[junction]
        br = self.branches[b]
        if j == len(br["vox"]) - 1 and not self.children(b):
            br["vox"].extend(new)
            self._reindex(b)
            return True
        if j == 0 and br["parent"] is not None:
            parent = br["parent"]
        elif j == len(br["vox"]) - 1:
            parent = b
        else:
            tail = {"vox": br["vox"][j + 1:], "parent": b}
            br["vox"] = br["vox"][: j + 1]
            for c in self.children(b):
                self.branches[c]["parent"] = len(self.branches)
            self.branches.append(tail)
            self._reindex(len(self.branches) - 1)
            parent = b
        self.branches.append({"vox": new, "parent": parent})
        self._reindex(len(self.branches) - 1)
        return True


def _ordered(branches):
    """Depth-first order of branch records so parents precede children."""
    order = []
    roots = [i for i, b in enumerate(branches) if b["parent"] is None]
    stack = list(reversed(roots))
    while stack:
        i = stack.pop()
        order.append(i)
        kids = [k for k, b in enumerate(branches) if b["parent"] == i]
        stack.extend(reversed(kids))
    return order


def _forest_to_tree(forest, volume, radius_map):
    order = _ordered(forest.branches)
    remap = {old: new for new, old in enumerate(order)}
    pos, rad, branches = [], [], []
    n = 0
    for new_id, old in enumerate(order):
        vox = np.array(forest.branches[old]["vox"])
        pos.append(volume.index_to_mm(vox))
        rad.append(radius_map[tuple(vox.T)])
        parent = forest.branches[old]["parent"]
        branches.append(Branch(new_id, list(range(n, n + len(vox))), None if parent is None else remap[parent]))
        n += len(vox)
    tree = VesselTree(np.vstack(pos), np.concatenate(rad), branches)
    tree.bifurcations = [
        Bifurcation(pid, sorted(kids), parent_branch=int(tree.branch_of[pid]))
        for pid, kids in sorted(tree.bifurcation_points().items())
        if len(kids) >= 2
    ]
    return tree


def radius_map(mask, spacing):
    """Local lumen radius in mm from the Euclidean distance to background."""
    m = np.asarray(mask) > 0
    dist = ndimage.distance_transform_edt(m, sampling=spacing)
    half = 0.5 * min(spacing)
    return np.where(m, np.maximum(dist - half, half), 0.0)


def extract_centerline(mask, seed=None, endpoints=None, min_branch_mm=None):
    """Centerline tree of a binary mask volume.

    Arrival times are computed from ``seed`` with a speed that favours the
    medial axis; each endpoint is backtracked and merged into the forest where
    it comes within one voxel of an existing path. Missing ``seed`` or
    ``endpoints`` are found automatically (see :func:`find_endpoints`).
    """
    m = np.asarray(mask.values) > 0
    spacing = mask.spacing_mm
    if not m.any():
        raise InputError("mask is empty")
    if seed is None:
        tree = extract_centerline(mask, auto_seed(mask), endpoints, min_branch_mm)
        return _reroot_at_inlet(tree, mask)
    seed = tuple(int(v) for v in seed)
    T = fast_march(m, spacing, seed, medial_speed(m, spacing))
    rmap = radius_map(m, spacing)
    if endpoints is None:
        endpoints = _grow_endpoints(m, spacing, T, rmap, min_branch_mm, fast_march(m, spacing, seed))
    forest = _Forest()
    for e in endpoints:
        e = tuple(int(v) for v in e)
        if not _Grid(m, spacing).inside(e):
            raise InputError(f"endpoint {e} lies outside the mask")
        path = backtrack(T, m, spacing, e)
        if not forest.add(path):
            log.warning("endpoint %s already lies on the tree; skipped", e)
    if not forest.branches:
        forest.branches.append({"vox": [seed], "parent": None})
        forest._reindex(0)
    return _forest_to_tree(forest, mask, rmap)


def _reroot_at_inlet(tree, mask):
    """Re-extract from the tip of the thickest terminal branch (the inlet)."""
    root = tree.roots()[0]
    leaves = [b.branch_id for b in tree.branches if not tree.children(b.branch_id) and b.branch_id != root]
    if not leaves:
        return tree
    tips = {root: tree.branch_polyline(root, with_anchor=False)[0]}
    for b in leaves:
        tips[b] = tree.branch_polyline(b, with_anchor=False)[-1]
    thick = max(tips, key=lambda b: (float(np.mean(tree.branch_radii(b, with_anchor=False))), b == root))
    if thick == root:
        return tree
    to_ijk = lambda x: tuple(int(v) for v in np.round((x - mask.origin_mm) / mask.spacing_mm))  # noqa: E731
    others = [to_ijk(tips[b]) for b in sorted(tips) if b != thick]
    return extract_centerline(mask, to_ijk(tips[thick]), others)


def auto_seed(mask):
    """Tip voxel geodesically farthest from the thickest point of the mask."""
    m = np.asarray(mask.values) > 0
    dist = ndimage.distance_transform_edt(m)
    start = np.unravel_index(int(np.argmax(dist)), m.shape)
    T = fast_march(m, mask.spacing_mm, start)
    T = np.where(np.isfinite(T), T, -1.0)
    return tuple(int(v) for v in np.unravel_index(int(np.argmax(T)), m.shape))


def _grow_endpoints(m, spacing, T, rmap, min_branch_mm=None, dist=None):
    """Greedy farthest-uncovered endpoint search (TEASAR-style).

    Candidates are ranked by geodesic distance ``dist`` from the seed (``T``
    if not given); paths are backtracked through the medial arrival times ``T``.
    """
    spacing = np.asarray(spacing, dtype=float)
    geo = (T if dist is None else dist).copy()
    geo[~np.isfinite(geo)] = -1.0
    covered = ~m | (geo < 0)
    grid_idx = np.indices(m.shape)
    forest = _Forest()
    endpoints = []
    while True:
        cand_vals = np.where(covered, -1.0, geo)
        flat = int(np.argmax(cand_vals))
        if cand_vals.flat[flat] < 0:
            break
        e = np.unravel_index(flat, m.shape)
        path = backtrack(T, m, spacing, e)
        # length of the part that would be new
        new_len = 0.0
        if forest.branches:
            for a, b in zip(path[:-1], path[1:]):
                if forest._near(a) is not None:
                    break
                new_len += float(np.linalg.norm((np.array(a) - np.array(b)) * spacing))
            # widest lumen on the new part or at the junction; a stub near a
            # flat end sees a small junction radius but a wide path
            junction_r = max(float(rmap[path[-1]]), spacing.min())
            widest = 0.0
            for v in path:
                if forest._near(v) is not None:
                    junction_r = float(rmap[v])
                    break
                widest = max(widest, float(rmap[v]))
            junction_r = max(junction_r, widest)
        else:
            new_len = math.inf
            junction_r = 0.0
        limit = min_branch_mm if min_branch_mm is not None else 3.0 * junction_r + 2.0 * spacing.min()
        vox = np.array(path)
        log.debug("candidate branch: new %.2f mm, junction radius %.2f mm, limit %.2f mm", new_len, junction_r, limit)
        if new_len >= limit and forest.add(path):
            endpoints.append(tuple(int(v) for v in e))
        # mark a ball around every path voxel as covered
        for v in vox:
            r = 1.5 * float(rmap[tuple(v)]) + spacing.max()
            lo = np.maximum(((v * spacing - r) / spacing).astype(int), 0)
            hi = np.minimum(((v * spacing + r) / spacing).astype(int) + 2, m.shape)
            sl = tuple(slice(a, b) for a, b in zip(lo, hi))
            d2 = sum(((grid_idx[a][sl] - v[a]) * spacing[a]) ** 2 for a in range(3))
            covered[sl] |= d2 <= r * r
        covered[e] = True
    return endpoints


def find_endpoints(mask, seed, min_branch_mm=None):
    """Endpoints for :func:`extract_centerline` found by farthest-point growth."""
    m = np.asarray(mask.values) > 0
    T = fast_march(m, mask.spacing_mm, tuple(int(v) for v in seed), medial_speed(m, mask.spacing_mm))
    D = fast_march(m, mask.spacing_mm, tuple(int(v) for v in seed))
    return _grow_endpoints(m, mask.spacing_mm, T, radius_map(m, mask.spacing_mm), min_branch_mm, D)
