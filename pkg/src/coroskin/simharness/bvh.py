"""Axis-aligned bounding-box hierarchy over mesh triangles."""

import numpy as np

from ..errors import InputError

LEAF_SIZE = 4


def closest_points_on_triangles(p, a, b, c):
    """Closest point of each triangle (a, b, c) to each point p (row-wise)."""
    p, a, b, c = (np.asarray(x, dtype=float).reshape(-1, 3) for x in (p, a, b, c))
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = np.einsum("ij,ij->i", ab, ap), np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3, d4 = np.einsum("ij,ij->i", ab, bp), np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5, d6 = np.einsum("ij,ij->i", ab, cp), np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def put(mask, val):
        m = mask & ~done
        out[m] = val[m] if np.ndim(val) == 2 else val
        done[:] |= m

    with np.errstate(divide="ignore", invalid="ignore"):
        put((d1 <= 0) & (d2 <= 0), a)
        put((d3 >= 0) & (d4 <= d3), b)
        put((d6 >= 0) & (d5 <= d6), c)
        v = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        w = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v, w = vb * denom, vc * denom
        put(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


class BoundingHierarchy:
    """Binary AABB tree with fixed topology; ``refit`` recomputes the boxes.

    Built once by median splits of triangle centroids. After the mesh
    vertices change, the hierarchy is stale until :meth:`refit` is called
    with the new vertices.
    """

    def __init__(self, vertices, triangles, leaf_size=LEAF_SIZE):
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) == 0:
            raise InputError("cannot build a bounding hierarchy without triangles")
        V = np.asarray(vertices, dtype=float)
        cent = V[self.triangles].mean(axis=1)
        self.order = np.arange(len(self.triangles))
        left, right, start, count = [], [], [], []

        def build(lo, hi):
            node = len(left)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(hi - lo)
            if hi - lo <= leaf_size:
                return node
            idx = self.order[lo:hi]
            c = cent[idx]
            axis = int(np.argmax(np.ptp(c, axis=0)))
            mid = (hi - lo) // 2
            part = np.argpartition(c[:, axis], mid, kind="introselect")
            self.order[lo:hi] = idx[part]
            left[node] = build(lo, lo + mid)
            right[node] = build(lo + mid, hi)
            return node

        build(0, len(self.triangles))
        self.left = np.array(left)
        self.right = np.array(right)
        self.start = np.array(start)
        self.count = np.array(count)
        n = len(self.left)
        self.box_min = np.zeros((n, 3))
        self.box_max = np.zeros((n, 3))
        # children always have larger indices than their parent
        self._post = np.arange(n)[::-1]
        self.dirty = True
        self.vertices = None
        self.refit(V)

    @property
    def n_nodes(self):
        return len(self.left)

    def is_leaf(self, node):
        return self.left[node] < 0

    def mark_dirty(self):
        self.dirty = True

    def refit(self, vertices):
        V = np.asarray(vertices, dtype=float)
        P = V[self.triangles]
        tmin, tmax = P.min(axis=1), P.max(axis=1)
        for node in self._post:
            if self.left[node] < 0:
                ids = self.order[self.start[node] : self.start[node] + self.count[node]]
                self.box_min[node] = tmin[ids].min(axis=0)
                self.box_max[node] = tmax[ids].max(axis=0)
            else:
                l, r = self.left[node], self.right[node]
                self.box_min[node] = np.minimum(self.box_min[l], self.box_min[r])
                self.box_max[node] = np.maximum(self.box_max[l], self.box_max[r])
        self.vertices = V
        self.dirty = False
        return self

    def check(self):
        """Assert containment of every triangle in all ancestors and leaf partition."""
        P = self.vertices[self.triangles]
        tmin, tmax = P.min(axis=1), P.max(axis=1)
        seen = np.zeros(len(self.triangles), dtype=int)
        stack = [(0, [])]
        while stack:
            node, anc = stack.pop()
            anc = anc + [node]
            if self.left[node] < 0:
                ids = self.order[self.start[node] : self.start[node] + self.count[node]]
                seen[ids] += 1
                for a in anc:
                    if np.any(tmin[ids] < self.box_min[a]) or np.any(tmax[ids] > self.box_max[a]):
                        raise AssertionError(f"triangle box escapes ancestor node {a}")
            else:
                stack += [(self.left[node], anc), (self.right[node], anc)]
        if np.any(seen != 1):
            raise AssertionError("leaves do not partition the triangles")
        return True

    def query_sphere(self, center, radius):
        """Triangle ids whose boxes intersect the ball (conservative)."""
        c = np.asarray(center, dtype=float)
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            d = np.maximum(np.maximum(self.box_min[node] - c, 0.0), c - self.box_max[node])
            if d @ d > radius * radius:
                continue
            if self.left[node] < 0:
                out.append(self.order[self.start[node] : self.start[node] + self.count[node]])
            else:
                stack += [self.right[node], self.left[node]]
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
