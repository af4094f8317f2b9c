"""Independent reference implementations used by the tests.

Each oracle is written from first principles with dense numpy / scipy calls
and shares no code with the package beyond its data containers.
"""

import itertools

import numpy as np
from scipy.optimize import lsq_linear
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


# --- linear FEM and bounded biharmonic weights ----------------------------------


def dense_stiffness_and_mass(nodes, tets):
    """Dense P1 stiffness matrix and lumped (volume / 4) mass vector."""
    n = len(nodes)
    K = np.zeros((n, n))
    m = np.zeros(n)
    for t in tets:
        p = nodes[t]
        # gradients of the barycentric hat functions: rows of inv(E)^T with a 4th from the sum
        E = np.array([p[1] - p[0], p[2] - p[0], p[3] - p[0]])
        vol = abs(np.linalg.det(E)) / 6.0
        G = np.linalg.inv(E)  # columns are the gradients of hats 1..3
        grads = np.vstack([-G.sum(axis=1), G.T])
        K[np.ix_(t, t)] += vol * grads @ grads.T
        m[t] += vol / 4.0
    return K, m


def dense_weights(nodes, tets, handles):
    """Unnormalized bounded biharmonic weights by bounded least squares.

    With Q = K M^-1 K = A^T A for A = M^-1/2 K, every per-handle box QP is the
    bounded least-squares problem min |A_f x + A_c w_c|^2, 0 <= x <= 1, solved
    exactly by the BVLS active-set method.
    """
    K, m = dense_stiffness_and_mass(nodes, tets)
    A = K / np.sqrt(m)[:, None]
    n = len(nodes)
    fixed = np.concatenate([np.asarray(h) for h in handles])
    free = np.setdiff1d(np.arange(n), fixed)
    W = np.zeros((n, len(handles)))
    for b, h in enumerate(handles):
        wc = np.concatenate([np.full(len(hh), 1.0 if k == b else 0.0) for k, hh in enumerate(handles)])
        res = lsq_linear(A[:, free], -A[:, fixed] @ wc, bounds=(0.0, 1.0), method="bvls", tol=1e-15, max_iter=10000)
        W[fixed, b] = wc
        W[free, b] = res.x
    return W, K, m


def kkt_violation(Q, g, x, lo=0.0, hi=1.0, tol=1e-10):
    """Largest KKT violation of min 1/2 x'Qx + g'x on [lo, hi]^n at ``x``."""
    grad = Q @ x + g
    at_lo = x <= lo + tol
    at_hi = x >= hi - tol
    inner = ~(at_lo | at_hi)
    worst = 0.0
    if inner.any():
        worst = max(worst, float(np.abs(grad[inner]).max()))
    if at_lo.any():
        worst = max(worst, float(np.maximum(-grad[at_lo], 0).max()))
    if at_hi.any():
        worst = max(worst, float(np.maximum(grad[at_hi], 0).max()))
    worst = max(worst, float(np.maximum(lo - x, 0).max()), float(np.maximum(x - hi, 0).max()))
    return worst


def enumerate_box_qp(Q, g, lo=0.0, hi=1.0):
    """Exact box QP by enumerating every (free, at-lower, at-upper) partition.

    Exponential; only for a handful of variables.
    """
    n = len(g)
    best, best_f = None, np.inf
    for labels in itertools.product((0, 1, 2), repeat=n):
        labels = np.array(labels)
        x = np.where(labels == 1, lo, np.where(labels == 2, hi, 0.0)).astype(float)
        f_ = labels == 0
        if f_.any():
            rhs = -(g[f_] + Q[np.ix_(f_, ~f_)] @ x[~f_])
            try:
                x[f_] = np.linalg.solve(Q[np.ix_(f_, f_)], rhs)
            except np.linalg.LinAlgError:
                continue
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            continue
        val = 0.5 * x @ Q @ x + g @ x
        if val < best_f - 1e-14:
            best, best_f = x, val
    return best


# --- distances and contacts -------------------------------------------------------


def brute_directed(a, b):
    """Per-point nearest distance from ``a`` to ``b`` by all pairs."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.array([np.sqrt(np.min(np.sum((b - p) ** 2, axis=1))) for p in a])


def brute_hausdorff(a, b):
    return max(brute_directed(a, b).max(), brute_directed(b, a).max())


def brute_msd(a, b):
    return float(brute_directed(a, b).mean())


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    q = a + t * ab
    return np.linalg.norm(p - q), q


def point_triangle(p, a, b, c):
    """Distance and closest point by plane projection plus edge fallback."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    q = p - np.dot(p - a, n) * n
    # barycentric coordinates of the projection by area ratios
    area = np.dot(np.cross(b - a, c - a), n)
    u = np.dot(np.cross(c - b, q - b), n) / area
    v = np.dot(np.cross(a - c, q - c), n) / area
    w = 1.0 - u - v
    if u >= 0 and v >= 0 and w >= 0:
        return abs(np.dot(p - a, n)), q
    best = min((_segment_distance(p, s, e) for s, e in ((a, b), (b, c), (c, a))), key=lambda x: x[0])
    return best


def _segment_distances(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    q = a + t[:, None] * ab
    return np.linalg.norm(p - q, axis=1), q


def brute_contacts(nodes, vertices, triangles, radius):
    """{(node, triangle): signed depth} for every pair within ``radius``.

    Same plane-projection plus edge-fallback rule as :func:`point_triangle`,
    evaluated against all triangles at once. Depth is positive when the node
    lies on the outward side of the triangle.
    """
    a, b, c = (vertices[triangles[:, k]] for k in range(3))
    n = np.cross(b - a, c - a)
    area2 = np.linalg.norm(n, axis=1)
    n = n / area2[:, None]
    out = {}
    for i, p in enumerate(np.asarray(nodes, float)):
        P = np.broadcast_to(p, a.shape)
        h = np.einsum("ij,ij->i", P - a, n)
        q = P - h[:, None] * n
        u = np.einsum("ij,ij->i", np.cross(c - b, q - b), n) / area2
        v = np.einsum("ij,ij->i", np.cross(a - c, q - c), n) / area2
        inside = (u >= 0) & (v >= 0) & (1 - u - v >= 0)
        cand = [_segment_distances(P, s, e) for s, e in ((a, b), (b, c), (c, a))]
        d_edge = np.stack([x[0] for x in cand])
        k = np.argmin(d_edge, axis=0)
        q_edge = np.stack([x[1] for x in cand])[k, np.arange(len(a))]
        d = np.where(inside, np.abs(h), d_edge.min(axis=0))
        q = np.where(inside[:, None], q, q_edge)
        side = np.einsum("ij,ij->i", P - q, n)
        for t in np.flatnonzero(d <= radius):
            out[(i, int(t))] = float(d[t]) if side[t] > 0 else -float(d[t])
    return out


# --- solid-angle inside test ------------------------------------------------------


def solid_angle_inside(points, vertices, triangles):
    """Inside flags from the generalized winding number (van Oosterom-Strackee)."""
    points = np.atleast_2d(points)
    tri = vertices[triangles]
    out = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        a, b, c = tri[:, 0] - p, tri[:, 1] - p, tri[:, 2] - p
        la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la + np.einsum("ij,ij->i", c, a) * lb
        w = np.sum(2.0 * np.arctan2(num, den)) / (4.0 * np.pi)
        out[i] = w > 0.5
    return out


# --- graphs -------------------------------------------------------------------------


def voxel_dijkstra_length(mask, spacing, a, b):
    """Shortest 26-connected path length (mm) between voxels ``a`` and ``b`` of ``mask``."""
    mask = np.asarray(mask, bool)
    spacing = np.asarray(spacing, float)
    idx = -np.ones(mask.shape, dtype=np.int64)
    on = np.argwhere(mask)
    idx[tuple(on.T)] = np.arange(len(on))
    rows, cols, vals = [], [], []
    for off in itertools.product((-1, 0, 1), repeat=3):
        if off == (0, 0, 0):
            continue
        nb = on + np.array(off)
        ok = np.all((nb >= 0) & (nb < mask.shape), axis=1)
        src, nb = np.flatnonzero(ok), nb[ok]
        hit = idx[tuple(nb.T)]
        keep = hit >= 0
        rows.append(src[keep])
        cols.append(hit[keep])
        vals.append(np.full(keep.sum(), np.linalg.norm(np.array(off) * spacing)))
    G = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(on), len(on))).tocsr()
    d = dijkstra(G, indices=int(idx[tuple(a)]))
    return float(d[int(idx[tuple(b)])])


def dense_laplacian(n, edges):
    """Combinatorial graph Laplacian D - A as a dense matrix."""
    A = np.zeros((n, n))
    for i, j in edges:
        if i != j:
            A[i, j] = A[j, i] = 1.0
    return np.diag(A.sum(axis=1)) - A


def dense_heat_step(L, v, lam):
    """One implicit step (I + L / lam) v' = v by dense solve."""
    return np.linalg.solve(np.eye(len(L)) + L / lam, v)


# --- Hessian of the smoothed Gaussian tube ------------------------------------------


def smoothed_tube_hessian_on_axis(width_mm, sigma_mm):
    """Scale-normalized Hessian eigenvalues on the axis of an infinite Gaussian tube.

    The profile exp(-r^2 / 2w^2) blurred by an isotropic Gaussian of width s is
    (w^2 / (w^2 + s^2)) exp(-r^2 / 2(w^2 + s^2)); its cross-axis second
    derivative at r = 0 is -w^2 / (w^2 + s^2)^2 and the axial one is zero.
    """
    s2 = width_mm**2 + sigma_mm**2
    cross = -(width_mm**2) / s2**2 * sigma_mm**2
    return np.array([0.0, cross, cross])


def finite_difference_hessian(f, x, h):
    """Central-difference Hessian of a scalar function at ``x``."""
    x = np.asarray(x, float)
    H = np.zeros((3, 3))
    e = np.eye(3) * h
    for i in range(3):
        for j in range(3):
            H[i, j] = (f(x + e[i] + e[j]) - f(x + e[i] - e[j]) - f(x - e[i] + e[j]) + f(x - e[i] - e[j])) / (4 * h * h)
    return H


# --- triangle-triangle intersection -------------------------------------------------


def _segment_hits_triangle(p, q, a, b, c, eps=1e-12):
    """Whether the closed segment pq crosses triangle abc (non-coplanar case)."""
    n = np.cross(b - a, c - a)
    dp, dq = np.dot(p - a, n), np.dot(q - a, n)
    if dp * dq > 0 or dp == dq:
        return False
    x = p + (dp / (dp - dq)) * (q - p)
    for u, v in ((a, b), (b, c), (c, a)):
        if np.dot(np.cross(v - u, x - u), n) < -eps * np.dot(n, n):
            return False
    return True


def triangles_intersect(t1, t2):
    """Brute-force test: some edge of one triangle pierces the other."""
    for s, o in ((t1, t2), (t2, t1)):
        for i in range(3):
            if _segment_hits_triangle(s[i], s[(i + 1) % 3], *o):
                return True
    return False


def self_intersections(vertices, triangles):
    """Pairs of vertex-disjoint triangles that intersect, by exhaustive checks."""
    tri = vertices[triangles]
    lo, hi = tri.min(axis=1), tri.max(axis=1)
    hits = []
    for i in range(len(tri)):
        near = np.flatnonzero(np.all(lo[i + 1:] <= hi[i], axis=1) & np.all(hi[i + 1:] >= lo[i], axis=1)) + i + 1
        for j in near:
            if set(triangles[i]) & set(triangles[j]):
                continue
            if triangles_intersect(tri[i], tri[j]):
                hits.append((i, int(j)))
    return hits


def parallel_transport_frames(points, n0):
    """Normals carried along a dense polyline by minimal rotations between tangents."""
    T = np.diff(points, axis=0)
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    out = [n0 - np.dot(n0, T[0]) * T[0]]
    out[0] /= np.linalg.norm(out[0])
    for t0, t1 in zip(T[:-1], T[1:]):
        axis = np.cross(t0, t1)
        s, c = np.linalg.norm(axis), np.dot(t0, t1)
        n = out[-1]
        if s > 1e-15:
            k = axis / s
            n = n * c + np.cross(k, n) * s + k * np.dot(k, n) * (1 - c)
        out.append(n / np.linalg.norm(n))
    return T, np.array(out)
