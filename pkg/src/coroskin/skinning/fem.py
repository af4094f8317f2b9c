"""Linear tetrahedral finite elements: stiffness, lumped mass, bi-Laplacian."""

import numpy as np
import scipy.sparse as sp

from ..errors import MeshError


def barycentric_gradients(nodes, tets):
    """Per-tet gradients of the four hat functions, shape (T, 4, 3), and volumes."""
    p = np.asarray(nodes)[np.asarray(tets)]
    J = p[:, 1:] - p[:, :1]  # rows are edge vectors from node 0
    vol = np.linalg.det(J) / 6.0
    if np.any(vol <= 0):
        raise MeshError(f"{int(np.sum(vol <= 0))} tetrahedra have non-positive volume")
    G = np.linalg.inv(J)  # columns are gradients of lambda_1..3
    g = np.empty((len(p), 4, 3))
    g[:, 1:] = np.transpose(G, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g, vol


def stiffness_matrix(nodes, tets):
    """Symmetric positive semidefinite P1 stiffness (cotangent-weight Laplacian in 3-D)."""
    g, vol = barycentric_gradients(nodes, tets)
    ke = np.einsum("tik,tjk->tij", g, g) * vol[:, None, None]
    tets = np.asarray(tets)
    rows = np.repeat(tets, 4, axis=1).ravel()
    cols = np.tile(tets, (1, 4)).ravel()
    n = len(nodes)
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return ((K + K.T) * 0.5).tocsr()


def lumped_mass(nodes, tets):
    """Diagonal of the row-sum lumped mass matrix (a quarter of each tet volume per node)."""
    _, vol = barycentric_gradients(nodes, tets)
    m = np.zeros(len(nodes))
    np.add.at(m, np.asarray(tets).ravel(), np.repeat(vol / 4.0, 4))
    return m


def bilaplacian(nodes, tets):
    """K M^-1 K with lumped M, plus K and the mass diagonal."""
    K = stiffness_matrix(nodes, tets)
    m = lumped_mass(nodes, tets)
    if np.any(m <= 0):
        raise MeshError(f"{int(np.sum(m <= 0))} node(s) are not used by any tetrahedron")
    Q = (K @ sp.diags(1.0 / m) @ K).tocsr()
    return ((Q + Q.T) * 0.5).tocsr(), K, m
