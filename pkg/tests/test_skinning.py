import time

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from coroskin.errors import InputError, NumericalError
from coroskin.geometry import TetMesh
from coroskin.phantoms import PhantomSpec, make_phantom
from coroskin.skinning import (
    BoxQP,
    HandleSet,
    apply_skinning,
    bilaplacian,
    build_handles,
    handle_constraints,
    lumped_mass,
    nearest_handle,
    normalize_weights,
    solve_weights,
    stiffness_matrix,
)
from coroskin.geometry import tetrahedralize
from conftest import oracle_cases, tube_model
from oracles import dense_stiffness_and_mass, dense_weights, enumerate_box_qp, kkt_violation


def rotation(axis, deg):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    a = np.radians(deg)
    return np.eye(3) + np.sin(a) * K + (1 - np.cos(a)) * K @ K


CASES = oracle_cases()


# --- FEM assembly -----------------------------------------------------------------


def test_stiffness_and_mass_match_dense_assembly(small_tube):
    _, _, tm, _ = small_tube
    K, m = dense_stiffness_and_mass(tm.nodes, tm.tets)
    assert np.abs(stiffness_matrix(tm.nodes, tm.tets).toarray() - K).max() <= 1e-12 * np.abs(K).max()
    assert np.allclose(lumped_mass(tm.nodes, tm.tets), m, rtol=1e-13)
    assert np.isclose(m.sum(), tm.volumes().sum())


def test_stiffness_annihilates_constants(small_tube):
    _, _, tm, _ = small_tube
    K = stiffness_matrix(tm.nodes, tm.tets)
    assert np.abs(K @ np.ones(tm.n_nodes)).max() <= 1e-12
    Q, _, _ = bilaplacian(tm.nodes, tm.tets)
    assert abs(Q - Q.T).max() == 0.0


# --- box QP --------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_box_qp_matches_enumeration(n, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n))
    Q = A @ A.T + 0.1 * np.eye(n)
    g = r.normal(size=n) * 3.0
    out = BoxQP(sp.csr_matrix(Q)).solve(g)
    ref = enumerate_box_qp(Q, g)
    assert np.abs(out.x - ref).max() <= 1e-8
    assert kkt_violation(Q, g, out.x) <= 1e-8 * max(1.0, np.abs(g).max())


# --- weights vs dense oracle ------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(CASES))
def test_weights_match_dense_bounded_least_squares(name):
    tm, handles = CASES[name]
    assert tm.n_nodes <= 300
    t0 = time.perf_counter()
    W = solve_weights(tm, handles, normalize=False)
    elapsed = time.perf_counter() - t0
    ref, _, _ = dense_weights(tm.nodes, tm.tets, handles.handles)
    assert np.abs(W.values - ref).max() <= 1e-6
    assert elapsed < 5.0


def test_single_handle_gives_all_ones(small_tube):
    _, _, tm, _ = small_tube
    one = HandleSet([tm.centerline_node_ids], [tm.nodes[tm.centerline_node_ids].mean(axis=0)], [0])
    W = solve_weights(tm, one)
    assert np.all(W.values == 1.0)


def test_mirror_symmetric_midplane_is_half(mirror_tube):
    tm, handles = mirror_tube
    W = solve_weights(tm, handles)
    z = tm.nodes[:, 2]
    mid = tm.wall_node_ids[np.abs(z[tm.wall_node_ids] - 5.0) < 1e-12]
    assert mid.size >= 8
    assert np.abs(W.values[mid] - 0.5).max() <= 1e-6


@pytest.mark.parametrize("kind", ["straight_tube", "bent_tube", "y_branch", "helix", "torus_arc"])
def test_weight_invariants_on_phantoms(kind, y_model):
    if kind == "y_branch":
        _, _, tm, handles, W = y_model
    else:
        ph = make_phantom(PhantomSpec(kind))
        tm = tetrahedralize(ph.surface, ph.tree)
        handles = build_handles(tm, 5.0)
        W = solve_weights(tm, handles)
    v = W.values
    assert np.abs(v.sum(axis=1) - 1.0).max() <= 1e-9
    assert v.min() >= -1e-9 and v.max() <= 1.0 + 1e-9
    fixed, cvals = handle_constraints(tm, handles)
    assert np.array_equal(v[fixed], cvals)
    assert max(W.kkt_residuals) <= 1e-8


def test_locality_argmax_is_nearest_handle():
    _, _, tm, handles = tube_model(length=12.0, h_min=0.4, h_max=0.6)
    assert len(handles) == 3
    W = solve_weights(tm, handles)
    near = nearest_handle(tm, handles)
    assert np.array_equal(np.argmax(W.values, axis=1), near)


def test_disconnected_component_is_singular(small_tube):
    _, _, tm, handles = small_tube
    n = tm.n_nodes
    two = TetMesh(
        np.vstack([tm.nodes, tm.nodes + [10.0, 0, 0]]),
        np.vstack([tm.tets, tm.tets + n]),
        np.concatenate([tm.wall_node_ids, tm.wall_node_ids + n]),
        np.concatenate([tm.centerline_node_ids, tm.centerline_node_ids + n]),
    )
    with pytest.raises(NumericalError):
        solve_weights(two, handles)


def test_overlapping_handles_rejected(small_tube):
    _, _, tm, handles = small_tube
    h = handles.handles
    bad = HandleSet([h[0], np.concatenate([h[1], h[0][:1]])], handles.pivots[:2], [0, 0])
    with pytest.raises(InputError):
        solve_weights(tm, bad)


# --- normalization ---------------------------------------------------------------------


def test_normalize_examples(caplog):
    W = normalize_weights(np.array([[0.2, 0.2, 0.6], [2.0, 2.0, 4.0], [0.0, 0.0, 0.0]]), nearest=np.array([0, 0, 2]))
    assert np.allclose(W.values[0], [0.2, 0.2, 0.6], rtol=0, atol=1e-15)
    assert np.array_equal(W.values[1], [0.25, 0.25, 0.5])
    assert np.array_equal(W.values[2], [0.0, 0.0, 1.0])
    assert W.fallback_rows.tolist() == [2]
    assert "sum to zero" in caplog.text


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_normalized_rows_sum_to_one(n, nb, seed):
    v = np.random.default_rng(seed).random((n, nb)) * 5.0
    W = normalize_weights(v, nearest=np.zeros(n, dtype=int))
    assert np.abs(W.values.sum(axis=1) - 1.0).max() <= 1e-12


def test_non_finite_weights_rejected():
    with pytest.raises(InputError):
        normalize_weights(np.array([[np.nan, 1.0]]))


# --- linear blend ------------------------------------------------------------------------


def test_identity_transforms_leave_vertices(y_model):
    _, surface, _, handles, W = y_model
    nb = len(handles)
    out = apply_skinning(surface, W, np.tile(np.eye(3), (nb, 1, 1)), np.zeros((nb, 3)))
    assert np.abs(out.vertices - surface.vertices).max() == 0.0
    assert np.array_equal(out.triangles, surface.triangles)


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(-50, 50)] * 3))
def test_common_translation_is_exact(d):
    tm, handles = CASES["tube_3_handles"]
    W = solve_weights(tm, handles)
    verts = tm.nodes[tm.wall_node_ids]
    Wr = W.values[tm.wall_node_ids]
    nb = len(handles)
    d = np.array(d)
    out = apply_skinning(verts, Wr, np.tile(np.eye(3), (nb, 1, 1)), np.tile(d, (nb, 1)))
    scale = max(1.0, np.abs(verts).max() + np.abs(d).max())
    assert np.abs(out - (verts + d)).max() <= 8 * np.finfo(float).eps * scale


def test_single_term_blend_is_exact_rotation():
    R = rotation([1, 2, 3], 37.0)
    v = np.array([[0.3, -1.2, 2.5]])
    Rs = np.stack([np.eye(3), R])
    out = apply_skinning(v, np.array([[0.0, 1.0]]), Rs, np.zeros((2, 3)))
    assert np.allclose(out[0], R @ v[0], rtol=0, atol=1e-15)


def test_blend_dimension_mismatch(small_tube):
    _, surface, tm, handles = small_tube
    W = solve_weights(tm, handles)
    with pytest.raises(InputError):
        apply_skinning(surface, W, np.tile(np.eye(3), (2, 1, 1)), np.zeros((2, 3)))
    with pytest.raises(InputError):
        apply_skinning(surface, W.values[:3], np.tile(np.eye(3), (3, 1, 1)), np.zeros((3, 3)))
