import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from coroskin.errors import ConfigError, ConstraintViolation, InputError
from coroskin.dynamics import (
    EnergyWeights,
    HeatSmoother,
    KeyPose,
    MechanicalConstraints,
    MotionSequence,
    Skeleton,
    build_skeleton,
    check_constraints,
    deform_cross_section,
    dirichlet_energy,
    generate_sequence,
    graph_laplacian,
    interpolate_pose,
    mesh_edges,
    regularize_velocity,
    sequence_energy,
)
from coroskin.geometry import CrossSection, Frame
from coroskin.phantoms import make_motion_keyposes
from conftest import tube_model
from oracles import dense_heat_step, dense_laplacian


def pose(k, R=None, t=None, sections=None, nb=2):
    R = np.tile(np.eye(3), (nb, 1, 1)) if R is None else R
    t = np.zeros((nb, 3)) if t is None else t
    return KeyPose(k, 5.0 * k, R, t, np.zeros((nb, 3)), sections)


# --- interpolation ----------------------------------------------------------------------


def test_interpolation_endpoints_are_exact(rng):
    R1 = Rotation.random(3, random_state=1).as_matrix()
    R2 = Rotation.random(3, random_state=2).as_matrix()
    p1 = KeyPose(0, 0.0, R1, rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), [[1.0, 1.0, 0.01]])
    p2 = KeyPose(1, 5.0, R2, rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), [[1.1, 1.1, -0.02]])
    for t, ref in ((0.0, p1), (1.0, p2)):
        out = interpolate_pose(p1, p2, t)
        assert np.array_equal(out.translations, ref.translations)
        assert np.array_equal(out.sections, ref.sections)
        assert np.abs(out.rotations - ref.rotations).max() <= 1e-12


def test_interpolation_midpoint():
    p1 = pose(0, t=np.zeros((1, 3)), nb=1)
    p2 = pose(1, t=np.array([[2.0, 4.0, 6.0]]), nb=1)
    assert np.array_equal(interpolate_pose(p1, p2, 0.5).translations[0], [1.0, 2.0, 3.0])


def test_rotation_interpolation_follows_shortest_arc():
    R2 = Rotation.from_rotvec([0, 0, np.radians(120)]).as_matrix()[None]
    mid = interpolate_pose(pose(0, nb=1), pose(1, R=R2, nb=1), 0.5).rotations[0]
    assert np.allclose(mid, Rotation.from_rotvec([0, 0, np.radians(60)]).as_matrix(), atol=1e-12)
    assert np.allclose(mid.T @ mid, np.eye(3), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.5, 2.0), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(0.0, 1.0))
def test_interpolated_sections_keep_area_law(a0, aspect, e1, e2, t):
    b0 = a0 * aspect
    s1 = [deform_cross_section((a0, b0), e1)[:3]]
    s2 = [deform_cross_section((a0, b0), e2)[:3]]
    a, b, e = interpolate_pose(pose(0, sections=s1), pose(1, sections=s2), t).sections[0]
    assert e == pytest.approx((1 - t) * e1 + t * e2, abs=1e-15)
    A0 = np.pi * a0 * b0
    assert abs(np.pi * a * b - A0 * (1 + e)) <= 1e-12 * A0 * (1 + e)
    assert a / b == pytest.approx(1 / aspect, rel=1e-12)


@pytest.mark.parametrize("t", [-0.1, 1.5])
def test_interpolation_parameter_out_of_range(t):
    with pytest.raises(InputError):
        interpolate_pose(pose(0), pose(1), t)


def test_interpolation_structure_mismatch():
    with pytest.raises(InputError):
        interpolate_pose(pose(0, nb=2), pose(1, nb=3), 0.5)


# --- cross-section deformation -------------------------------------------------------------


def _circle(r=1.0):
    f = Frame(np.zeros(3), np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    return CrossSection(f, r, r)


def test_zero_strain_keeps_area():
    a, b, e, clamped = deform_cross_section(_circle(1.0), 0.0)
    assert np.pi * a * b == np.pi and not clamped


def test_five_percent_strain():
    a, b, _, _ = deform_cross_section(_circle(1.0), 0.05)
    assert abs(a * b - 1.05) <= 1e-12


def test_strain_beyond_cap_is_clamped(caplog):
    a, b, e, clamped = deform_cross_section(_circle(1.0), 0.2, cap=0.05)
    assert clamped and e == 0.05
    assert abs(a * b - 1.05) <= 1e-12
    assert "clamped" in caplog.text


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-0.05, 0.05))
def test_area_law_and_aspect_ratio(a0, b0, eps):
    a, b, e, clamped = deform_cross_section((a0, b0), eps)
    A0 = np.pi * a0 * b0
    assert abs(np.pi * a * b - A0 * (1 + eps)) <= 1e-12 * A0 * (1 + eps)
    assert np.isclose(a / b, a0 / b0, rtol=1e-12)
    assert not clamped


def test_nonpositive_reference_area_rejected():
    with pytest.raises(InputError):
        deform_cross_section((1.0, 1.0), 0.0, area0=0.0)


# --- velocity regularization -----------------------------------------------------------------


@pytest.fixture(scope="module")
def tube_1k():
    _, surface, _, _ = tube_model(length=20.0, radius=1.5, h_min=0.3, h_max=0.45)
    return surface


def test_heat_step_matches_dense_solve(tube_1k, rng):
    n = tube_1k.n_vertices
    assert 900 <= n <= 1500
    e = mesh_edges(tube_1k.triangles)
    v = rng.normal(size=(n, 3))
    sm = HeatSmoother(graph_laplacian(n, e), 10.0)
    Ld = dense_laplacian(n, e)
    assert np.abs(sm.step(v) - dense_heat_step(Ld, v, 10.0)).max() <= 1e-8
    out, hist = sm.run(v)
    ref = v.copy()
    for _ in hist:
        ref = dense_heat_step(Ld, ref, 10.0)
    assert np.abs(out - ref).max() <= 1e-8


def test_uniform_velocity_is_unchanged(tube_1k):
    n = tube_1k.n_vertices
    sm = HeatSmoother(graph_laplacian(n, mesh_edges(tube_1k.triangles)), 10.0)
    v = np.tile([0.3, -1.0, 2.0], (n, 1))
    assert np.allclose(sm.step(v), v, rtol=0, atol=1e-13)


def test_spike_energy_strictly_decreases(tube_1k):
    n = tube_1k.n_vertices
    L = graph_laplacian(n, mesh_edges(tube_1k.triangles))
    v = np.zeros(n)
    v[n // 2] = 1.0
    assert dirichlet_energy(L, HeatSmoother(L, 10.0).step(v)) < dirichlet_energy(L, v)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_heat_step_never_raises_energy(seed, lam):
    _, surface, _, _ = SMALL
    n = surface.n_vertices
    L = graph_laplacian(n, mesh_edges(surface.triangles))
    v = np.random.default_rng(seed).normal(size=(n, 2))
    assert dirichlet_energy(L, HeatSmoother(L, lam).step(v)) <= dirichlet_energy(L, v) * (1 + 1e-12)


SMALL = tube_model()


def test_isolated_vertex_rejected():
    with pytest.raises(InputError):
        graph_laplacian(4, [(0, 1), (1, 2)])


def test_bad_lambda_rejected():
    with pytest.raises((InputError, ConfigError)):
        HeatSmoother(graph_laplacian(3, [(0, 1), (1, 2)]), 0.0)


# --- constraint checks ----------------------------------------------------------------------


def two_handle_sequence(R1=None, sections=None, frames=2):
    """Two chords along z joined at the origin plane z = 1; handle 1 optionally rotated."""
    skel = Skeleton([[0, 0, 0], [0, 0, 1]], [[0, 0, 1], [0, 0, 2]], [(0, 1)])
    R = np.tile(np.eye(3), (frames, 2, 1, 1))
    if R1 is not None:
        R[:, 1] = R1
    piv = np.tile([[0, 0, 0.5], [0, 0, 1.0]], (frames, 1, 1))
    P = np.zeros((frames, 2, 3))
    secs = None if sections is None else np.tile(sections, (frames, 1, 1))
    seq = MotionSequence(P, np.arange(frames) / frames, P[0].copy(), np.array([[0, 1]]),
                         rotations=R, translations=np.zeros((frames, 2, 3)), pivots=piv, sections=secs)
    return seq, skel


def test_static_straight_sequence_has_no_violations():
    seq, skel = two_handle_sequence()
    rep = check_constraints(seq, MechanicalConstraints(delta_max_mm=1.0), skel)
    assert rep.violations == [] and rep.periodicity_gap_mm == 0.0
    assert np.all(rep.max_bend_deg == 0.0)


def test_bend_beyond_limit_is_reported_at_the_joint():
    R = Rotation.from_rotvec([np.radians(100), 0, 0]).as_matrix()
    seq, skel = two_handle_sequence(R1=R, frames=1)
    rep = check_constraints(seq, MechanicalConstraints(theta_max_deg=90.0, delta_max_mm=1.0), skel)
    bends = [v for v in rep.violations if v.kind == "bend_angle"]
    assert len(bends) == 1
    assert bends[0].location == "joint (0, 1)" and bends[0].frame == 0
    assert np.isclose(bends[0].value, 100.0)


def test_strain_and_stress_reported():
    seq, skel = two_handle_sequence(sections=[[1.04, 1.04, 0.08]], frames=1)
    rep = check_constraints(seq, MechanicalConstraints(eps_max=0.05, youngs_modulus_mpa=1.5, delta_max_mm=1.0), skel)
    assert np.isclose(rep.max_stress_mpa[0], 0.12, rtol=0, atol=1e-15)
    assert [v.kind for v in rep.violations] == ["strain"]


def test_periodicity_gap_is_reported():
    seq, skel = two_handle_sequence()
    seq.closing_frame = seq.closing_frame + 1e-6
    rep = check_constraints(seq, MechanicalConstraints(delta_max_mm=1.0), skel)
    assert np.isclose(rep.periodicity_gap_mm, 1e-6)
    assert any(v.kind == "periodicity" for v in rep.violations)


def test_invalid_constraint_field_named():
    with pytest.raises(ConfigError, match="theta_max_deg"):
        MechanicalConstraints(theta_max_deg=-1.0).validate()


# --- energies ---------------------------------------------------------------------------------


def test_identical_frames_have_zero_temporal_energy(rng):
    P = np.repeat(rng.normal(size=(1, 10, 3)), 4, axis=0)
    e = mesh_edges(np.array([[i, (i + 1) % 10, (i + 2) % 10] for i in range(10)]))
    assert sequence_energy(P, edges=e)[0] == 0.0


def test_unit_displacement_temporal_energy():
    P = np.zeros((2, 7, 3))
    P[1, :, 0] = 1.0
    e = np.array([[i, (i + 1) % 7] for i in range(7)])
    assert sequence_energy(P, edges=e)[0] == 7.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.tuples(*[st.floats(-100, 100)] * 3))
def test_spatial_energy_translation_invariant(seed, d):
    r = np.random.default_rng(seed)
    P = r.normal(size=(1, 12, 3))
    e = np.array([[i, (i + 1) % 12] for i in range(12)] + [[0, 6]])
    a = sequence_energy(np.concatenate([P, P]), edges=e)[1]
    b = sequence_energy(np.concatenate([P, P + np.array(d)]), edges=e)[1]
    assert np.isclose(a, b, rtol=1e-9, atol=1e-9)


def test_total_energy_weights():
    P = np.zeros((2, 3, 3))
    P[1, 0] = [1, 0, 0]
    e = np.array([[0, 1], [1, 2], [2, 0]])
    et, es, tot = sequence_energy(P, EnergyWeights(2.0, 0.5), e)
    assert tot == 2.0 * et + 0.5 * es and tot >= 0


# --- sequence synthesis ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def y_sequence(y_model):
    tree, surface, tm, handles, W = y_model
    rest = np.concatenate([p.ring_ab for p in surface.paths])
    kp = make_motion_keyposes(tree, "bend_cycle", 20, handles=handles, rest_sections=rest)
    skel = build_skeleton(tm, handles, tree)
    return kp, generate_sequence(kp, 2, surface, W, skeleton=skel), (surface, W, skel)


def test_forty_frames_and_key_pose_exactness(y_sequence):
    kp, seq, (surface, W, _) = y_sequence
    assert seq.n_frames == 40
    assert np.array_equal(seq.key_frame_indices, np.arange(0, 40, 2))
    from coroskin.dynamics import posed_vertices

    for k, f in enumerate(seq.key_frame_indices):
        assert np.abs(seq.frames[f] - posed_vertices(kp[k], surface, W)).max() <= 1e-12
        assert np.array_equal(seq.translations[f], kp[k].translations)
        assert np.array_equal(seq.sections[f], kp[k].sections)


def test_sequence_is_periodic(y_sequence):
    _, seq, _ = y_sequence
    assert seq.periodicity_gap() <= 1e-9
    assert seq.report.periodicity_gap_mm <= 1e-9


def test_smoothing_history_is_energy_monotone(y_sequence):
    _, seq, _ = y_sequence
    energies = [e for _, e in seq.smoothing_history]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(energies[:-1], energies[1:]))


def test_default_motion_is_within_limits(y_sequence):
    _, seq, _ = y_sequence
    assert seq.report.violations == []


def test_breathing_areas_follow_strain(y_model):
    tree, surface, tm, handles, W = y_model
    rest = np.concatenate([p.ring_ab for p in surface.paths])
    kp = make_motion_keyposes(tree, "breathe", 20, handles=handles, rest_sections=rest)
    seq = generate_sequence(kp, 1, surface, W, regularize=False)
    a, b, e = np.moveaxis(seq.sections, 2, 0)
    A0 = np.pi * rest[:, 0] * rest[:, 1]
    rel = np.abs(np.pi * a * b - A0 * (1 + e)) / (A0 * (1 + e))
    assert rel.max() <= 1e-12
    assert np.abs(e).max() <= 0.05 + 1e-15


def test_identical_key_poses_give_identical_frames(y_model):
    tree, surface, tm, handles, W = y_model
    kp = make_motion_keyposes(tree, "rigid_translate", 20, amplitude=0.0, handles=handles)
    seq = generate_sequence(kp, 2, surface, W)
    assert np.all(seq.frames == seq.frames[0])
    assert seq.energies["E_temp"] == 0.0


def test_delta_enforcement_bounds_displacement(y_model):
    tree, surface, tm, handles, W = y_model
    kp = make_motion_keyposes(tree, "rigid_translate", 4, amplitude=3.0, handles=handles)
    mc = MechanicalConstraints(delta_max_mm=0.5, enforce_delta=True)
    seq = generate_sequence(kp, 1, surface, W, mc)
    assert seq.report.max_displacement_mm.max() <= 0.5
    assert seq.n_frames > 4
    loose = generate_sequence(kp, 1, surface, W, MechanicalConstraints(delta_max_mm=0.5))
    assert loose.report.max_displacement_mm.max() > 0.5
    assert any(v.kind == "displacement" for v in loose.report.violations)


def test_strict_mode_raises_on_violation(y_model):
    tree, surface, tm, handles, W = y_model
    kp = make_motion_keyposes(tree, "rigid_translate", 4, amplitude=3.0, handles=handles)
    with pytest.raises(ConstraintViolation):
        generate_sequence(kp, 1, surface, W, MechanicalConstraints(delta_max_mm=0.5, strict=True))


def test_regularize_keeps_key_frames(y_sequence):
    _, seq, _ = y_sequence
    again = regularize_velocity(seq)
    keys = seq.key_frame_indices
    assert np.array_equal(again.frames[keys], seq.frames[keys])


def test_too_few_key_poses():
    _, surface, tm, handles = SMALL
    with pytest.raises(InputError):
        generate_sequence([pose(0, nb=len(handles))], 2, surface, np.ones((surface.n_vertices, len(handles))) / len(handles))

