import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coroskin.errors import InputError, MeshError
from coroskin.geometry import (
    MeshSizingParams,
    build_cross_sections,
    check_surface,
    check_tetmesh,
    frame_rotation_deg,
    local_mesh_size,
    loft_surface,
    tetrahedralize,
)
from coroskin.phantoms import PhantomSpec, make_phantom
from coroskin.volumetric import VesselTree
from conftest import straight_tree, tube_model
from oracles import parallel_transport_frames, self_intersections

# --- sizing ---------------------------------------------------------------------


def test_mesh_size_flat_is_h_max():
    assert local_mesh_size(0.0, MeshSizingParams(0.1, 0.5, 1.0)) == 0.5


def test_mesh_size_high_curvature_is_h_min():
    assert abs(local_mesh_size(1e6, MeshSizingParams(0.1, 0.5, 1.0)) - 0.1) <= 1e-9


def test_mesh_size_closed_form():
    h = local_mesh_size(1.0, MeshSizingParams(0.1, 0.5, 1.0))
    assert np.isclose(h, 0.1 + 0.4 * np.exp(-1.0), rtol=0, atol=1e-15)
    assert round(h, 5) == 0.24715


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.01, 1.0),
    st.floats(0.0, 2.0),
    st.floats(0.01, 5.0),
    st.lists(st.floats(0.0, 1e3), min_size=2, max_size=20),
)
def test_mesh_size_monotone_and_bounded(h_min, extra, alpha, kappas):
    p = MeshSizingParams(h_min, h_min + extra, alpha)
    k = np.sort(np.array(kappas))
    h = local_mesh_size(k, p)
    assert np.all(np.diff(h) <= 1e-15)
    assert np.all(h >= p.h_min_mm - 1e-15) and np.all(h <= p.h_max_mm + 1e-15)


def test_negative_curvature_rejected():
    with pytest.raises(InputError):
        local_mesh_size(-1.0, MeshSizingParams())


def test_sizing_validation_names_field():
    with pytest.raises(InputError, match="h_min_mm"):
        MeshSizingParams(1.0, 0.5).validate()


# --- cross-sections -----------------------------------------------------------------


def _all_frames(sections):
    return [s.frame for path in sections for s in path]


def test_straight_sections_are_circles_in_z_planes():
    secs = build_cross_sections(straight_tree(10.0, 1.0), 2.0)
    for s in secs[0]:
        pts = s.sample(16)
        assert np.allclose(pts[:, 2], s.frame.origin[2], atol=1e-12)
        assert np.allclose(np.linalg.norm(pts[:, :2], axis=1), 1.0, atol=1e-12)
        assert np.allclose(np.abs(s.frame.tangent), [0, 0, 1], atol=1e-12)


def test_planar_arc_binormal_is_constant():
    th = np.linspace(0, np.pi / 2, 60)
    pts = np.column_stack([8 * np.cos(th), 8 * np.sin(th), np.zeros_like(th)])
    secs = build_cross_sections(VesselTree.from_paths([pts], [1.0]), 4.0)[0]
    B = np.array([s.frame.binormal for s in secs])
    assert np.allclose(np.abs(B[:, 2]), 1.0, atol=1e-6)
    assert np.allclose(B, B[0], atol=1e-6)


def test_helix_frames_twist_below_30_degrees():
    tree = make_phantom(PhantomSpec("helix")).tree
    secs = build_cross_sections(tree, 4.0)
    for path in secs:
        rot = [frame_rotation_deg(a.frame, b.frame) for a, b in zip(path[:-1], path[1:])]
        assert max(rot) < 30.0
        # dense parallel transport along the same samples gives the twist-free reference
        x = np.array([s.frame.origin for s in path])
        dense = np.vstack([np.linspace(x[i], x[i + 1], 50, endpoint=False) for i in range(len(x) - 1)] + [x[-1:]])
        T, N = parallel_transport_frames(dense, path[0].frame.normal)
        turn = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", T[:-1], T[1:]), -1, 1)))
        # a consecutive frame rotation can exceed the tangent turn only by the normal snap
        per_section = np.add.reduceat(turn, np.arange(0, len(turn), 50))
        assert max(rot) <= per_section.max() + 15.0 + 1e-6
        assert np.all(np.isfinite(N))


@pytest.mark.parametrize("kind", ["straight_tube", "bent_tube", "y_branch", "helix", "torus_arc"])
def test_frames_orthonormal_and_forward(kind):
    tree = make_phantom(PhantomSpec(kind)).tree
    for path in build_cross_sections(tree, 2.0):
        for s0, s1 in zip(path[:-1], path[1:]):
            M = s0.frame.matrix
            assert np.allclose(M.T @ M, np.eye(3), atol=1e-9)
            assert np.dot(s0.frame.tangent, s1.frame.origin - s0.frame.origin) > 0


def test_coincident_points_rejected():
    pts = np.array([[0, 0, 0], [0, 0, 0], [0, 0, 0.0]])
    with pytest.raises(InputError):
        build_cross_sections(VesselTree.from_paths([pts], [1.0]), 2.0)


# --- lofting --------------------------------------------------------------------


def test_straight_tube_lateral_area():
    tree, surface, tm, handles = tube_model(h_min=0.1, h_max=0.2)
    check_surface(surface)
    assert surface.euler_characteristic() == 2
    caps = set()
    for p in surface.paths:
        caps |= {p.start_cap, p.end_cap}
    lateral = [k for k, t in enumerate(surface.triangles) if not caps & set(t.tolist())]
    area = surface.areas()[lateral].sum()
    assert abs(area - 2 * np.pi * 10) <= 0.02 * 2 * np.pi * 10


def test_quarter_torus_has_no_self_intersections():
    ph = make_phantom(PhantomSpec("torus_arc", radius_mm=1.0, length_mm=12.0))
    check_surface(ph.surface)
    assert self_intersections(ph.surface.vertices, ph.surface.triangles) == []


def test_y_branch_surface_is_manifold(y_phantom):
    check_surface(y_phantom.surface)
    assert y_phantom.surface.euler_characteristic() == 2
    assert self_intersections(y_phantom.surface.vertices, y_phantom.surface.triangles) == []


def test_two_point_centerline_coarse_sizing():
    tree = VesselTree.from_paths([np.array([[0, 0, 0], [0, 0, 2.0]])], [0.5])
    surf = loft_surface(build_cross_sections(tree, 1.0), MeshSizingParams(50.0, 100.0))
    check_surface(surf)
    assert all(p.rings.shape[1] >= 8 for p in surf.paths)


def test_refinement_increases_vertex_count():
    tree = make_phantom(PhantomSpec("bent_tube")).tree
    secs = build_cross_sections(tree, 2.0)
    counts = [loft_surface(secs, MeshSizingParams(h, 1.0)).n_vertices for h in (0.8, 0.4, 0.2)]
    assert counts[0] < counts[1] < counts[2]


def test_self_intersecting_contour_rejected():
    secs = build_cross_sections(straight_tree(), 2.0)
    c = secs[0][3].contour.copy()
    c[[1, 5]] = c[[5, 1]]  # bow-tie
    secs[0][3].contour = c
    with pytest.raises(InputError):
        loft_surface(secs, MeshSizingParams())


# --- tetrahedralization ---------------------------------------------------------------


def test_tet_volume_matches_cylinder():
    _, surface, tm, _ = tube_model(h_min=0.1, h_max=0.2)
    check_tetmesh(tm)
    assert abs(tm.volumes().sum() - np.pi * 10) <= 0.03 * np.pi * 10


def test_every_wall_and_centerline_node_used(small_tube):
    _, _, tm, _ = small_tube
    used = set(np.unique(tm.tets).tolist())
    assert set(tm.wall_node_ids.tolist()) <= used
    assert set(tm.centerline_node_ids.tolist()) <= used
    assert np.all(tm.volumes() > 1e-7)


def test_centerline_nodes_lie_on_axis(small_tube):
    _, _, tm, _ = small_tube
    assert np.allclose(tm.nodes[tm.centerline_node_ids, :2], 0.0, atol=1e-9)


def test_node_sets_partition(y_model):
    _, _, tm, _, _ = y_model
    check_tetmesh(tm)
    assert np.intersect1d(tm.wall_node_ids, tm.centerline_node_ids).size == 0
    all_ids = np.concatenate([tm.wall_node_ids, tm.centerline_node_ids, tm.interior_node_ids])
    assert np.array_equal(np.sort(all_ids), np.arange(tm.n_nodes))


def test_boundary_faces_equal_wall_triangles(small_tube):
    _, surface, tm, _ = small_tube
    caps = {c for p in surface.paths for c in (p.start_cap, p.end_cap) if c is not None}
    body = {tuple(sorted(t)) for t in surface.triangles.tolist() if not caps & set(t)}
    bnd = {tuple(sorted(f)) for f in tm.boundary_faces().tolist() if not caps & set(f)}
    assert body == bnd


def test_flat_layer_rejected_with_layer_name():
    _, surface, _, _ = tube_model()
    p = surface.paths[0]
    v = surface.vertices.copy()
    v[p.rings[4]] = v[p.rings[3]] + np.array([0, 0, 1e-12])
    centers = p.centers.copy()
    centers[4] = centers[3]
    p2 = type(p)(**{**p.__dict__, "centers": centers})
    bad = type(surface)(v, surface.triangles, [p2], surface.junctions)
    with pytest.raises(MeshError, match="layer 3"):
        tetrahedralize(bad)
