import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ntalab import zoo
from ntalab.geometry import (BoundaryMesh, DomainError, GeometryError, MeshError, Side, build_frame,
                             distance_to_boundary, inside_test, surface_ball)

coord = st.floats(-1.5, 2.5, allow_nan=False)


def test_square_classification(unit_square):
    assert inside_test(unit_square, (0.5, 0.5)) is Side.INTERIOR
    assert inside_test(unit_square, (2.0, 0.0)) is Side.EXTERIOR
    assert inside_test(unit_square, (1.0, 0.5), tol=1e-9) is Side.BOUNDARY


def test_distance_examples(unit_square, circle):
    assert distance_to_boundary(unit_square, (0.5, 0.5)) == pytest.approx(0.5, abs=1e-15)
    assert distance_to_boundary(unit_square, (0.25, 0.1)) == pytest.approx(0.1, abs=1e-15)
    assert distance_to_boundary(circle, (0.0, 0.0)) == pytest.approx(math.cos(math.pi / 4096), rel=1e-14)


def test_open_polyline_rejected():
    with pytest.raises(MeshError, match="not closed"):
        BoundaryMesh([[0, 0], [1, 0], [1, 1]], [[0, 1], [1, 2]])


def test_dangling_index_rejected():
    with pytest.raises(MeshError, match="outside"):
        BoundaryMesh([[0, 0], [1, 0], [1, 1]], [[0, 1], [1, 2], [2, 5]])


def test_orientation_normalised():
    V = [[0, 0], [0, 1], [1, 1], [1, 0]]  # clockwise
    m = BoundaryMesh(V, [[0, 1], [1, 2], [2, 3], [3, 0]])
    assert m.enclosed_content == pytest.approx(1.0)
    # outward normal of the bottom edge points down
    bottom = np.argmin(m.centroids[:, 1])
    assert m.normals[bottom] @ [0, -1] == pytest.approx(1.0)


def test_measure_matches_recomputation(unit_cube):
    X = unit_cube.vertices[unit_cube.elements]
    area = 0.5 * np.linalg.norm(np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), axis=1).sum()
    assert unit_cube.total_measure == pytest.approx(area, rel=1e-12)
    assert unit_cube.total_measure == pytest.approx(6.0, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.tuples(coord, coord))
def test_distance_matches_brute_force_2d(p):
    m = zoo.koch_curve(2)
    P = np.array([p])
    assert m.distance(P)[0] == pytest.approx(m.brute_distance(P)[0], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord, coord))
def test_distance_matches_brute_force_3d(p):
    m = zoo.quadratic_koch_surface(1)
    P = np.array([p])
    assert m.distance(P)[0] == pytest.approx(m.brute_distance(P)[0], abs=1e-12)


@pytest.mark.parametrize("mesh", [zoo.koch_curve(3), zoo.lipschitz_graph(0.5, 32), zoo.cube(2),
                                  zoo.quadratic_koch_surface(1)], ids=["koch", "graph", "cube", "qks"])
def test_classification_matches_winding_number(mesh):
    rng = np.random.default_rng(1)
    lo, hi = mesh.vertices.min(0), mesh.vertices.max(0)
    P = rng.uniform(lo - 0.2, hi + 0.2, size=(100, mesh.dim))
    P = P[mesh.distance(P) > 1e-6]
    assert np.array_equal(mesh.classify(P), mesh.winding_classify(P))


def test_surface_ball_circle_chords(circle):
    # two arcs whose chords have length r: total angle 4 asin(r/2)
    b = surface_ball(circle, (1.0, 0.0), 0.2)
    assert b.measure == pytest.approx(4 * math.asin(0.1), rel=1e-6)
    assert b.measure == pytest.approx(0.400670, abs=1e-6)


def test_surface_ball_flat_and_full(unit_square, circle):
    assert surface_ball(unit_square, (0.5, 0.0), 0.25).measure == pytest.approx(0.5, rel=1e-14)
    assert surface_ball(circle, (1.0, 0.0), 3.0).measure == pytest.approx(circle.total_measure, rel=1e-14)


def test_surface_ball_off_boundary(unit_square):
    with pytest.raises(DomainError):
        surface_ball(unit_square, (0.5, 0.5), 0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.lists(st.floats(0.01, 1.5), min_size=2, max_size=6))
def test_surface_ball_monotone_and_continuous(t, radii):
    m = zoo.koch_curve(3)
    Q = m.vertices[int(t * (len(m.vertices) - 1))]
    radii = sorted(radii)
    meas = [m.surface_ball(Q, r).measure for r in radii]
    assert all(b >= a - 1e-12 for a, b in zip(meas, meas[1:]))
    # a small increase in r cannot add more than the elements it newly touches
    for r in radii:
        dm = m.surface_ball(Q, r + 1e-4).measure - m.surface_ball(Q, r).measure
        assert dm <= m.element_measure.max() * 8


def test_surface_ball_annulus_additivity(circle):
    Q = (1.0, 0.0)
    a = circle.clip_ball(Q, 0.3)[0]
    b = circle.clip_ball(Q, 0.7)[0]
    ring = b - a
    assert np.all(ring >= -1e-15)
    assert a.sum() + ring.sum() == pytest.approx(circle.surface_ball(Q, 0.7).measure, rel=1e-13)


def test_frame_half_plane(half_plane_box):
    f = build_frame(half_plane_box, (0, 0), 1.0, (0, 0.5), (0, -0.5), 2.0)
    assert np.allclose(f.origin, 0, atol=1e-15)
    assert np.allclose(f.axis, [0, 1])
    assert f.a_height == pytest.approx(0.5) and f.b_height == pytest.approx(0.5)
    assert f.side == 0.25


def test_frame_tilted_crossing(half_plane_box):
    f = build_frame(half_plane_box, (0, 0), 1.0, (0.1, 0.5), (0, -0.5), 2.0)
    assert np.allclose(f.origin, [0.05, 0.0], atol=1e-14)


def test_frame_rejects_swapped_witnesses(half_plane_box):
    with pytest.raises(GeometryError):
        build_frame(half_plane_box, (0, 0), 1.0, (0, 0.5), (0, 0.25), 2.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.4, 0.4), st.lists(st.tuples(coord, coord), min_size=1, max_size=5))
def test_frame_projection_pythagoras(dx, pts):
    m = zoo.square(16, side=2.0)
    f = build_frame(m, (1.0, 0.0), 1.0, (1.0 + dx, 0.5), (1.0 - dx, -0.5), 2.0)
    R = f.rotation
    assert np.max(np.abs(R @ R.T - np.eye(2))) <= 1e-12
    P = np.array(pts)
    loc = f.to_local(P)
    lhs = np.sum((P - f.origin) ** 2, axis=1)
    rhs = np.sum(f.pi(P) ** 2, axis=1) + f.f(P) ** 2
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12)
    assert np.allclose(f.to_global(loc), P, atol=1e-12)


def test_frame_crossing_nearest_b():
    # square with an exterior slot: the vertical segment a-b crosses the boundary three times
    V = np.array([[0, 0], [3, 0], [3, 3], [0, 3], [0, 2], [2, 2], [2, 1], [0, 1]], float)
    E = np.column_stack([np.arange(8), (np.arange(8) + 1) % 8])
    m = BoundaryMesh(V, E)
    f = build_frame(m, (1.0, 0.0), 3.0, (1.0, 2.5), (1.0, -1.0), 2.0)
    assert f.meta["crossings"] == 3
    assert np.allclose(f.origin, [1.0, 0.0])
