import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ntalab import zoo
from ntalab.geometry import DomainError
from ntalab.harmonic import (Partition, angle_partition, auto_pole, density_profile, disk_arc_probability,
                             element_partition, face_partition, grid_partition, make_partition, order_partition,
                             walk_on_spheres)


def poisson(rho, t):
    return (1 - rho * rho) / (2 * math.pi * (1 - 2 * rho * math.cos(t) + rho * rho))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 0.95), st.floats(-7, 7), st.floats(0, 6.2))
def test_arc_probability_matches_quadrature(rho, t0, width):
    want, _ = integrate.quad(lambda t: poisson(rho, t), t0, t0 + width, limit=200, epsabs=1e-12)
    assert float(disk_arc_probability(rho, t0, t0 + width)) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.9])
def test_arcs_sum_to_one(rho):
    e = np.linspace(0, 2 * np.pi, 65)
    p = disk_arc_probability(rho, e[:-1], e[1:])
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p > 0)


def test_square_faces_quarter(unit_square):
    part = face_partition(unit_square)
    assert part.n_cells == 4
    est = walk_on_spheres(unit_square, (0.5, 0.5), part, 100_000, 1e-4, seed=3)
    assert est.counts.sum() == est.n_walks
    assert np.all(np.abs(est.probabilities - 0.25) <= 4 * est.std_err)


def test_cube_faces_sixth(unit_cube):
    part = face_partition(unit_cube)
    assert part.n_cells == 6
    est = walk_on_spheres(unit_cube, (0.5, 0.5, 0.5), part, 60_000, 1e-4, seed=1)
    assert np.all(np.abs(est.probabilities - 1 / 6) <= 4 * est.std_err)


def test_off_center_disk_chi_square(coarse_disk):
    part = angle_partition(coarse_disk, 32, center=(0, 0))
    est = walk_on_spheres(coarse_disk, (0.5, 0.0), part, 100_000, 1e-5, seed=11)
    e = np.linspace(0, 2 * np.pi, 33)
    exact = disk_arc_probability(0.5, e[:-1], e[1:])
    _, p = est.chi_square_uniform(exact)
    assert p > 1e-3
    assert np.all(np.abs(est.probabilities - exact) <= 4.5 * np.sqrt(exact * (1 - exact) / est.n_walks))


def test_same_counts_for_any_worker_count(unit_square):
    a = walk_on_spheres(unit_square, (0.3, 0.6), "element", 20_000, 1e-4, seed=5, workers=1)
    b = walk_on_spheres(unit_square, (0.3, 0.6), "element", 20_000, 1e-4, seed=5, workers=3)
    c = walk_on_spheres(unit_square, (0.3, 0.6), "element", 20_000, 1e-4, seed=6)
    assert np.array_equal(a.counts, b.counts)
    assert a.steps == b.steps
    assert not np.array_equal(a.counts, c.counts)


def test_shell_halving_is_stable(unit_square):
    part = face_partition(unit_square)
    a = walk_on_spheres(unit_square, (0.2, 0.3), part, 100_000, 1e-3, seed=1)
    b = walk_on_spheres(unit_square, (0.2, 0.3), part, 100_000, 5e-4, seed=2)
    se = np.sqrt(a.std_err ** 2 + b.std_err ** 2)
    assert np.all(np.abs(a.probabilities - b.probabilities) <= 4 * se)
    assert b.steps > a.steps


def test_pole_errors(unit_square):
    with pytest.raises(DomainError):
        walk_on_spheres(unit_square, (1.5, 0.5), n_walks=10)
    with pytest.raises(DomainError):
        walk_on_spheres(unit_square, (0.5, 1e-6), n_walks=10, shell=1e-4)
    with pytest.raises(ValueError):
        walk_on_spheres(unit_square, "centre", n_walks=10)
    with pytest.raises(ValueError):
        walk_on_spheres(unit_square, (0.5, 0.5), n_walks=0)
    with pytest.raises(ValueError):
        walk_on_spheres(unit_square, (0.5, 0.5), n_walks=10, shell=0)


def test_auto_pole():
    assert np.allclose(auto_pole(zoo.square(8)), (0.5, 0.5), atol=1e-4)
    assert np.linalg.norm(auto_pole(zoo.disk(256))) < 1e-3
    assert np.allclose(auto_pole(zoo.cube(4)), (0.5, 0.5, 0.5), atol=1e-3)


def test_partitions_cover_boundary(unit_square, unit_cube, circle):
    for mesh, part in [(unit_square, element_partition(unit_square)), (unit_square, order_partition(unit_square, 5)),
                       (circle, angle_partition(circle, 64)), (unit_cube, grid_partition(unit_cube, 27)),
                       (unit_cube, make_partition(unit_cube)), (circle, make_partition(circle, "auto", 16))]:
        assert part.sigma.sum() == pytest.approx(mesh.element_measure.sum())
        assert part.labels.min() == 0 and part.labels.max() == part.n_cells - 1
    ap = angle_partition(circle, 64)
    assert np.allclose(ap.sigma, ap.sigma[0])
    sub = order_partition(unit_square, 4, elements=np.arange(8))
    assert sub.n_cells == 5
    assert sub.sigma[:4].sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        angle_partition(unit_cube, 8)
    with pytest.raises(ValueError):
        make_partition(unit_square, "hexagon")
    with pytest.raises(ValueError):
        Partition.from_labels(unit_square, [0, 1])


def test_regroup_and_profile(unit_square):
    est = walk_on_spheres(unit_square, (0.5, 0.5), "element", 20_000, 1e-4, seed=2)
    faces = est.regroup(face_partition(unit_square))
    assert faces.counts.sum() == est.n_walks
    assert faces.n_walks == est.n_walks
    prof = density_profile(faces)
    assert prof.total == pytest.approx(1.0)
    assert np.allclose(prof.k, faces.probabilities / 1.0)


def test_exit_points_on_boundary(circle):
    est = walk_on_spheres(circle, (0.0, 0.0), "element", 2_000, 1e-5, seed=0, record_exits=True)
    assert est.exits.shape == (2_000, 2)
    d = circle.distance(est.exits)
    assert np.all(d <= 1e-5 * (1 + 1e-9))
