import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ntalab import zoo
from ntalab.lipschitz import maximal_diagnostics, maximal_function, parameter_schedule, patch_frame
from ntalab.lipschitz.maximal import maximal_function_bruteforce_1d, projected_measure_1d
from oracles import maximal_bruteforce_2d


def test_uniform_segment_density_one():
    mu = np.zeros(64)
    mu[16:48] = 0.5  # density 1 on cells of width 0.5
    H = maximal_function(mu, 0.5)
    assert np.allclose(H[16:48], 1.0)
    assert np.all(H <= 1.0 + 1e-12)


def test_point_mass_decay():
    R, cell, m = 129, 0.01, 1.0
    mu = np.zeros(R)
    mu[64] = m
    H = maximal_function(mu, cell)
    bf = maximal_function_bruteforce_1d(mu, cell)
    dist = np.abs(np.arange(R) - 64) + 1
    assert np.allclose(bf, m / (dist * cell))
    assert np.all(H <= bf + 1e-9)
    assert np.all(bf <= 6 * H + 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=4, max_size=48))
def test_ladder_within_factor_1d(vals):
    mu = np.array(vals)
    H = maximal_function(mu, 0.1)
    bf = maximal_function_bruteforce_1d(mu, 0.1)
    assert np.all(H <= bf * (1 + 1e-12) + 1e-12)
    assert np.all(bf <= 6 * H * (1 + 1e-12) + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 12))
def test_ladder_within_factor_2d(seed, R):
    rng = np.random.default_rng(seed)
    mu = rng.exponential(size=(R, R)) * (rng.random((R, R)) < 0.3)
    H = maximal_function(mu, 0.2)
    bf = maximal_bruteforce_2d(mu, 0.2)
    assert np.all(H <= bf * (1 + 1e-12) + 1e-12)
    assert np.all(bf <= 36 * H * (1 + 1e-12) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 3)), min_size=1, max_size=10))
def test_projected_measure_matches_overlaps(segs):
    S = np.array(segs)
    edges = np.linspace(-1.2, 1.2, 25)
    got = projected_measure_1d(S[:, 0], S[:, 1], S[:, 2], edges)
    want = np.zeros(24)
    for a, b, m in S:
        lo, hi = min(a, b), max(a, b)
        if hi - lo <= 1e-15:
            want[np.searchsorted(edges, lo, side="right") - 1] += m
            continue
        ov = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0, None)
        want += m * ov / (hi - lo)
    assert np.allclose(got, want, atol=1e-9)
    assert got.sum() == pytest.approx(S[:, 2].sum(), abs=1e-9)


def frames():
    sq = zoo.square(128)
    koch = zoo.koch_curve(5)
    cube = zoo.cube(8)
    return [
        (sq, patch_frame(sq, (0.5, 0.0), 0.5, 2.0)),
        (koch, patch_frame(koch, koch.vertices[0], 0.3, 4.0)),
        (cube, patch_frame(cube, (0.5, 0.5, 0.0), 0.5, 2.0)),
    ]


@pytest.mark.parametrize("k", range(3))
def test_lambda_mass_bound(k):
    mesh, fr = frames()[k]
    # flat pieces have H <= 1, so N below 1 keeps Lambda nonempty; gamma is the measured density of Delta(Q, r)
    n = mesh.dim
    gamma = mesh.surface_ball(fr.Q, fr.r).measure / fr.r ** (n - 1)
    d = maximal_diagnostics(mesh, fr, N=0.8, alpha=24.0, gamma=gamma, h=16 * fr.M * np.sqrt(n - 1),
                            raster=64 if n == 3 else 512)
    assert d.lambda_mass > 0
    assert d.lambda_mass <= d.bound
    assert d.lambda_mass <= d.bound_gamma


def test_schedule_defaults_and_fk():
    mesh, fr = frames()[1]
    sch = parameter_schedule(2, 4, 8, 0.1)
    d = maximal_diagnostics(mesh, fr, sch, raster=256)
    assert d.N == float(sch.N)
    assert d.passed
    assert len(d.Fk_mass) == len(d.scales)
    assert all(a >= b for a, b in zip(d.Fk_mass, d.Fk_minus_lambda_mass))
    assert d.summary()["passed"] is True


def test_requires_threshold():
    mesh, fr = frames()[0]
    with pytest.raises(ValueError):
        maximal_diagnostics(mesh, fr)
