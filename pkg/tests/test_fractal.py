import math

import numpy as np
import pytest

from ntalab import zoo
from ntalab.harmonic import (DimensionEstimate, ball_measure, box_dimension, density_blowup_sweep,
                             measure_dimension, prefractal_elements, separation_confidence, similarity_dimension,
                             walk_on_spheres)


def test_similarity_dimensions():
    assert similarity_dimension("koch_curve") == pytest.approx(math.log(4) / math.log(3))
    assert similarity_dimension("quadratic_koch_surface") == pytest.approx(math.log(13) / math.log(3))


def test_ball_measure_exact():
    seg = prefractal_elements("koch_curve", 0)
    assert ball_measure(seg, (0.5, 0.1), 0.2) == pytest.approx(2 * math.sqrt(0.03))
    cube = prefractal_elements("quadratic_koch_surface", 0)
    assert ball_measure(cube, (0.5, 0.5, 0.0), 0.3) == pytest.approx(math.pi * 0.09)
    # three quarter-disks meet at a corner
    assert ball_measure(cube, (0.0, 0.0, 0.0), 0.3) == pytest.approx(3 * math.pi * 0.09 / 4)


def test_flat_level_has_constant_density_and_no_slope():
    # level 0 is a triangle; a ball at a vertex smaller than the height sees two straight sides
    s = density_blowup_sweep("koch_curve", [0], scales=[0.5, 0.25, 0.1], resolution_factor=0.05)
    assert np.allclose(s.gamma, 2.0)
    assert s.scale_slope == pytest.approx(0.0, abs=1e-12)
    assert math.isnan(s.level_slope)
    assert s.notes


def test_koch_level_slope():
    s = density_blowup_sweep("koch_curve", range(0, 7))
    assert s.target == pytest.approx(math.log(4) / math.log(3) - 1)
    assert abs(s.level_slope - s.target) < 0.03
    assert len(s.table()) == 7 * 5
    # finer levels never lose measure inside a fixed ball
    g = s.gamma[:, 0]
    g = g[~np.isnan(g)]
    assert np.all(np.diff(g) > 0)


def test_unknown_family():
    with pytest.raises(ValueError):
        density_blowup_sweep("sierpinski")


def test_box_dimension_smooth_boundaries():
    assert box_dimension(zoo.disk(4096), boot=10).dimension == pytest.approx(1.0, abs=0.1)
    assert box_dimension(zoo.cube(32), boot=5).dimension == pytest.approx(2.0, abs=0.15)
    assert box_dimension(zoo.koch_curve(5), boot=5).dimension > 1.15


def test_disk_measure_dimension():
    est = walk_on_spheres(zoo.disk(4096), (0.0, 0.0), "element", 100_000, 1e-5, seed=0, record_exits=True)
    D = measure_dimension(est, boot=40)
    assert D.dimension == pytest.approx(1.0, abs=0.1)
    assert D.ci[0] <= D.ci[1]
    assert not D.inconclusive
    # without exit points the centroid weights give the same picture
    est.exits = None
    D2 = measure_dimension(est, mesh=zoo.disk(4096), boot=10)
    assert D2.dimension == pytest.approx(1.0, abs=0.1)
    with pytest.raises(ValueError):
        measure_dimension(est)
    with pytest.raises(ValueError):
        measure_dimension(est, [0.5, 0.3, 0.2], mesh=zoo.disk(4096))


def _est(boot):
    return DimensionEstimate(float(np.mean(boot)) if len(boot) else math.nan, 0.0, (0, 0), [], [], np.asarray(boot, float), [], "x", False)


def test_separation_confidence():
    assert separation_confidence(_est([1.0, 1.0, 1.0]), _est([1.3, 1.2, 1.25])) == 1.0
    assert separation_confidence(_est([1.0, 2.0]), _est([1.5, 1.5])) == 0.5
    assert math.isnan(separation_confidence(_est([]), _est([1.0])))
