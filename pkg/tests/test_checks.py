import math

import numpy as np
import pytest

from ntalab import zoo
from ntalab.harmonic import (PreconditionError, adversarial_union, ainfty_shrinking_check, angle_partition,
                             eta_check, judge_union, local_partition, localization_check, random_unions,
                             reverse_holder_check, reverse_holder_constant, reverse_holder_refinement,
                             walk_on_spheres)
from ntalab.lipschitz import build_patch, parameter_schedule


def test_reverse_holder_constant_values():
    assert reverse_holder_constant([2.0, 2.0, 2.0], [1, 2, 3]) == pytest.approx(1.0)
    assert reverse_holder_constant([1.0, 4.0], [1, 1]) == pytest.approx(math.sqrt(17 / 2) / 2.5)
    assert math.isnan(reverse_holder_constant([0.0, 0.0], [1, 1]))


def test_reverse_holder_disk_center(coarse_disk):
    est = walk_on_spheres(coarse_disk, (0, 0), angle_partition(coarse_disk, 64, center=(0, 0)), 100_000, 1e-5, seed=4)
    disks = [((1.0, 0.0), 0.5), ((0.0, -1.0), 0.3), ((-0.6, 0.8), 1.0)]
    rep = reverse_holder_check(est, coarse_disk, disks)
    assert 1.0 <= rep.C_max < 1.01
    with pytest.warns(UserWarning, match="zero estimated measure"):
        far = reverse_holder_check(est, coarse_disk, [((0.0, 0.0), 0.5)])
    assert far.rows[0].skipped
    rows = reverse_holder_refinement(est, coarse_disk, disks, [angle_partition(coarse_disk, k) for k in (8, 16)])
    assert [r["cells"] for r in rows] == [8, 16]


def test_judge_union_cases():
    n, d = 10 ** 6, 0.05
    cD = 0.5 * n
    assert judge_union(0, cD, n, 0.0, 1.0, d) == ("pass", "pass")
    # tiny harmonic measure on most of the surface
    assert judge_union(0.001 * n, cD, n, 0.99, 1.0, d)[0] == "fail"
    # all harmonic measure on a sliver
    assert judge_union(cD, cD, n, 0.01, 1.0, d)[1] == "fail"
    # too few walks to decide
    assert judge_union(48, 50, 100, 0.01, 1.0, d)[1] == "inconclusive"
    # E = D never violates either implication
    assert judge_union(cD, cD, n, 1.0, 1.0, d) == ("pass", "pass")


def test_adversarial_and_random_unions():
    k = np.array([5.0, 1.0, 9.0, 3.0])
    sig = np.array([0.02, 0.5, 0.03, 0.45])
    E = adversarial_union(k, sig, 1.0, 0.05)
    assert list(E) == [0, 2]
    assert sig[E].sum() <= 0.05
    rng = np.random.default_rng(0)
    cells = np.arange(10)
    U = random_unions(rng, cells, 40)
    assert len(U) == 40
    assert all(set(u.tolist()) <= set(cells.tolist()) for u in U)
    assert all(len(U[i]) >= 1 for i in range(0, 40, 2))


def test_local_partition(circle):
    part, inside = local_partition(circle, (1.0, 0.0), 0.3, cells=8)
    assert len(inside) == 8
    assert part.n_cells == 9
    # the ball straddles element index 0: cells must still be contiguous arcs
    assert part.sigma[inside].sum() == pytest.approx(4 * math.asin(0.15), abs=2 * circle.element_scale)


def test_ainfty_disk_has_no_violations(coarse_disk):
    rep = ainfty_shrinking_check(coarse_disk, (1.0, 0.0), [0.5, 0.25], pole=(0.0, 0.0), delta=0.05, trials=60,
                                 seed=1, n_walks=100_000, cells=16, gamma=4.0)
    assert rep.violations == 0
    assert all(r.chain_consistent for r in rep.rows)
    assert all(r.density_ok for r in rep.rows)
    assert rep.rows[0].status == "pass"
    assert rep.status in ("pass", "inconclusive")
    assert len(rep.table()) == 2


def test_ainfty_noise_is_inconclusive(coarse_disk):
    rep = ainfty_shrinking_check(coarse_disk, (1.0, 0.0), [0.05], pole=(0.0, 0.0), n_walks=2_000, trials=20)
    assert rep.rows[0].noise_dominated
    assert rep.status == "inconclusive"


def test_ainfty_preconditions(coarse_disk):
    with pytest.raises(PreconditionError, match="resolution floor"):
        ainfty_shrinking_check(coarse_disk, (1.0, 0.0), [0.001], pole=(0.0, 0.0), n_walks=100)
    with pytest.raises(ValueError):
        ainfty_shrinking_check(coarse_disk, (1.0, 0.0), [0.5], pole=(0.0, 0.0), delta=0.6, n_walks=100)


def test_localization(fine_square):
    rep = localization_check(fine_square, (0.5, 0.0), 0.2, X0=(0.5, 0.9), a=(0.5, 0.1), n_walks=100_000,
                             seed=2, cells=4, boot=50)
    assert not rep.inconclusive
    assert rep.cells_used == 4
    assert 1.0 <= rep.C_loc < 20
    assert rep.ci[0] <= rep.ci[1]
    assert sum(r["omega_rel"] for r in rep.rows) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        localization_check(fine_square, (0.5, 0.0), 0.2, X0=(0.5, 0.3), a=(0.5, 0.1), n_walks=100)


def test_eta_on_square_patch(fine_square):
    p = build_patch(fine_square, (0.5, 0.0), 0.5, 2.0, 32.0)
    sch = parameter_schedule(2, 2, 4, 0.1)
    rep = eta_check(p, sch, trials=40, n_walks=20_000, seed=3)
    assert rep.threshold == pytest.approx(float(sch.psi) / 2 * 0.5)
    assert rep.violators > 0  # the whole boundary is always sampled
    assert 0 < rep.eta_hat <= 1
    assert not rep.inconclusive
    assert rep.trials == 42
