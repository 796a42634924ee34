"""Empirical comparisons between harmonic measure and surface measure."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..geometry.mesh import BoundaryMesh, DomainError
from .wos import MeasureEstimate, Partition, walk_on_spheres

GATE = 4.0  # statistical decisions need a margin of this many standard errors


class PreconditionError(ValueError):
    pass


def ball_elements(mesh: BoundaryMesh, Q, r: float) -> np.ndarray:
    """Elements whose centroid lies in the open ball B(Q, r): Delta(Q, r) at element resolution."""
    d = np.linalg.norm(mesh.centroids - np.asarray(Q, float), axis=1)
    return np.nonzero(d < r)[0]


def local_partition(mesh: BoundaryMesh, Q, r: float, cells: int = 8) -> tuple[Partition, np.ndarray]:
    """Split Delta(Q, r) into about ``cells`` pieces; the rest of the boundary is the last cell.

    Returns the partition and the indices of the cells inside Delta(Q, r).
    """
    el = ball_elements(mesh, Q, r)
    if len(el) == 0:
        raise DomainError(f"no element centroid within {r:g} of Q")
    lab = np.full(mesh.n_elements, -1, dtype=np.int64)
    if mesh.dim == 2:
        # follow the loop order, starting after the largest index gap so a run that wraps stays whole
        gaps = np.diff(np.r_[el, el[0] + mesh.n_elements])
        start = (int(np.argmax(gaps)) + 1) % len(el)
        seq = np.roll(el, -start)
        m = mesh.element_measure[seq]
        mid = np.cumsum(m) - m / 2
        lab[seq] = np.minimum((mid / m.sum() * cells).astype(np.int64), cells - 1)
    else:
        C = mesh.centroids[el]
        lo, hi = C.min(axis=0), C.max(axis=0)
        # grid on the two widest axes
        ax = np.argsort(hi - lo)[::-1][:2]
        k = max(1, round(math.sqrt(cells)))
        ext = np.maximum(hi[ax] - lo[ax], 1e-300)
        ij = np.minimum(((C[:, ax] - lo[ax]) / ext * k).astype(np.int64), k - 1)
        lab[el] = ij[:, 0] * k + ij[:, 1]
    _, inv = np.unique(lab[el], return_inverse=True)
    lab[el] = inv.ravel()
    inside = int(inv.max()) + 1
    lab[lab < 0] = inside
    p = Partition.from_labels(mesh, lab, "local")
    return p, np.arange(inside)


# reverse Hoelder

def reverse_holder_constant(k, sigma) -> float:
    """(avg k^2)^(1/2) / avg k with averages weighted by ``sigma``."""
    k = np.asarray(k, float)
    sigma = np.asarray(sigma, float)
    tot = sigma.sum()
    m1 = float(np.dot(k, sigma) / tot)
    m2 = float(np.dot(k * k, sigma) / tot)
    if m1 <= 0:
        return math.nan
    return math.sqrt(m2) / m1


@dataclass
class ReverseHolderRow:
    center: list
    r: float
    sigma: float
    omega: float
    C_hat: float
    skipped: bool


@dataclass
class ReverseHolderReport:
    rows: list
    partition: str
    cells: int

    @property
    def C_max(self) -> float:
        vals = [r.C_hat for r in self.rows if not r.skipped]
        return max(vals) if vals else math.nan


def reverse_holder_check(estimate: MeasureEstimate, mesh: BoundaryMesh, disks) -> ReverseHolderReport:
    """C_hat on each surface ball (y, r), using the empirical density of each cell.

    Each element contributes its clipped measure inside the ball at the
    density of its cell.
    """
    part = estimate.partition
    sig = part.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        k_cell = np.where(sig > 0, estimate.probabilities / sig, 0.0)
    k_el = k_cell[part.labels]
    rows = []
    for y, r in disks:
        clipped, _, _ = mesh.clip_ball(np.asarray(y, float), r)
        s = float(clipped.sum())
        om = float(np.dot(k_el, clipped))
        if s <= 0 or om <= 0:
            warnings.warn(f"surface ball at {list(np.round(y, 6))} r={r:g} has zero estimated measure; skipped",
                          stacklevel=2)
            rows.append(ReverseHolderRow(list(map(float, y)), float(r), s, om, math.nan, True))
            continue
        rows.append(ReverseHolderRow(list(map(float, y)), float(r), s, om,
                                     reverse_holder_constant(k_el, clipped), False))
    return ReverseHolderReport(rows, part.kind, part.n_cells)


def reverse_holder_refinement(estimate: MeasureEstimate, mesh: BoundaryMesh, disks, partitions):
    """Largest C_hat over ``disks`` for each partition in ``partitions`` (same walks)."""
    out = []
    for p in partitions:
        rep = reverse_holder_check(estimate.regroup(p), mesh, disks)
        out.append({"cells": p.n_cells, "partition": p.kind, "C_max": rep.C_max})
    return out


# eta

@dataclass
class EtaReport:
    eta_hat: float
    std_err: float
    trials: int
    threshold: float        # (psi / 2) r^(n-1)
    violators: int          # sampled E with sigma(E) above the threshold
    n_walks: int
    inconclusive: bool
    rows: list = field(default_factory=list)

    def summary(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "rows"}


def random_unions(rng: np.random.Generator, cells: np.ndarray, trials: int) -> list:
    """Random cell unions: half contiguous runs, half independent subsets of random density."""
    out = []
    k = len(cells)
    for t in range(trials):
        if t % 2 == 0:
            a = int(rng.integers(0, k))
            b = int(rng.integers(a + 1, k + 1))
            out.append(cells[a:b])
        else:
            q = rng.random()
            out.append(cells[rng.random(k) < q])
    return out


def eta_check(patch, schedule, a=None, trials: int = 200, seed: int = 0, *, n_walks: int = 100_000,
              cells: int = 64, shell: float | None = None, workers: int = 1) -> EtaReport:
    """Largest eta such that no sampled E on the patch boundary has
    omega^a(E) <= eta and sigma(E) > (psi/2) r^(n-1).

    eta_hat is the smallest omega^a(E) among sampled E that break the
    measure bound (1 when none do).
    """
    mesh = patch.omega_L
    frame = patch.frame
    a = frame.a_point if a is None else np.asarray(a, float)
    shell = shell if shell is not None else 1e-4 * frame.r
    psi = float(schedule.psi)
    n = frame.dim
    thr = psi / 2 * frame.r ** (n - 1)
    from .wos import make_partition
    part = make_partition(mesh, "auto", cells)
    est = walk_on_spheres(mesh, a, part, n_walks, shell, seed, workers=workers)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    ids = np.arange(part.n_cells)
    unions = [ids[:0], ids] + random_unions(rng, ids, trials)
    eta, se, bad = 1.0, 0.0, 0
    rows = []
    for E in unions:
        om = est.mass(E)
        sg = float(part.sigma[E].sum())
        rows.append((om, sg))
        if sg > thr:
            bad += 1
            if om < eta:
                eta, se = om, est.mass_std_err(E)
    return EtaReport(eta_hat=eta, std_err=se, trials=len(unions), threshold=thr, violators=bad,
                     n_walks=n_walks, inconclusive=bool(se > eta / 4), rows=rows)


# localization

@dataclass
class LocalizationReport:
    C_loc: float
    ci: tuple
    omega_delta: float       # omega^X0(Delta(Q, r))
    omega_a_delta: float     # omega^a(Delta(Q, r))
    cells_used: int
    inconclusive: bool
    rows: list = field(default_factory=list)

    def summary(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items() if k != "rows"}


def _c_loc(c0, ca, n0, na, inside, used):
    w0 = c0[inside].sum() / n0
    if w0 <= 0:
        return math.inf
    rel = c0[used] / n0 / w0
    pa = ca[used] / na
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = rel / pa
        two = np.maximum(ratio, 1 / ratio)
    # E = Delta itself: ratio 1 / omega^a(Delta)
    pad = ca[inside].sum() / na
    whole = max(1 / pad, pad) if pad > 0 else math.inf
    return float(max(np.max(two) if len(two) else 0.0, whole))


def localization_check(mesh: BoundaryMesh, Q, r: float, X0, a, partition: Partition | None = None,
                       n_walks: int = 100_000, seed: int = 0, *, cells: int = 8, shell: float | None = None,
                       boot: int = 200, workers: int = 1) -> LocalizationReport:
    """max over cells E of Delta(Q, r) of the two-sided ratio between
    omega^X0(E) / omega^X0(Delta) and omega^a(E).

    Cells whose omega^a estimate is within 4 standard errors of zero are
    left out.  The interval is a 95% parametric bootstrap.
    """
    Q = np.asarray(Q, float)
    X0 = np.asarray(X0, float)
    a = np.asarray(a, float)
    if np.linalg.norm(X0 - Q) < 2 * r:
        raise PreconditionError("the far pole must lie outside B(Q, 2r)")
    if partition is None:
        partition, inside = local_partition(mesh, Q, r, cells)
    else:
        el = set(ball_elements(mesh, Q, r).tolist())
        inside = np.array([c for c in range(partition.n_cells)
                           if set(np.nonzero(partition.labels == c)[0].tolist()) <= el], dtype=np.int64)
        if len(inside) == 0:
            raise DomainError("no partition cell lies inside Delta(Q, r)")
    shell = shell if shell is not None else 1e-4 * r
    s0, s1 = np.random.SeedSequence(seed).generate_state(2)
    e0 = walk_on_spheres(mesh, X0, partition, n_walks, shell, int(s0), workers=workers)
    ea = walk_on_spheres(mesh, a, partition, n_walks, shell, int(s1), workers=workers)
    c0, ca = e0.counts.astype(float), ea.counts.astype(float)
    pa = ca / n_walks
    se_a = np.sqrt(pa * (1 - pa) / n_walks)
    used = inside[pa[inside] > GATE * se_a[inside]]
    w0 = e0.mass(inside)
    se0 = e0.mass_std_err(inside)
    noisy = not (w0 > GATE * se0)
    C = _c_loc(c0, ca, n_walks, n_walks, inside, used)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    bs = []
    for _ in range(boot):
        b0 = rng.multinomial(n_walks, e0.probabilities).astype(float)
        ba = rng.multinomial(n_walks, ea.probabilities).astype(float)
        bs.append(_c_loc(b0, ba, n_walks, n_walks, inside, used))
    bs = np.array(bs)
    ci = (float(np.percentile(bs, 2.5)), float(np.percentile(bs, 97.5))) if boot else (math.nan, math.nan)
    rows = [{"cell": int(c), "omega_rel": float(c0[c] / n_walks / w0) if w0 > 0 else math.nan,
             "omega_a": float(pa[c]), "sigma": float(partition.sigma[c])} for c in inside]
    return LocalizationReport(C_loc=C, ci=ci, omega_delta=w0, omega_a_delta=float(pa[inside].sum()),
                              cells_used=int(len(used)), inconclusive=bool(noisy or len(used) == 0), rows=rows)


# shrinking-scale A-infinity implications

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _judge(value, se):
    """Sign of ``value`` decided at the gate: -1 (confidently <= 0), +1 (confidently > 0) or 0."""
    if value < -GATE * se:
        return -1
    if value > GATE * se:
        return 1
    return 0


def judge_union(cE, cD, n, sE, sD, delta):
    """Verdicts for omega(E) <= delta omega(D) => sigma(E) <= (1-delta) sigma(D)  (forward)
    and sigma(E) <= delta sigma(D) => omega(E) <= (1-delta) omega(D)  (reverse).

    cE, cD are hit counts (E inside D), sE, sD surface measures.
    """
    eps = 1 - delta
    pE, pD = cE / n, cD / n
    # forward: the premise is random, the conclusion exact
    if sE <= eps * sD:
        fwd = PASS
    else:
        x = pE - delta * pD
        var = (pE * (1 - 2 * delta) + delta * delta * pD - x * x) / n
        j = _judge(x, math.sqrt(max(var, 0.0)))
        fwd = FAIL if j < 0 else PASS if j > 0 else INCONCLUSIVE
    # reverse: the premise is exact, the conclusion random
    if sE > delta * sD:
        rev = PASS
    else:
        y = pE - eps * pD
        var = (pE * (1 - 2 * eps) + eps * eps * pD - y * y) / n
        j = _judge(y, math.sqrt(max(var, 0.0)))
        rev = PASS if j < 0 else FAIL if j > 0 else INCONCLUSIVE
    return fwd, rev


@dataclass
class ScaleRow:
    r: float
    sigma_delta: float
    density: float           # sigma(Delta) / r^(n-1)
    density_ok: bool | None  # density <= gamma, when gamma is given
    omega_delta: float
    cells: int
    trials: int
    fwd_fail: int
    rev_fail: int
    inconclusive: int
    noise_dominated: bool
    chain_consistent: bool
    status: str


@dataclass
class AInftyReport:
    rows: list
    delta: float
    eps: float
    n_walks: int
    pole: list

    @property
    def violations(self) -> int:
        return sum(r.fwd_fail + r.rev_fail for r in self.rows)

    @property
    def status(self) -> str:
        st = [r.status for r in self.rows]
        if FAIL in st:
            return FAIL
        if INCONCLUSIVE in st:
            return INCONCLUSIVE
        return PASS

    def table(self) -> list:
        return [dict(r.__dict__) for r in self.rows]


def adversarial_union(k, sig, sD, delta):
    """Highest-density cells, greedily, while sigma(E) stays at most delta sigma(D)."""
    order = np.argsort(-k, kind="stable")
    chosen, tot = [], 0.0
    for c in order:
        if tot + sig[c] <= delta * sD:
            chosen.append(c)
            tot += sig[c]
    return np.array(sorted(chosen), dtype=np.int64)


def ainfty_shrinking_check(mesh: BoundaryMesh, Q, scales, pole="auto", delta: float = 0.05, trials: int = 200,
                           seed: int = 0, *, n_walks: int = 100_000, cells: int = 32, gamma: float | None = None,
                           shell: float = 1e-4, workers: int = 1, estimate: MeasureEstimate | None = None,
                           min_resolution: float | None = None) -> AInftyReport:
    """Test both implications on random cell unions of Delta(Q, r_i) at every scale r_i.

    One set of walks from ``pole`` serves every scale.  A scale is
    inconclusive when 4 standard errors of omega(Delta) exceed
    delta omega(Delta); individual unions that land inside the gate are
    counted as inconclusive, never as passes.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    Q = np.asarray(Q, float)
    if estimate is None:
        estimate = walk_on_spheres(mesh, pole, "element", n_walks, shell, seed, workers=workers)
    n = estimate.n_walks
    floor = min_resolution if min_resolution is not None else 4 * mesh.element_scale
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    rows = []
    for r in scales:
        if r < floor:
            raise PreconditionError(f"scale {r:g} is below the resolution floor {floor:g}")
        part, inside = local_partition(mesh, Q, r, cells)
        cnt = np.bincount(part.labels, weights=estimate.element_counts, minlength=part.n_cells)
        sig = part.sigma
        cD = float(cnt[inside].sum())
        sD = float(sig[inside].sum())
        pD = cD / n
        noise = GATE * math.sqrt(pD * (1 - pD) / n) > delta * pD
        with np.errstate(divide="ignore", invalid="ignore"):
            kden = np.where(sig[inside] > 0, cnt[inside] / sig[inside], 0.0)
        unions = [inside[:0], adversarial_union(kden, sig[inside], sD, delta)]
        unions += random_unions(rng, inside, trials)
        fwd_fail = rev_fail = inc = 0
        verdicts = []
        for E in unions:
            f, v = judge_union(float(cnt[E].sum()), cD, n, float(sig[E].sum()), sD, delta)
            verdicts.append((f, v))
            fwd_fail += f == FAIL
            rev_fail += v == FAIL
            inc += (f == INCONCLUSIVE) + (v == INCONCLUSIVE)
        chain_ok = _chain_check(rng, inside, cnt, sig, cD, sD, n, delta)
        dens = sD / r ** (mesh.dim - 1)
        if fwd_fail or rev_fail:
            status = FAIL
        elif noise:
            status = INCONCLUSIVE
        else:
            status = PASS
        rows.append(ScaleRow(float(r), sD, dens, None if gamma is None else bool(dens <= gamma), pD,
                             int(len(inside)), len(unions), int(fwd_fail), int(rev_fail), int(inc),
                             bool(noise), chain_ok, status))
    return AInftyReport(rows, delta, 1 - delta, n, list(map(float, estimate.pole)))


def _chain_check(rng, inside, cnt, sig, cD, sD, n, delta) -> bool:
    """Along a random nested chain E_1 < E_2 < ..., omega and sigma never decrease and
    each verdict depends only on its own union (recomputing gives the same answer)."""
    order = rng.permutation(inside)
    om = np.cumsum(cnt[order])
    sg = np.cumsum(sig[order])
    first = [judge_union(float(om[i]), cD, n, float(sg[i]), sD, delta) for i in range(len(order))]
    again = [judge_union(float(cnt[order[: i + 1]].sum()), cD, n, float(sig[order[: i + 1]].sum()), sD, delta)
             for i in range(len(order))]
    return bool(np.all(np.diff(om) >= 0) and np.all(np.diff(sg) >= 0) and first == again)
