"""Prefractal density sweeps and dimension estimates of measures and boundaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import _kernels as GK
from ..geometry.mesh import BoundaryMesh
from .. import zoo
from .wos import MeasureEstimate

FAMILIES = {
    # name: (dimension of the ambient space, generator count, scale factor, default persistent vertex)
    "koch_curve": (2, 4, 3, (0.0, 0.0)),
    "quadratic_koch_surface": (3, 13, 3, (0.0, 0.0, 0.0)),
}


def similarity_dimension(family: str) -> float:
    _, count, scale, _ = FAMILIES[family]
    return math.log(count) / math.log(scale)


def prefractal_elements(family: str, level: int, side: float = 1.0) -> np.ndarray:
    """(E, k, 3) element coordinates of a prefractal, without welding."""
    if family == "koch_curve":
        return np.array(zoo.koch_curve(level, side).element_coords)
    if family == "quadratic_koch_surface":
        O, U, W = zoo.quadratic_koch_squares(level, side)
        A, B, C, D = O, O + U, O + U + W, O + W
        return np.ascontiguousarray(np.concatenate([np.stack([A, B, C], 1), np.stack([A, C, D], 1)]))
    raise ValueError(f"unknown prefractal family {family!r}; expected one of {', '.join(FAMILIES)}")


def ball_measure(ec: np.ndarray, Q, r: float) -> float:
    """Exact measure of the elements inside the open ball B(Q, r)."""
    q = np.zeros(3)
    q[: len(Q)] = Q
    E = len(ec)
    out, t0, t1 = np.empty(E), np.empty(E), np.empty(E)
    GK.clip_ball(ec, q[0], q[1], q[2], float(r), out, t0, t1)
    return float(out.sum())


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class DensitySweep:
    family: str
    Q: list
    levels: list
    scales: list
    gamma: np.ndarray         # (levels, scales) sigma(Delta(Q, r)) / r^(n-1); NaN where excluded
    level_slope: float        # d log gamma / d log(1/l_g) at fixed r, averaged over scales
    level_slopes: list        # per scale
    scale_slope: float        # d log gamma / d log(1/r) at the finest level
    target: float             # similarity dimension minus (n - 1)
    resolution_factor: float
    notes: list = field(default_factory=list)

    def table(self) -> list:
        rows = []
        for i, g in enumerate(self.levels):
            for j, r in enumerate(self.scales):
                v = self.gamma[i, j]
                rows.append({"level": g, "r": r, "gamma": None if np.isnan(v) else float(v),
                             "excluded": bool(np.isnan(v))})
        return rows


def density_blowup_sweep(family: str = "koch_curve", levels=range(0, 7), scales=None, Q=None,
                         side: float = 1.0, resolution_factor: float = 10.0) -> DensitySweep:
    """gamma(Q, r, g) = sigma_g(Delta(Q, r)) / r^(n-1) for prefractal levels g and radii r.

    Measures are exact: every element is clipped against the ball.  Radii
    below ``resolution_factor`` element lengths of a level are excluded at
    that level.  The level slope is the growth rate of gamma in
    log(1/element length) at fixed r; the scale slope is the rate in
    log(1/r) at the finest level.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown prefractal family {family!r}; expected one of {', '.join(FAMILIES)}")
    n, count, b, q0 = FAMILIES[family]
    Q = np.asarray(q0 if Q is None else Q, float) * (side if Q is None else 1.0)
    levels = [int(g) for g in levels]
    if scales is None:
        scales = [side * 3.0 ** (-j / 2) for j in range(0, 5)]
    scales = [float(r) for r in scales]
    notes = []
    gam = np.full((len(levels), len(scales)), np.nan)
    for i, g in enumerate(levels):
        ec = prefractal_elements(family, g, side)
        ell = side * float(b) ** (-g)
        for j, r in enumerate(scales):
            if r > side or r < resolution_factor * ell:
                continue
            gam[i, j] = ball_measure(ec, Q, r) / r ** (n - 1)
    logl = np.array([g * math.log(b) for g in levels])
    per_scale = []
    for j in range(len(scales)):
        ok = ~np.isnan(gam[:, j])
        per_scale.append(_slope(logl[ok], np.log(gam[ok, j])) if ok.sum() >= 2 else math.nan)
    valid = [s for s in per_scale if not math.isnan(s)]
    if not valid:
        notes.append("no radius is resolved at two or more levels; level slope undefined")
    ok = ~np.isnan(gam[-1])
    scale_slope = _slope(-np.log(np.array(scales)[ok]), np.log(gam[-1, ok])) if ok.sum() >= 2 else math.nan
    return DensitySweep(family=family, Q=Q.tolist(), levels=levels, scales=scales, gamma=gam,
                        level_slope=float(np.mean(valid)) if valid else math.nan, level_slopes=per_scale,
                        scale_slope=scale_slope, target=similarity_dimension(family) - (n - 1),
                        resolution_factor=resolution_factor, notes=notes)


# dimension estimates

def _box_keys(P, origin, eps):
    return np.floor((P - origin) / eps).astype(np.int64)


def _flat(keys):
    """One int64 per row of non-negative box indices (rows stay distinct)."""
    k = keys - keys.min(axis=0)
    span = k.max(axis=0) + 1
    if float(np.prod(span.astype(float))) >= 2.0 ** 62:
        _, inv = np.unique(k, axis=0, return_inverse=True)
        return inv.ravel()
    return np.ravel_multi_index(k.T, tuple(int(v) for v in span))


def _basic_ci(est, boot):
    """Basic bootstrap interval, which corrects for the plug-in bias of the entropy."""
    if len(boot) == 0:
        return (math.nan, math.nan)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return (float(2 * est - hi), float(2 * est - lo))


def _ladder(lo_scale, hi_scale):
    j = max(2, int(math.floor(math.log2(hi_scale / lo_scale))))
    return hi_scale * 2.0 ** -np.arange(j + 1)


@dataclass
class DimensionEstimate:
    dimension: float
    std_err: float
    ci: tuple
    scales: list
    values: list             # entropy (or log count) per scale
    boot: np.ndarray
    occupied: list
    kind: str
    inconclusive: bool
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, "std_err": self.std_err, "ci": list(self.ci),
                "scales": self.scales, "values": self.values, "occupied": self.occupied,
                "inconclusive": self.inconclusive, "notes": self.notes}


def _entropies(counts_fine, maps):
    """Shannon entropy at each scale; ``maps[j]`` sends fine boxes to boxes of scale j."""
    tot = counts_fine.sum()
    out = []
    for m in maps:
        c = np.bincount(m, weights=counts_fine)
        p = c[c > 0] / tot
        out.append(float(-(p * np.log(p)).sum()))
    return out


def measure_dimension(estimate: MeasureEstimate, scales=None, *, mesh: BoundaryMesh | None = None, boot: int = 200,
                      seed: int = 0, min_occupied: int = 16) -> DimensionEstimate:
    """Information dimension of the hitting distribution: the slope of the
    box entropy against log(1/scale) over a dyadic ladder of nested grids.

    Uses the recorded exit points when present, otherwise element
    centroids weighted by hits (``mesh`` required).  Error bars come from
    a multinomial bootstrap of the finest-scale box counts.
    """
    if estimate.exits is not None and len(estimate.exits):
        P = np.asarray(estimate.exits, float)
        w = np.ones(len(P))
        resolution = 2 * estimate.shell
    else:
        if mesh is None:
            raise ValueError("an estimate without exit points needs its mesh")
        P = np.asarray(mesh.centroids)
        w = estimate.element_counts.astype(float)
        resolution = 2 * mesh.element_scale
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = float((hi - lo).max())
    origin = lo - 0.5 * span * np.pi / 7e3  # fixed, generic offset
    if scales is None:
        # stop refining once boxes outnumber walks / 16: finer grids are undersampled
        cand = _ladder(max(4 * resolution, span / 256), span / 4)
        n_eff = w.sum()
        scales = [e for e in cand if len(np.unique(_flat(_box_keys(P, origin, e)))) <= n_eff / 16]
        scales = (scales + list(cand[len(scales):]))[: max(3, len(scales))]
    scales = np.sort(np.asarray(scales, float))[::-1]
    ratios = scales[0] / scales
    if not np.allclose(ratios, np.round(ratios)) or len(scales) < 3:
        raise ValueError("scales must be at least 3 nested grids: the coarsest scale divided by each an integer")
    fine = _box_keys(P, origin, scales[-1])
    _, first, inv = np.unique(_flat(fine), return_index=True, return_inverse=True)
    counts = np.bincount(inv.ravel(), weights=w)
    keep = counts > 0
    ukeys, counts = fine[first][keep], counts[keep]
    maps = []
    for e in scales:
        f = int(round(e / scales[-1]))
        _, m = np.unique(_flat(np.floor_divide(ukeys, f)), return_inverse=True)
        maps.append(m.ravel())
    x = np.log(1 / scales)
    H = _entropies(counts, maps)
    D = _slope(x, H)
    rng = np.random.default_rng(seed)
    tot = int(round(counts.sum()))
    p = counts / counts.sum()
    bs = np.array([_slope(x, _entropies(rng.multinomial(tot, p).astype(float), maps)) for _ in range(boot)])
    occ = [int(m.max()) + 1 for m in maps]
    notes = []
    inconclusive = occ[-1] < min_occupied
    if inconclusive:
        notes.append(f"only {occ[-1]} occupied boxes at the finest scale")
    return DimensionEstimate(D, float(bs.std(ddof=1)) if boot > 1 else math.nan, _basic_ci(D, bs), scales.tolist(),
                             H, bs, occ,
                             "information", inconclusive, notes)


def boundary_samples(mesh: BoundaryMesh, spacing: float) -> np.ndarray:
    """Points on every element no farther than ``spacing`` apart."""
    from ..geometry.mesh import _element_samples
    m = max(1, int(math.ceil(mesh.element_scale / spacing)))
    X = mesh.vertices[mesh.elements]
    if mesh.dim == 2:
        t = np.linspace(0, 1, m + 1)
        return (X[:, None, 0] + t[None, :, None] * (X[:, None, 1] - X[:, None, 0])).reshape(-1, 2)
    pts, _ = _element_samples(X, m * m)
    return np.concatenate([pts.reshape(-1, 3), mesh.vertices])


def box_dimension(mesh: BoundaryMesh, scales=None, *, boot: int = 50, seed: int = 0) -> DimensionEstimate:
    """Box-counting dimension of the boundary: slope of log N(eps) against log(1/eps).

    Boxes are counted on dense boundary samples; the spread comes from
    random grid offsets.
    """
    span = float(np.ptp(mesh.vertices, axis=0).max())
    if scales is None:
        scales = _ladder(4 * mesh.element_scale, span / 4)
    scales = np.sort(np.asarray(scales, float))[::-1]
    if len(scales) < 3:
        raise ValueError("need at least 3 scales")
    P = boundary_samples(mesh, scales[-1] / 8)
    x = np.log(1 / scales)
    rng = np.random.default_rng(seed)

    def counts(offset):
        return [math.log(len(np.unique(_flat(_box_keys(P, offset * e, e))))) for e in scales]

    base = counts(np.full(mesh.dim, -0.5))
    D = _slope(x, base)
    bs = np.array([_slope(x, counts(-rng.random(mesh.dim))) for _ in range(boot)])
    ci = (float(np.percentile(bs, 2.5)), float(np.percentile(bs, 97.5))) if boot else (math.nan, math.nan)
    return DimensionEstimate(D, float(bs.std(ddof=1)) if boot > 1 else math.nan, ci, scales.tolist(), base, bs,
                             [int(round(math.exp(v))) for v in base], "box", False)


def separation_confidence(measure: DimensionEstimate, boundary: DimensionEstimate) -> float:
    """Fraction of paired bootstrap draws with measure dimension below boundary dimension."""
    k = min(len(measure.boot), len(boundary.boot))
    if k == 0:
        return math.nan
    a = measure.boot[:k]
    b = np.resize(boundary.boot, k)
    return float(np.mean(a < b))
