"""Corkscrew witnesses, Harnack chains and lower density sweeps."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .constants import lower_ahlfors_beta, unit_ball_measure
from .geometry.mesh import BoundaryMesh, DomainError, Side

SIDE_CODE = {Side.INTERIOR: 1, Side.EXTERIOR: -1, "interior": 1, "exterior": -1}


class WitnessNotFound(LookupError):
    """No point with positive clearance was found at grid resolution."""


@dataclass(frozen=True)
class Witness:
    point: np.ndarray
    clearance: float  # radius of the largest ball around point inside B(Q, r) on the given side
    distance: float  # dist(point, boundary)
    Q: np.ndarray
    r: float
    side: str

    @property
    def ratio(self) -> float:
        return self.clearance / self.r


def clearance(mesh: BoundaryMesh, P, Q, r: float, side) -> np.ndarray:
    """min(dist(A, boundary), r - |A - Q|) on the requested side, -inf elsewhere."""
    P = np.atleast_2d(P)
    code = SIDE_CODE[side]
    cls, d = mesh.classify_with_distance(P)
    c = np.minimum(d, r - np.linalg.norm(P - Q, axis=1))
    c[cls != code] = -np.inf
    return c, d


def _grid(n, spacing, r):
    k = int(math.floor(r / spacing))
    ax = np.arange(-k, k + 1) * spacing
    G = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return G[np.linalg.norm(G, axis=1) < r]


def find_corkscrew_point(mesh: BoundaryMesh, Q, r: float, side="interior", *,
                         resolution: float | None = None, starts: int = 8,
                         coarse: int | None = None) -> Witness:
    """Point of B(Q, r) on ``side`` with the largest clearance.

    A dyadic grid of spacing r/coarse is scanned first; the best ``starts``
    grid points are then refined by a compass search whose step halves down
    to ``resolution`` (default r/256).
    """
    Q = np.asarray(Q, dtype=float)
    if not r > 0:
        raise ValueError("r must be positive")
    if mesh.distance(Q[None, :])[0] > mesh.tol:
        raise DomainError("Q is not on the boundary")
    n = mesh.dim
    coarse = coarse or (16 if n == 2 else 8)
    resolution = resolution or r / 256
    h0 = r / coarse
    G = Q + _grid(n, h0, r)
    c, _ = clearance(mesh, G, Q, r, side)
    good = np.nonzero(c > 0)[0]
    if len(good) == 0:
        # thin regions may fall between grid nodes; retry once at double density
        G = Q + _grid(n, h0 / 2, r)
        c, _ = clearance(mesh, G, Q, r, side)
        good = np.nonzero(c > 0)[0]
        if len(good) == 0:
            raise WitnessNotFound(f"no {side} point with positive clearance in B(Q, {r:g})")
    order = good[np.argsort(-c[good], kind="stable")][:starts]
    X = G[order].copy()
    best = c[order].copy()
    step = np.full(len(X), h0 / 2)
    dirs = np.array([d for d in product((-1, 0, 1), repeat=n) if any(d)], dtype=float)
    while np.any(step >= resolution):
        act = step >= resolution
        cand = X[act][:, None, :] + step[act][:, None, None] * dirs[None]
        cc, _ = clearance(mesh, cand.reshape(-1, n), Q, r, side)
        cc = cc.reshape(len(cand), len(dirs))
        j = np.argmax(cc, axis=1)
        val = cc[np.arange(len(cand)), j]
        idx = np.nonzero(act)[0]
        moved = val > best[idx]
        X[idx[moved]] = cand[moved, j[moved]]
        best[idx[moved]] = val[moved]
        step[idx[~moved]] /= 2
    k = int(np.argmax(best))
    A = X[k]
    d = float(mesh.distance(A[None, :])[0])
    return Witness(point=A, clearance=float(best[k]), distance=d, Q=Q, r=float(r),
                   side=Side(side).value)


def _sample_seeds(seed, count):
    return np.random.SeedSequence(seed).spawn(count)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


@dataclass
class CorkscrewReport:
    M: float
    M_measured: float
    R: float
    r_min: float
    samples: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {
            "M": self.M, "M_measured": self.M_measured, "R": self.R, "r_min": self.r_min,
            "samples": self.samples, "failures": self.failures,
        }


def verify_corkscrew(mesh: BoundaryMesh, M: float, R: float, budget: int, seed: int, *,
                     r_min: float | None = None, workers: int = 1,
                     resolution_factor: float = 1 / 256) -> CorkscrewReport:
    """Sample (Q, r) pairs and test both corkscrew conditions with constant M."""
    if not M > 1:
        raise ValueError("M must exceed 1")
    r_min = r_min if r_min is not None else mesh.element_scale
    if not r_min < R:
        raise ValueError("R must exceed the smallest sampled radius")

    def one(ss):
        rng = np.random.default_rng(ss)
        pts, _ = mesh.sample_surface(1, rng)
        Q = pts[0]
        r = float(math.exp(rng.uniform(math.log(r_min), math.log(R))))
        rows = []
        for side in ("interior", "exterior"):
            try:
                w = find_corkscrew_point(mesh, Q, r, side, resolution=r * resolution_factor)
                rows.append((side, w))
            except WitnessNotFound:
                rows.append((side, None))
        return Q, r, rows

    results = _map(one, _sample_seeds(seed, budget), workers)
    worst = 0.0
    samples, failures = [], []
    for Q, r, rows in results:
        for side, w in rows:
            if w is None:
                failures.append({"Q": Q.tolist(), "r": r, "side": side, "reason": "not found"})
                continue
            worst = max(worst, r / w.clearance)
            samples.append({"Q": Q.tolist(), "r": r, "side": side, "witness": w.point.tolist(),
                            "clearance": w.clearance, "distance": w.distance, "clearance_ratio": w.ratio})
            if not w.clearance * M > r:
                failures.append({"Q": Q.tolist(), "r": r, "side": side, "reason": "clearance",
                                 "clearance_ratio": w.ratio})
    M_measured = float(np.nextafter(worst, np.inf)) if samples else float("inf")
    return CorkscrewReport(M=M, M_measured=M_measured, R=R, r_min=r_min, samples=samples,
                           failures=failures)


# Harnack chains

@dataclass
class HarnackReport:
    M: float
    M_chain: float
    samples: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    caveat: str = ("chains are searched among sampled interior points; a missing chain may "
                   "reflect sampling resolution rather than the domain")

    def to_dict(self):
        return {"M": self.M, "M_chain": self.M_chain, "samples": self.samples,
                "failures": self.failures, "caveat": self.caveat}


@dataclass(frozen=True)
class Chain:
    centers: np.ndarray
    radii: np.ndarray

    @property
    def length(self) -> int:
        return len(self.centers)


def harnack_chain(mesh: BoundaryMesh, X1, X2, nodes, min_radius: float = 0.0) -> Chain | None:
    """Shortest chain of interior balls B(p, dist(p)) linking X1 to X2.

    Consecutive balls must overlap; balls with radius below ``min_radius``
    are not used.  Returns None when the sampled points do not connect.
    """
    P = np.vstack([np.asarray(X1, float), np.asarray(X2, float), np.atleast_2d(nodes)])
    cls, d = mesh.classify_with_distance(P)
    keep = (cls == 1) & (d >= min_radius)
    keep[:2] = cls[:2] == 1
    idx = np.nonzero(keep)[0]
    if not (keep[0] and keep[1]):
        return None
    P, d = P[idx], d[idx]
    from scipy.spatial import cKDTree

    tree = cKDTree(P)
    pairs = tree.query_pairs(2 * d.max(), output_type="ndarray")
    if len(pairs) == 0:
        return None
    i, j = pairs[:, 0], pairs[:, 1]
    ok = np.linalg.norm(P[i] - P[j], axis=1) < d[i] + d[j]
    i, j = i[ok], j[ok]
    G = coo_matrix((np.ones(len(i)), (i, j)), shape=(len(P), len(P))).tocsr()
    dist, pred = shortest_path(G, directed=False, unweighted=True, indices=0,
                               return_predecessors=True)
    if not np.isfinite(dist[1]):
        return None
    path = [1]
    while path[-1] != 0:
        path.append(pred[path[-1]])
    path = path[::-1]
    return Chain(centers=P[path], radii=d[path])


def _interior_samples(mesh, center, radius, count, rng, max_rounds=50):
    n = mesh.dim
    out = []
    got = 0
    for _ in range(max_rounds):
        g = rng.normal(size=(count * 2, n))
        g /= np.linalg.norm(g, axis=1)[:, None]
        rad = radius * rng.random(count * 2) ** (1 / n)
        P = center + g * rad[:, None]
        cls = mesh.classify(P)
        P = P[cls == 1]
        out.append(P)
        got += len(P)
        if got >= count:
            break
    if not out:
        return np.empty((0, n))
    return np.vstack(out)[:count]


def verify_harnack_chain(mesh: BoundaryMesh, M: float, R: float, budget: int, seed: int, *,
                         r_min: float | None = None, n_nodes: int = 600,
                         workers: int = 1) -> HarnackReport:
    """Sample interior pairs near the boundary and search for Harnack chains.

    For each sample, X1 and X2 lie in B(Q, r) with clearance above
    eps = min(dist(X1), dist(X2)), k is the least integer with
    |X1 - X2| < 2^k eps, and a chain must use at most M k balls, each of
    diameter at least eps / M.
    """
    if not M > 1:
        raise ValueError("M must exceed 1")
    r_min = r_min if r_min is not None else 10 * mesh.element_scale

    def one(ss):
        rng = np.random.default_rng(ss)
        pts, _ = mesh.sample_surface(1, rng)
        Q = pts[0]
        r = float(math.exp(rng.uniform(math.log(r_min), math.log(R))))
        X = _interior_samples(mesh, Q, r, 64, rng)
        if len(X) < 2:
            return {"Q": Q.tolist(), "r": r, "status": "no interior pair"}
        d = mesh.distance(X)
        X = X[d > 0]
        d = d[d > 0]
        i, j = rng.choice(len(X), 2, replace=False)
        X1, X2 = X[i], X[j]
        eps = float(min(d[i], d[j]))
        sep = float(np.linalg.norm(X1 - X2))
        k = max(1, math.floor(math.log2(sep / eps)) + 1) if sep >= eps else 1
        nodes = _interior_samples(mesh, Q, 2 * r, n_nodes, rng)
        ch = harnack_chain(mesh, X1, X2, nodes, min_radius=eps / (2 * M))
        row = {"Q": Q.tolist(), "r": r, "X1": X1.tolist(), "X2": X2.tolist(), "eps": eps, "k": k}
        if ch is None:
            row.update(status="no chain")
        else:
            row.update(status="ok", chain_length=ch.length, min_ball_diameter=float(2 * ch.radii.min()))
        return row

    rows = _map(one, _sample_seeds(seed, budget), workers)
    samples = [r for r in rows if r["status"] == "ok"]
    failures = [r for r in rows if r["status"] == "no chain"]
    failures += [r for r in samples if r["chain_length"] > M * r["k"]]
    M_chain = max((r["chain_length"] / r["k"] for r in samples), default=float("nan"))
    return HarnackReport(M=M, M_chain=float(M_chain), samples=samples, failures=failures)


# lower density

@dataclass(frozen=True)
class RegularityRow:
    Q: tuple
    r: float
    ratio: float
    beta: float
    passed: bool | None  # None when skipped


def lower_regularity_sweep(mesh: BoundaryMesh, M: float, scales=None, budget: int = 100,
                           seed: int = 0, *, r_range=None, floor_factor: float = 10.0):
    """Compare sigma(Delta(Q, r)) / r^(n-1) with the corkscrew lower bound beta(n, M).

    With ``scales`` every sampled Q is paired with every listed r; with
    ``r_range = (lo, hi)`` each Q gets one log-uniform radius instead.
    Radii below ``floor_factor`` element scales are skipped with a warning.
    """
    n = mesh.dim
    beta = lower_ahlfors_beta(n, M)
    floor = floor_factor * mesh.element_scale
    rows = []
    skipped = 0
    for ss in _sample_seeds(seed, budget):
        rng = np.random.default_rng(ss)
        Q = mesh.sample_surface(1, rng)[0][0]
        if r_range is not None:
            lo, hi = r_range
            radii = [float(math.exp(rng.uniform(math.log(lo), math.log(hi))))]
        else:
            radii = list(scales)
        for r in radii:
            if r < floor:
                skipped += 1
                rows.append(RegularityRow(tuple(Q), r, float("nan"), beta, None))
                continue
            ratio = mesh.surface_ball(Q, r).measure / r ** (n - 1)
            rows.append(RegularityRow(tuple(Q), r, ratio, beta, bool(ratio >= beta)))
    if skipped:
        warnings.warn(f"{skipped} radii below the resolution floor {floor:.3g} were skipped",
                      stacklevel=2)
    return rows


@dataclass(frozen=True)
class ProjectionCheck:
    projected: float
    bound: float
    a_plus: np.ndarray
    a_minus: np.ndarray

    @property
    def passed(self) -> bool:
        return self.projected >= self.bound


def projection_check(mesh: BoundaryMesh, Q, r: float, M: float, raster: int = 512) -> ProjectionCheck:
    """Projected measure of Delta(Q, r) along the axis joining two opposite witnesses.

    The witnesses are taken at scale t r with t = M / (M + 1); the lower
    bound is omega_{n-1} (r / (M + 1))^(n-1).
    """
    Q = np.asarray(Q, float)
    n = mesh.dim
    t = M / (M + 1)
    ap = find_corkscrew_point(mesh, Q, t * r, "interior").point
    am = find_corkscrew_point(mesh, Q, t * r, "exterior").point
    axis = (ap - am) / np.linalg.norm(ap - am)
    from .geometry.frame import _rotation_for

    rot = _rotation_for(axis)
    clipped, t0, t1 = mesh.clip_ball(Q, r)
    idx = np.nonzero(clipped > 0)[0]
    X = mesh.vertices[mesh.elements[idx]] - Q
    if n == 2:
        a = X[:, 0] + t0[idx, None] * (X[:, 1] - X[:, 0])
        b = X[:, 0] + t1[idx, None] * (X[:, 1] - X[:, 0])
        pa, pb = a @ rot[0], b @ rot[0]
        lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
        projected = _interval_union(lo, hi)
    else:
        # raster the projected triangles; partially clipped ones are trimmed by
        # keeping only raster centres whose lift lies inside the ball
        Y = X @ rot.T
        proj = Y[..., :2]
        g = np.linspace(-r, r, raster + 1)
        cen = 0.5 * (g[1:] + g[:-1])
        cx, cy = np.meshgrid(cen, cen, indexing="ij")
        C = np.column_stack([cx.ravel(), cy.ravel()])
        covered = np.zeros(len(C), bool)
        for tri, y3 in zip(proj, Y):
            lo, hi = tri.min(0), tri.max(0)
            m = ~covered & np.all((C >= lo) & (C <= hi), axis=1)
            if not m.any():
                continue
            inside, lift = _bary_lift(C[m], tri, y3[:, 2])
            ok = inside & (np.sum(C[m] ** 2, axis=1) + lift ** 2 < r * r)
            covered[np.nonzero(m)[0][ok]] = True
        projected = covered.sum() * (2 * r / raster) ** 2
    bound = unit_ball_measure(n - 1) * (r / (M + 1)) ** (n - 1)
    return ProjectionCheck(projected=float(projected), bound=bound, a_plus=ap, a_minus=am)


def _interval_union(lo, hi) -> float:
    o = np.argsort(lo)
    lo, hi = lo[o], hi[o]
    total, cur_lo, cur_hi = 0.0, -np.inf, -np.inf
    for a, b in zip(lo, hi):
        if a > cur_hi:
            if cur_hi > cur_lo:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi > cur_lo:
        total += cur_hi - cur_lo
    return float(total)


def _bary_lift(P, tri, z):
    a, b, c = tri
    v0, v1 = b - a, c - a
    den = v0[0] * v1[1] - v0[1] * v1[0]
    if abs(den) < 1e-300:
        return np.zeros(len(P), bool), np.zeros(len(P))
    w = P - a
    u = (w[:, 0] * v1[1] - w[:, 1] * v1[0]) / den
    v = (v0[0] * w[:, 1] - v0[1] * w[:, 0]) / den
    inside = (u >= 0) & (v >= 0) & (u + v <= 1)
    return inside, z[0] + u * (z[1] - z[0]) + v * (z[2] - z[0])
