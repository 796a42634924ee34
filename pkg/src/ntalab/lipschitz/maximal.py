"""Maximal function of the projected surface measure and the vertical-jump sets F_k.

mu is the push-forward under pi of surface measure on Delta(Q, r).  On a
square raster the maximal function

    H(x) = sup over cubes I containing x of mu(I) / |I|

is approximated from below by a ladder of dyadic cubes with three shifted
grids per scale (any cube sits inside a shifted dyadic cube at most 6
times larger, so the ladder loses at most a factor 6^(n-1)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..geometry.frame import Frame
from ..geometry.mesh import BoundaryMesh
from . import _kernels as K
from .patch import TrapezoidPart, _run, _sorted_keys, extract_T, pad3, top_edge


def projected_measure_1d(x0, x1, mass, edges) -> np.ndarray:
    """Cell masses of uniform distributions on [x0, x1] (point masses where x0 == x1).

    Mass falling outside ``edges`` is dropped, except point masses which land in the end cells.
    """
    x0, x1, mass = (np.asarray(v, float) for v in (x0, x1, mass))
    edges = np.asarray(edges, float)
    lo, hi = np.minimum(x0, x1), np.maximum(x0, x1)
    L = hi - lo
    R = len(edges) - 1
    out = np.zeros(R)
    pt = L <= 1e-15 * max(1.0, float(np.max(np.abs(edges))))
    if np.any(pt):
        idx = np.clip(np.searchsorted(edges, lo[pt], side="right") - 1, 0, R - 1)
        out += np.bincount(idx, weights=mass[pt], minlength=R)
    lo, hi, L, m = lo[~pt], hi[~pt], L[~pt], mass[~pt]
    d = m / L
    a, b = np.maximum(lo, edges[0]), np.minimum(hi, edges[-1])
    keep = b > a
    a, b, d, m, L = a[keep], b[keep], d[keep], m[keep], L[keep]
    ia = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, R - 1)
    ib = np.clip(np.searchsorted(edges, b, side="left") - 1, 0, R - 1)
    same = ia == ib
    # a segment inside one cell contributes its clipped share directly, without the density
    out += np.bincount(ia[same], weights=m[same] * (b[same] - a[same]) / L[same], minlength=R)
    ia, ib, a, b, d = ia[~same], ib[~same], a[~same], b[~same], d[~same]
    out += np.bincount(ia, weights=d * (edges[ia + 1] - a), minlength=R)
    out += np.bincount(ib, weights=d * (b - edges[ib]), minlength=R)
    # full cells strictly between: a running density from a difference array
    mid = ib > ia + 1
    ia, ib, d = ia[mid], ib[mid], d[mid]
    diff = np.bincount(ia + 1, weights=d, minlength=R + 1) - np.bincount(ib, weights=d, minlength=R + 1)
    out += np.cumsum(diff)[:R] * np.diff(edges)
    return out


def maximal_function(mu: np.ndarray, cell: float, shifts: int = 3) -> np.ndarray:
    """Dyadic-ladder maximal function of raster masses ``mu`` (1-D or square 2-D)."""
    mu = np.asarray(mu, float)
    d = mu.ndim
    R = mu.shape[0]
    if d == 2 and mu.shape[1] != R:
        raise ValueError("raster must be square")
    S = np.zeros(tuple(s + 1 for s in mu.shape))
    if d == 1:
        S[1:] = np.cumsum(mu)
    else:
        S[1:, 1:] = mu.cumsum(0).cumsum(1)
    H = np.zeros_like(mu)
    idx = np.arange(R)
    j = 0
    while True:
        side = 1 << j
        offs = sorted({(t * side) // shifts for t in range(shifts)})
        for o in offs:
            start = o + np.floor_divide(idx - o, side) * side
            a = np.clip(start, 0, R)
            b = np.clip(start + side, 0, R)
            vol = (side * cell) ** d
            if d == 1:
                H = np.maximum(H, (S[b] - S[a]) / vol)
            else:
                tot = S[np.ix_(b, b)] - S[np.ix_(a, b)] - S[np.ix_(b, a)] + S[np.ix_(a, a)]
                H = np.maximum(H, tot / vol)
        if side >= 2 * R:
            break
        j += 1
    return H


def maximal_function_bruteforce_1d(mu: np.ndarray, cell: float) -> np.ndarray:
    """Sup over every raster-aligned interval containing each cell (O(R^2))."""
    S = np.concatenate([[0.0], np.cumsum(mu)])
    R = len(mu)
    H = np.zeros(R)
    for a in range(R):
        for b in range(a + 1, R + 1):
            v = (S[b] - S[a]) / ((b - a) * cell)
            H[a:b] = np.maximum(H[a:b], v)
    return H


@dataclass
class MaximalDiagnostics:
    half_extent: float       # raster covers [-L, L]^(n-1) in frame coordinates
    cell: float
    mu: np.ndarray
    H: np.ndarray
    N: float
    Lambda: np.ndarray
    mu_total: float
    lambda_mass: float
    bound: float             # 5^(n-1) mu_total / N + one cell
    bound_gamma: float | None  # 5^(n-1) gamma r^(n-1) / N + one cell
    s: float
    alpha: float
    scales: list             # s_k for k = 0..kmax
    Fk_cells: np.ndarray     # bit k set where some bad pair at scale k projects
    Fk_mass: list
    Fk_minus_lambda_mass: list
    ladder_factor: float     # the ladder under-estimates H by at most this factor
    notes: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.mu.ndim + 1

    @property
    def passed(self) -> bool:
        return self.lambda_mass <= self.bound

    def summary(self) -> dict:
        return {
            "N": self.N, "cell": self.cell, "raster": list(self.mu.shape), "mu_total": self.mu_total,
            "H_max": float(self.H.max()), "lambda_mass": self.lambda_mass, "bound": self.bound,
            "bound_gamma": self.bound_gamma, "passed": self.passed, "ladder_factor": self.ladder_factor,
            "Fk_mass": self.Fk_mass, "Fk_minus_lambda_mass": self.Fk_minus_lambda_mass,
            "scales": self.scales, "notes": self.notes,
        }


def _project_mu(mesh: BoundaryMesh, frame: Frame, edges, per_element: int = 16):
    """Raster masses of pi_#(sigma restricted to Delta(Q, r)).

    In the plane the shadow of each clipped segment is spread exactly; in space
    by sub-triangle samples.
    """
    clipped, t0, t1 = mesh.clip_ball(frame.Q, frame.r)
    idx = np.nonzero(clipped > 0)[0]
    n = frame.dim
    R = len(edges) - 1
    if n == 2:
        X = mesh.vertices[mesh.elements[idx]]
        A = X[:, 0] + t0[idx, None] * (X[:, 1] - X[:, 0])
        B = X[:, 0] + t1[idx, None] * (X[:, 1] - X[:, 0])
        xa, xb = frame.pi(A)[:, 0], frame.pi(B)[:, 0]
        return projected_measure_1d(xa, xb, clipped[idx], edges), float(clipped[idx].sum())
    from ..geometry.mesh import _element_samples
    X = mesh.vertices[mesh.elements[idx]]
    pts, _ = _element_samples(X, per_element)
    inside = np.linalg.norm(pts - frame.Q, axis=2) < frame.r
    cnt = inside.sum(axis=1)
    w = np.where(inside, (clipped[idx] / np.maximum(cnt, 1))[:, None], 0.0)
    # an element meeting the ball with no interior sample puts its mass at its centroid
    lone = cnt == 0
    w[lone, 0] = clipped[idx][lone]
    pts[lone, 0] = X[lone].mean(axis=1)
    P = frame.pi(pts.reshape(-1, 3))
    ix = np.clip(np.searchsorted(edges, P[:, 0], side="right") - 1, 0, R - 1)
    iy = np.clip(np.searchsorted(edges, P[:, 1], side="right") - 1, 0, R - 1)
    mu = np.zeros((R, R))
    np.add.at(mu, (ix, iy), w.ravel())
    return mu, float(clipped[idx].sum())


def scale_masks(T: TrapezoidPart, T_E: np.ndarray, alpha: float, workers: int = 1) -> np.ndarray:
    """Per top-edge sample, bit k marks a pair y, z in T_E with z in y + cone and s_k <= f(z)-f(y) <= s_(k-1)."""
    S_all = pad3(T.samples)
    sel = np.nonzero(T_E)[0]
    S = np.ascontiguousarray(S_all[sel])
    order, keys = _sorted_keys(S)
    targets = np.arange(len(S), dtype=np.int64)
    out = np.zeros(len(S), dtype=np.int64)
    umax = float(S[:, 2].max()) if len(S) else 0.0
    _run(K.cone_scale_mask, len(S), workers,
         (S, order, keys, targets, T.h, umax, T.trapezoid.side, math.log(alpha)), out)
    return out


def maximal_diagnostics(mesh: BoundaryMesh, frame: Frame, schedule=None, raster: int = 256, *,
                        N: float | None = None, alpha: float | None = None, gamma: float | None = None,
                        h: float | None = None, T: TrapezoidPart | None = None, T_E: np.ndarray | None = None,
                        workers: int = 1) -> MaximalDiagnostics:
    """Lambda = {H >= N}, its raster mass against the weak-type bound, and the F_k flags.

    N, alpha and gamma default to the schedule's values; h defaults to the
    schedule's h0 when no trapezoid part is supplied.
    """
    n = frame.dim
    s = frame.side
    notes = []
    if N is None:
        if schedule is None:
            raise ValueError("give a schedule or N")
        N = float(schedule.N)
    if alpha is None:
        alpha = float(schedule.alpha) if schedule is not None else 4 * frame.M * math.sqrt(n - 1)
    if gamma is None and schedule is not None:
        gamma = float(schedule.gamma)
    # raster over the shadow of Delta(Q, r) and 2 I_0
    qx = frame.pi(frame.Q[None, :])[0]
    L = max(s, float(np.max(np.abs(qx))) + frame.r) * (1 + 1e-9)
    edges = np.linspace(-L, L, raster + 1)
    cell = 2 * L / raster
    per_element = 1
    if n == 3:
        # sub-triangles no wider than half a raster cell
        q = math.ceil(2 * mesh.element_scale / cell)
        if q > 32:
            msg = (f"raster cell {cell:.3g} is too fine for elements of size {mesh.element_scale:.3g}; "
                   "projected masses are spread at 1/32 of an element")
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
        per_element = min(q, 32) ** 2
    mu, total = _project_mu(mesh, frame, edges, per_element)
    H = maximal_function(mu, cell)
    Lam = H >= N
    area = cell ** (n - 1)
    lam_mass = float(Lam.sum()) * area
    bound = 5 ** (n - 1) * total / N + area
    bound_g = 5 ** (n - 1) * gamma * frame.r ** (n - 1) / N + area if gamma is not None else None
    # F_k flags from top-edge pairs
    if T is None:
        if h is None:
            if schedule is None:
                raise ValueError("give h, a trapezoid part, or a schedule")
            h = float(schedule.h0)
        T = extract_T(mesh, frame, h)
    if T_E is None:
        T_E = top_edge(T, workers)
    masks = scale_masks(T, T_E, alpha, workers)
    y = T.samples[T_E][:, :-1]
    flags = np.zeros(mu.shape, dtype=np.int64)
    cells_idx = tuple(np.clip(np.searchsorted(edges, y[:, i], side="right") - 1, 0, raster - 1) for i in range(n - 1))
    np.bitwise_or.at(flags, cells_idx, masks)
    kmax = int(masks.max()).bit_length() - 1 if len(masks) and masks.max() > 0 else -1
    scales, fk, fk_free = [], [], []
    for k in range(kmax + 1):
        on = (flags >> k) & 1 == 1
        scales.append(s / alpha ** k)
        fk.append(float(on.sum()) * area)
        fk_free.append(float((on & ~Lam).sum()) * area)
    return MaximalDiagnostics(half_extent=L, cell=cell, mu=mu, H=H, N=float(N), Lambda=Lam, mu_total=total,
                              lambda_mass=lam_mass, bound=bound, bound_gamma=bound_g, s=s, alpha=float(alpha),
                              scales=scales, Fk_cells=flags, Fk_mass=fk, Fk_minus_lambda_mass=fk_free,
                              ladder_factor=6.0 ** (n - 1), notes=notes)
