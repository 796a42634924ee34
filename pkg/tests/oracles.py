"""Quadratic-time reference implementations used as test oracles."""
import numpy as np
import sympy as sp

from ntalab.geometry.mesh import _element_samples
from ntalab.lipschitz.patch import Trapezoid, TrapezoidPart


def part_from_pieces(frame, h, pieces, per_piece=4, cells=True):
    """A TrapezoidPart over arbitrary local pieces (segments or triangles)."""
    P = np.asarray(pieces, float)
    if cells:
        pts, rel, C = _element_samples(P, per_piece, cells=True)
    else:
        pts, rel = _element_samples(P, per_piece)
    m = pts.shape[1]
    if P.shape[1] == 2:
        meas = np.linalg.norm(P[:, 1] - P[:, 0], axis=1)
        cosv = np.abs(P[:, 1, 0] - P[:, 0, 0]) / meas
    else:
        nrm = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        meas = 0.5 * np.linalg.norm(nrm, axis=1)
        cosv = np.abs(nrm[:, 2]) / (2 * meas)
    return TrapezoidPart(frame=frame, trapezoid=Trapezoid.of(frame, h), pieces=P, source=np.arange(len(P)),
                         samples=pts.reshape(-1, P.shape[2]), sample_piece=np.repeat(np.arange(len(P)), m),
                         weights=(meas[:, None] * rel).ravel(), cos_vertical=np.repeat(cosv, m),
                         tol=1e-9 * frame.r, cells=C.reshape((-1,) + P.shape[1:]) if cells else None)


def heights_over(pieces, x):
    """(S, K) height of each piece above each horizontal point, NaN outside its shadow."""
    P = np.asarray(pieces, float)
    x = np.atleast_2d(x)
    if P.shape[1] == 2:
        xa, xb = P[None, :, 0, 0], P[None, :, 1, 0]
        ua, ub = P[None, :, 0, 1], P[None, :, 1, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (x[:, :1] - xa) / (xb - xa)
            H = ua + t * (ub - ua)
        H[(t < 0) | (t > 1) | ~np.isfinite(t)] = np.nan
        return H
    A = P[:, 0, :2]
    B = P[:, 1, :2] - A
    C = P[:, 2, :2] - A
    det = B[:, 0] * C[:, 1] - B[:, 1] * C[:, 0]
    d = x[:, None, :] - A[None]
    v = (d[..., 0] * C[None, :, 1] - d[..., 1] * C[None, :, 0]) / det
    w = (B[None, :, 0] * d[..., 1] - B[None, :, 1] * d[..., 0]) / det
    H = P[None, :, 0, 2] + v * (P[None, :, 1, 2] - P[None, :, 0, 2]) + w * (P[None, :, 2, 2] - P[None, :, 0, 2])
    H[(v < 0) | (w < 0) | (v + w > 1)] = np.nan
    return H


def top_edge_bruteforce(T):
    """Samples with no piece strictly above them (beyond the part's tolerance)."""
    y = T.samples
    H = heights_over(T.pieces, y[:, :-1])
    above = np.where(np.isnan(H), False, H > y[:, -1:] + T.tol)
    return ~above.any(axis=1)


def cone_filter_bruteforce(T, among=None, h=None):
    """y survives when no sample z has f(z) - f(y) > 0 and f(z) - f(y) >= h |pi(z) - pi(y)|."""
    h = T.h if h is None else h
    y = T.samples
    among = np.ones(len(y), bool) if among is None else among
    du = y[None, :, -1] - y[:, None, -1]
    dx = np.linalg.norm(y[None, :, :-1] - y[:, None, :-1], axis=2)
    blocked = ((du > 0) & (du >= h * dx)).any(axis=1)
    return among & ~blocked


def segment_envelope(cells, x, h):
    """max over planar segments of max_t (u(t) - h |x - x(t)|), evaluated exactly.

    Along a segment the objective is piecewise linear in t with one kink where
    x(t) = x, so the maximum sits at an end or at that kink.
    """
    C = np.asarray(cells, float)
    x = np.asarray(x, float)[:, None]
    x0, u0, x1, u1 = C[None, :, 0, 0], C[None, :, 0, 1], C[None, :, 1, 0], C[None, :, 1, 1]
    best = np.maximum(u0 - h * np.abs(x - x0), u1 - h * np.abs(x - x1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (x - x0) / (x1 - x0)
    ok = (t >= 0) & (t <= 1) & np.isfinite(t)
    kink = np.where(ok, u0 + t * (u1 - u0), -np.inf)
    return np.maximum(best, kink).max(axis=1)


def maximal_bruteforce_2d(mu, cell):
    """Sup over every raster-aligned square containing each cell."""
    R = mu.shape[0]
    S = np.zeros((R + 1, R + 1))
    S[1:, 1:] = mu.cumsum(0).cumsum(1)
    H = np.zeros_like(mu)
    for k in range(1, R + 1):
        for a in range(R - k + 1):
            for b in range(R - k + 1):
                v = (S[a + k, b + k] - S[a, b + k] - S[a + k, b] + S[a, b]) / (k * cell) ** 2
                blk = H[a:a + k, b:b + k]
                np.maximum(blk, v, out=blk)
    return H


def zigzag(frame, rng, K):
    """K segments of a random polyline spanning the trapezoid."""
    s = frame.side
    lo, hi = -frame.b_height + s / 4, frame.a_height - s / 4
    x = rng.uniform(-s / 2, s / 2, K + 1)
    u = rng.uniform(lo, hi, K + 1)
    return np.stack([np.column_stack([x[:-1], u[:-1]]), np.column_stack([x[1:], u[1:]])], axis=1)


def soup(frame, rng, K):
    """K random triangles scattered through the trapezoid."""
    s = frame.side
    lo, hi = -frame.b_height + s / 4, frame.a_height - s / 4
    c = np.column_stack([rng.uniform(-s / 2, s / 2, (K, 2)), rng.uniform(lo, hi, K)])
    return c[:, None, :] + rng.normal(scale=s / 8, size=(K, 3, 3))


def schedule_oracle(n, M, gamma, eps):
    """Hand evaluation of the construction's formulas in sympy."""
    M, gamma, eps = sp.Rational(M), sp.Rational(gamma), sp.Rational(eps)
    omega = 2 if n == 2 else sp.pi
    root = sp.sqrt(n - 1)
    beta = omega / (M + 1) ** (n - 1)
    N = 2 * 5 ** (n - 1) * gamma / eps
    out = dict(beta=beta, s_ratio=1 / (2 * M * root), h0=16 * M * root, psi=(8 * M * root) ** (1 - n), N=N,
               alpha=sp.Max(4 * M * root, 12 * M), zeta=4 * sp.ceiling(4 ** (n - 1) / beta * N),
               m0=sp.ceiling(32 ** (n - 1) / beta * N))
    out["C1_exp"] = out["m0"] + 3
    out["C2_coef"] = N * M / beta
    out["C2_exp"] = out["m0"] + 2 * n + 3
    out["P_exp"] = out["C2_exp"] + sp.ceiling(sp.log(out["C2_coef"], 2))
    out["delta"] = (eps / 2) / (gamma + 1 / (M * root)) * omega / (6 * out["zeta"] * M) ** (n - 1)
    return out
