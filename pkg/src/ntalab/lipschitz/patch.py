"""Approximate a boundary patch from inside by a Lipschitz graph domain.

All geometry is in the local coordinates of a ``Frame``: x = pi(y) is the
horizontal part and u = f(y) the height along the a-b axis.  The region

    Trap = {-b <= u <= a and |x_i| + (a - u)/h <= s/2 for all i}

is the set of points whose upward cone of slope h meets the plane u = a
inside the top cube.  T is the boundary inside Trap; T_E keeps points with
nothing of T directly above them, and T_Gamma keeps points whose open cone
misses T.  The graph F is the lower cone envelope of T_Gamma.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..corkscrew import find_corkscrew_point
from ..geometry.frame import Frame, GeometryError, build_frame
from ..geometry.mesh import BoundaryMesh, Side, _element_samples
from . import _kernels as K


class ConstructionError(RuntimeError):
    """The patch cannot be built for this frame and slope."""


# ---------------------------------------------------------------- frame


def patch_frame(mesh: BoundaryMesh, Q, r: float, M: float, rel_tol: float = 1e-9) -> Frame:
    """Frame from interior and exterior corkscrew points at scale r/2.

    Both witnesses must have clearance at least r/2M (up to ``rel_tol``),
    so that B(a, r/2M) and B(b, r/2M) avoid the boundary.
    """
    Q = np.asarray(Q, dtype=float)
    need = r / (2 * M) * (1 - rel_tol)
    pts = {}
    for side in (Side.INTERIOR, Side.EXTERIOR):
        w = find_corkscrew_point(mesh, Q, r / 2, side)
        if w.clearance < need:
            raise GeometryError(
                f"{side.value} corkscrew point at scale r/2 has clearance {w.clearance:.6g} < r/2M = {r / (2 * M):.6g}")
        pts[side] = w.point
    return build_frame(mesh, Q, r, pts[Side.INTERIOR], pts[Side.EXTERIOR], M)


# ---------------------------------------------------------------- trapezoid


@dataclass(frozen=True)
class Trapezoid:
    a_height: float
    b_height: float
    side: float
    h: float
    dim: int

    @classmethod
    def of(cls, frame: Frame, h: float) -> "Trapezoid":
        if not h > 0:
            raise ValueError("slope h must be positive")
        return cls(frame.a_height, frame.b_height, frame.side, float(h), frame.dim)

    def halfspaces(self):
        """Rows (normal, offset) with normal . p <= offset, p = (x, u)."""
        n = self.dim
        N, c = [], []
        e = np.zeros(n)
        e[-1] = 1.0
        N.append(-e)
        c.append(self.b_height)
        N.append(e.copy())
        c.append(self.a_height)
        for i in range(n - 1):
            for sgn in (1.0, -1.0):
                v = np.zeros(n)
                v[i] = sgn
                v[-1] = -1.0 / self.h
                N.append(v)
                c.append(self.side / 2 - self.a_height / self.h)
        return np.array(N), np.array(c)

    def contains(self, local, tol: float = 0.0) -> np.ndarray:
        N, c = self.halfspaces()
        L = np.atleast_2d(local)
        return np.all(L @ N.T <= c + tol, axis=1)

    def side_height(self, x) -> np.ndarray:
        """Lower edge a - h (s/2 - |x|_inf) of the slanted walls."""
        x = np.atleast_2d(x)
        return self.a_height - self.h * (self.side / 2 - np.max(np.abs(x), axis=1))


def _clip_segment(p, q, N, c):
    t0, t1 = 0.0, 1.0
    d = q - p
    for nv, cv in zip(N, c):
        num = cv - nv @ p
        den = nv @ d
        if den == 0.0:
            if num < 0:
                return None
            continue
        t = num / den
        if den > 0:
            t1 = min(t1, t)
        else:
            t0 = max(t0, t)
        if t0 >= t1:
            return None
    return np.array([p + t0 * d, p + t1 * d])


def _clip_polygon(poly, N, c):
    for nv, cv in zip(N, c):
        if len(poly) == 0:
            return poly
        out = []
        vals = [cv - nv @ v for v in poly]
        for i in range(len(poly)):
            P, Qv = poly[i], poly[(i + 1) % len(poly)]
            a, b = vals[i], vals[(i + 1) % len(poly)]
            if a >= 0:
                out.append(P)
            if (a >= 0) != (b >= 0):
                out.append(P + (a / (a - b)) * (Qv - P))
        poly = out
    return poly


def clip_to_trapezoid(X: np.ndarray, trap: Trapezoid):
    """Intersect local simplices (E, k, n) with the trapezoid.

    Returns pieces (K, k, n) and the index of the source simplex of each.
    """
    N, c = trap.halfspaces()
    vals = X @ N.T - c  # (E, k, planes)
    inside_all = np.all(vals <= 0, axis=(1, 2))
    outside_some = np.any(np.all(vals > 0, axis=1), axis=1)
    pieces = [X[inside_all]]
    src = [np.nonzero(inside_all)[0]]
    extra, extra_src = [], []
    for e in np.nonzero(~inside_all & ~outside_some)[0]:
        if X.shape[1] == 2:
            seg = _clip_segment(X[e, 0], X[e, 1], N, c)
            if seg is not None:
                extra.append(seg)
                extra_src.append(e)
        else:
            poly = _clip_polygon(list(X[e]), N, c)
            for j in range(1, len(poly) - 1):
                extra.append(np.array([poly[0], poly[j], poly[j + 1]]))
                extra_src.append(e)
    if extra:
        pieces.append(np.array(extra))
        src.append(np.array(extra_src))
    P = np.concatenate(pieces) if pieces else np.empty((0,) + X.shape[1:])
    S = np.concatenate(src).astype(np.int64)
    meas = _measures(P)
    keep = meas > 1e-14 * max(trap.side, 1e-300) ** (trap.dim - 1)
    return P[keep], S[keep]


def _measures(P):
    if len(P) == 0:
        return np.empty(0)
    if P.shape[1] == 2:
        return np.linalg.norm(P[:, 1] - P[:, 0], axis=1)
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    return 0.5 * np.linalg.norm(np.atleast_2d(cr), axis=1)


def _vertical_cosine(P):
    """|n_u| of each piece: the ratio of projected to surface measure."""
    if P.shape[1] == 2:
        d = P[:, 1] - P[:, 0]
        return np.abs(d[:, 0]) / np.linalg.norm(d, axis=1)
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    return np.abs(cr[:, 2]) / np.linalg.norm(cr, axis=1)


def _gradient_norm(P):
    """Slope of each piece as a graph over its shadow (inf when vertical)."""
    if P.shape[1] == 2:
        d = P[:, 1] - P[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d[:, 0] != 0, np.abs(d[:, 1]) / np.abs(d[:, 0]), np.inf)
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(cr[:, 2] != 0, np.hypot(cr[:, 0], cr[:, 1]) / np.abs(cr[:, 2]), np.inf)


def pad3(local: np.ndarray) -> np.ndarray:
    """(…, n) local coordinates to (…, 3) as (x1, x2, u) with x2 = 0 in the plane."""
    if local.shape[-1] == 3:
        return np.ascontiguousarray(local, dtype=float)
    out = np.zeros(local.shape[:-1] + (3,))
    out[..., 0] = local[..., 0]
    out[..., 2] = local[..., 1]
    return out


@dataclass
class TrapezoidPart:
    """T: boundary pieces inside the trapezoid with their sample points."""

    frame: Frame
    trapezoid: Trapezoid
    pieces: np.ndarray        # (K, k, n) local
    source: np.ndarray        # (K,) mesh element index
    samples: np.ndarray       # (S, n) local
    sample_piece: np.ndarray  # (S,)
    weights: np.ndarray       # (S,) surface measure per sample
    cos_vertical: np.ndarray  # (S,) projected / surface measure
    tol: float
    cells: np.ndarray | None = None  # (S, k, n) sub-simplex each sample stands for

    @property
    def h(self) -> float:
        return self.trapezoid.h

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def gap_violations(self, tol: float | None = None) -> int:
        """Pieces leaving -b + s/4 <= u <= a - s/4 (impossible for true corkscrew points)."""
        tol = self.tol if tol is None else tol
        s = self.trapezoid.side
        u = self.pieces[..., -1]
        lo = -self.trapezoid.b_height + s / 4
        hi = self.trapezoid.a_height - s / 4
        return int(np.sum(np.any((u < lo - tol) | (u > hi + tol), axis=1)))


def extract_T(mesh: BoundaryMesh, frame: Frame, h: float, samples_per_piece: int = 16,
              tol: float | None = None) -> TrapezoidPart:
    """Clip the boundary to the trapezoid of slope h and sample the pieces."""
    trap = Trapezoid.of(frame, h)
    X = frame.to_local(mesh.vertices)[mesh.elements]
    # cheap rejection by distance from the frame origin
    reach = max(frame.a_height, frame.b_height) + frame.side * math.sqrt(frame.dim - 1)
    near = np.min(np.linalg.norm(X, axis=2), axis=1) <= reach + mesh.element_scale
    idx = np.nonzero(near)[0]
    P, src = clip_to_trapezoid(X[idx], trap)
    if len(P) == 0:
        raise ConstructionError("no boundary inside the trapezoid (degenerate frame)")
    pts, rel, cells = _element_samples(P, samples_per_piece, cells=True)
    m = pts.shape[1]
    weights = (_measures(P)[:, None] * rel).ravel()
    cosv = np.repeat(_vertical_cosine(P), m)
    tol = 1e-9 * frame.r if tol is None else tol
    return TrapezoidPart(frame=frame, trapezoid=trap, pieces=P, source=idx[src],
                         samples=pts.reshape(-1, frame.dim), sample_piece=np.repeat(np.arange(len(P)), m),
                         cells=cells.reshape((-1,) + P.shape[1:]),
                         weights=weights, cos_vertical=cosv, tol=tol)


# ---------------------------------------------------------------- filters


def _run(kernel, count: int, workers: int, args, out):
    """Run a range kernel over [0, count) split into ``workers`` chunks."""
    if workers <= 1 or count < 2048:
        kernel(*args, 0, count, out)
        return out
    edges = np.linspace(0, count, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as ex:
        futs = [ex.submit(kernel, *args, int(a), int(b), out) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        for f in futs:
            f.result()
    return out


def _piece_bins(T: TrapezoidPart):
    P = pad3(T.pieces)
    s = T.trapezoid.side
    nbins = int(min(4096, max(1, 4 * math.sqrt(len(P)))))
    lo = -s / 2 - 1e-9 * s
    width = (s + 2e-9 * s) / nbins
    pad = 1e-9 * s
    counts, items = K.bin_pieces(P[:, :, 0].min(axis=1) - pad, P[:, :, 0].max(axis=1) + pad, lo, width, nbins)
    return P, counts, items, lo, width, nbins


def top_edge(T: TrapezoidPart, workers: int = 1) -> np.ndarray:
    """Mask of samples with no piece of T strictly above them (the top edge T_E)."""
    P, counts, items, lo, width, nbins = _piece_bins(T)
    S = pad3(T.samples)
    out = np.zeros(len(S), dtype=np.bool_)
    _run(K.occluded, len(S), workers, (S, P, counts, items, lo, width, nbins, T.tol), out)
    return ~out


def _sorted_keys(S):
    order = np.argsort(S[:, 0], kind="mergesort").astype(np.int64)
    return order, np.ascontiguousarray(S[order, 0])


def cone_filter(T: TrapezoidPart, among: np.ndarray | None = None, h: float | None = None,
                workers: int = 1) -> np.ndarray:
    """Mask of samples y (restricted to ``among``) whose upward cone holds no other sample of T."""
    h = T.h if h is None else float(h)
    if not h > 0:
        raise ValueError("slope h must be positive")
    S = pad3(T.samples)
    among = np.ones(len(S), bool) if among is None else np.asarray(among, bool)
    targets = np.nonzero(among)[0].astype(np.int64)
    order, keys = _sorted_keys(S)
    umax = float(S[:, 2].max())
    blocked = np.zeros(len(targets), dtype=np.bool_)
    _run(K.cone_blocked, len(targets), workers, (S, order, keys, targets, h, umax), blocked)
    keep = np.zeros(len(S), bool)
    keep[targets[~blocked]] = True
    return keep


# ---------------------------------------------------------------- graph and domain


@dataclass
class LipschitzPatch:
    frame: Frame
    h: float
    T: TrapezoidPart
    T_E: np.ndarray        # sample mask
    T_Gamma: np.ndarray    # sample mask
    nodes: np.ndarray      # (K, n-1) graph nodes in I_0
    F: np.ndarray          # clamped envelope at nodes
    G: np.ndarray          # lower boundary of Omega_L at nodes: max(F, slanted wall)
    grid_shape: tuple | None
    omega_L: BoundaryMesh
    common_measure: float  # sigma(T_Gamma)
    projections: dict
    checks: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.frame.dim

    def F_at(self, x) -> np.ndarray:
        return _interp(self, self.F, x)

    def _as_points(self, x):
        return np.asarray(x, float).reshape(-1, self.dim - 1)

    def G_at(self, x) -> np.ndarray:
        """Lower boundary of Omega_L: interpolated F against the exact slanted wall."""
        x = self._as_points(x)
        return np.maximum(self.F_at(x), self.T.trapezoid.side_height(x))

    def grad_G_at(self, x) -> np.ndarray:
        x = self._as_points(x)
        trap = self.T.trapezoid
        gF = _interp_grad(self, self.F, x)
        wall = trap.side_height(x)
        k = np.argmax(np.abs(x), axis=1)
        gW = np.zeros_like(x)
        gW[np.arange(len(x)), k] = trap.h * np.sign(x[np.arange(len(x)), k])
        use_wall = wall > self.F_at(x)
        return np.where(use_wall[:, None], gW, gF)

    def summary(self) -> dict:
        s = self.frame.side
        r = self.frame.r
        n = self.dim
        return {
            "h": self.h, "side": s, "r": r, "a_height": self.frame.a_height, "b_height": self.frame.b_height,
            "samples": int(self.T.n_samples), "pieces": int(len(self.T.pieces)),
            "T_E": int(self.T_E.sum()), "T_Gamma": int(self.T_Gamma.sum()),
            "sigma_T": self.T.measure, "sigma_T_Gamma": self.common_measure,
            "sigma_T_Gamma_over_r": self.common_measure / r ** (n - 1),
            **{k: float(v) for k, v in self.projections.items()},
            **self.checks,
        }


def _grid_locate(patch, x):
    m1 = patch.grid_shape[0] - 1
    s = patch.frame.side
    t = (np.atleast_2d(x) + s / 2) / s * m1
    i = np.clip(np.floor(t[:, 0]).astype(int), 0, m1 - 1)
    j = np.clip(np.floor(t[:, 1]).astype(int), 0, m1 - 1)
    fx, fy = t[:, 0] - i, t[:, 1] - j
    return i, j, fx, fy, m1


def _interp(patch, vals, x):
    if patch.dim == 2:
        return np.interp(np.atleast_1d(np.asarray(x, float)).ravel(), patch.nodes[:, 0], vals)
    i, j, fx, fy, m1 = _grid_locate(patch, x)
    V = vals.reshape(m1 + 1, m1 + 1)
    v00, v10, v11, v01 = V[i, j], V[i + 1, j], V[i + 1, j + 1], V[i, j + 1]
    # cells are split along the (i, j)-(i+1, j+1) diagonal
    lower = fx >= fy
    out = np.where(lower, v00 + fx * (v10 - v00) + fy * (v11 - v10),
                   v00 + fy * (v01 - v00) + fx * (v11 - v01))
    return out


def _interp_grad(patch, vals, x):
    if patch.dim == 2:
        xs = np.atleast_1d(np.asarray(x, float)).ravel()
        X = patch.nodes[:, 0]
        k = np.clip(np.searchsorted(X, xs, side="right") - 1, 0, len(X) - 2)
        return ((vals[k + 1] - vals[k]) / (X[k + 1] - X[k]))[:, None]
    i, j, fx, fy, m1 = _grid_locate(patch, x)
    dx = patch.frame.side / m1
    V = vals.reshape(m1 + 1, m1 + 1)
    v00, v10, v11, v01 = V[i, j], V[i + 1, j], V[i + 1, j + 1], V[i, j + 1]
    lower = fx >= fy
    gx = np.where(lower, v10 - v00, v11 - v01) / dx
    gy = np.where(lower, v11 - v10, v01 - v00) / dx
    return np.stack([gx, gy], axis=1)


def lower_envelope(T: TrapezoidPart, keep: np.ndarray, nodes: np.ndarray, h: float,
                   workers: int = 1) -> np.ndarray:
    """max over y in the kept set of f(y) - h |x - pi(y)| at each node (unclamped).

    Pieces whose samples are all kept enter as whole pieces; elsewhere
    each kept sample contributes the sub-cell it stands for.
    """
    per = np.bincount(T.sample_piece, minlength=len(T.pieces))
    kept_per = np.bincount(T.sample_piece[keep], minlength=len(T.pieces))
    whole = kept_per == per
    loose = keep & ~whole[T.sample_piece]
    N3 = pad3(np.hstack([nodes, np.zeros((len(nodes), 1))]))
    out = np.full(len(nodes), -np.inf)
    if T.cells is None:
        P = T.pieces[whole]
        _run(K.envelope_points, len(N3), workers, (N3, pad3(T.samples[loose]), h), out)
    else:
        P = np.concatenate([T.pieces[whole], T.cells[loose]])
    if len(P):
        # the maximum over a simplex sits at x itself only when its slope is <= h
        flat = pad3(P[_gradient_norm(P) <= h])
        P = pad3(P)
        if T.frame.dim == 3 and len(flat):
            _run(K.envelope_triangles, len(N3), workers, (N3, flat), out)
        edges = ((0, 1),) if T.frame.dim == 2 else ((0, 1), (1, 2), (2, 0))
        for a, b in edges:
            _run(K.envelope_segments, len(N3), workers, (N3, P[:, a].copy(), P[:, b].copy(), h), out)
    return out


def graph_and_domain(T: TrapezoidPart, T_E: np.ndarray, T_Gamma: np.ndarray, h: float | None = None,
                     grid: int | None = None, mesh: BoundaryMesh | None = None,
                     workers: int = 1, raster: int = 512) -> LipschitzPatch:
    """Build F, the graph domain Omega_L and the measurements of the patch."""
    h = T.h if h is None else float(h)
    if not T_Gamma.any():
        raise ConstructionError("cone-filtered set is empty")
    frame = T.frame
    n = frame.dim
    s = frame.side
    an, bn = frame.a_height, frame.b_height
    trap = T.trapezoid
    if n == 2:
        m = grid or 2048
        xs = [np.linspace(-s / 2, s / 2, m + 1), [0.0]]
        ends = [T.pieces[..., 0].ravel(), T.samples[T_Gamma, 0]]
        if T.cells is not None:
            ends.append(T.cells[T_Gamma][..., 0].ravel())
        ends = np.concatenate(ends)
        xs.append(ends[np.abs(ends) < s / 2])
        xs = np.unique(np.concatenate(xs))
        xs = xs[np.concatenate([[True], np.diff(xs) > 1e-9 * s])]
        nodes = xs[:, None]
        shape = None
    else:
        m = grid or 64
        g = np.linspace(-s / 2, s / 2, m + 1)
        X1, X2 = np.meshgrid(g, g, indexing="ij")
        nodes = np.stack([X1.ravel(), X2.ravel()], axis=1)
        shape = (m + 1, m + 1)
    raw = lower_envelope(T, T_Gamma, nodes, h, workers)
    F = np.clip(raw, -bn + s / 4, an - s / 4)
    G = np.maximum(F, trap.side_height(nodes))
    omega = _omega_mesh(frame, nodes, G, shape)
    proj = _projections(T, T_E, T_Gamma, raster)
    patch = LipschitzPatch(frame=frame, h=h, T=T, T_E=T_E, T_Gamma=T_Gamma, nodes=nodes, F=F, G=G,
                           grid_shape=shape, omega_L=omega,
                           common_measure=float(T.weights[T_Gamma].sum()), projections=proj)
    patch.checks = patch_checks(patch, mesh)
    return patch


def _omega_mesh(frame: Frame, nodes, G, shape) -> BoundaryMesh:
    s = frame.side
    top = frame.a_height + s / 4
    if frame.dim == 2:
        x = nodes[:, 0]
        bottom = np.stack([x, G], axis=1)
        loc = np.vstack([bottom, [[s / 2, top], [-s / 2, top]]])
        k = len(loc)
        el = np.stack([np.arange(k), (np.arange(k) + 1) % k], axis=1)
        return BoundaryMesh(frame.to_global(loc), el)
    m1 = shape[0]
    idx = np.arange(m1 * m1).reshape(m1, m1)
    bot = np.hstack([nodes, G[:, None]])
    tp = np.hstack([nodes, np.full((len(nodes), 1), top)])
    off = m1 * m1
    v00, v10, v11, v01 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    tris = [np.stack([v00, v11, v10], 1), np.stack([v00, v01, v11], 1),
            np.stack([v00, v10, v11], 1) + off, np.stack([v00, v11, v01], 1) + off]
    # boundary ring counterclockwise seen from above
    ring = np.concatenate([idx[:, 0], idx[-1, 1:], idx[-2::-1, -1], idx[0, -2:0:-1]])
    b0, b1 = ring, np.roll(ring, -1)
    tris += [np.stack([b0, b1, b1 + off], 1), np.stack([b0, b1 + off, b0 + off], 1)]
    V = frame.to_global(np.vstack([bot, tp]))
    return BoundaryMesh(V, np.vstack(tris))


def _projections(T: TrapezoidPart, T_E, T_Gamma, raster: int) -> dict:
    n = T.frame.dim
    s = T.trapezoid.side
    proj_w = T.weights * T.cos_vertical
    if n == 2:
        x = np.sort(T.pieces[..., 0], axis=1)
        piT = _union_length(x[:, 0], x[:, 1])
        cell = 0.0
    else:
        P, counts, items, lo, width, nbins = _piece_bins(T)
        g = (np.arange(raster) + 0.5) / raster * s - s / 2
        C1, C2 = np.meshgrid(g, g, indexing="ij")
        S = np.stack([C1.ravel(), C2.ravel(), np.full(C1.size, -np.inf)], axis=1)
        hit = np.zeros(len(S), np.bool_)
        K.occluded(S, P, counts, items, lo, width, nbins, 0.0, 0, len(S), hit)
        cell = (s / raster) ** 2
        piT = float(hit.sum()) * cell
    return {"proj_T": piT, "proj_T_E": float(proj_w[T_E].sum()),
            "proj_T_Gamma": float(proj_w[T_Gamma].sum()), "proj_raster_cell": cell,
            "proj_bad": max(0.0, piT - float(proj_w[T_Gamma].sum()))}


def _union_length(a, b) -> float:
    o = np.argsort(a, kind="mergesort")
    total, cur_a, cur_b = 0.0, None, None
    for lo, hi in zip(a[o], b[o]):
        if cur_b is None or lo > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = lo, hi
        else:
            cur_b = max(cur_b, hi)
    if cur_b is not None:
        total += cur_b - cur_a
    return float(total)


def lipschitz_excess(nodes, vals, h, chunk: int = 2048) -> float:
    """max over node pairs of |v_i - v_j| - h |x_i - x_j| (<= 0 for h-Lipschitz data)."""
    if nodes.shape[1] == 1:
        o = np.argsort(nodes[:, 0])
        dx = np.diff(nodes[o, 0])
        dv = np.abs(np.diff(vals[o]))
        return float(np.max(dv - h * dx)) if len(dx) else 0.0
    worst = -np.inf
    for i in range(0, len(nodes), chunk):
        D = np.linalg.norm(nodes[i:i + chunk, None, :] - nodes[None, :, :], axis=2)
        V = np.abs(vals[i:i + chunk, None] - vals[None, :])
        worst = max(worst, float(np.max(V - h * D)))
    return worst


def resolution_depth(T: TrapezoidPart, h: float) -> float:
    """How far a point of a sample's cell can sit above the envelope through the cell's sample.

    The cone is closed under addition, so a blocked cell lies under the
    envelope of kept cells up to its own height span plus h times its width.
    """
    C = T.cells if T.cells is not None else T.pieces[T.sample_piece]
    span = np.ptp(C, axis=1)
    width = np.linalg.norm(span[:, :-1], axis=1)
    return float(np.max(span[:, -1] + h * width))


def patch_checks(patch: LipschitzPatch, mesh: BoundaryMesh | None) -> dict:
    T = patch.T
    frame = patch.frame
    tol = T.tol
    out = {
        "T_Gamma_in_T_E": bool(np.all(patch.T_E[patch.T_Gamma])),
        "gap_violations": T.gap_violations(),
        "lipschitz_excess_F": lipschitz_excess(patch.nodes, patch.F, patch.h),
        "lipschitz_excess_G": lipschitz_excess(patch.nodes, patch.G, patch.h),
    }
    y = T.samples[patch.T_Gamma]
    out["graph_gap_T_Gamma"] = float(np.max(np.abs(patch.F_at(y[:, :-1]) - y[:, -1])))
    a = frame.a_point
    out["a_in_omega_L"] = bool(patch.omega_L.classify(a[None, :])[0] == 1)
    if mesh is not None:
        V = patch.omega_L.vertices
        codes = mesh.classify(V, tol=max(mesh.tol, tol))
        in_ball = np.linalg.norm(V - frame.Q, axis=1) <= frame.r * (1 + 1e-9)
        out["omega_vertices"] = int(len(V))
        out["omega_outside_domain"] = int(np.sum(codes < 0))
        out["omega_outside_ball"] = int(np.sum(~in_ball))
        out["omega_outside_depth"] = float(mesh.distance(V[codes < 0]).max()) if np.any(codes < 0) else 0.0
        out["resolution_depth"] = resolution_depth(T, patch.h)
    return out


@dataclass
class ConvergenceRow:
    samples_per_piece: int
    sigma_T_Gamma: float
    proj_T_E: float


def build_patch(mesh: BoundaryMesh, Q, r: float, M: float, h: float, samples_per_piece: int = 16,
                grid: int | None = None, frame: Frame | None = None, workers: int = 1,
                raster: int = 512) -> LipschitzPatch:
    """Run the whole construction at the boundary point Q and scale r."""
    frame = frame or patch_frame(mesh, Q, r, M)
    T = extract_T(mesh, frame, h, samples_per_piece)
    TE = top_edge(T, workers)
    TG = cone_filter(T, among=TE, workers=workers)
    return graph_and_domain(T, TE, TG, h, grid=grid, mesh=mesh, workers=workers, raster=raster)


def sampling_convergence(mesh: BoundaryMesh, frame: Frame, h: float, levels=(4, 8, 16, 32),
                         workers: int = 1) -> list[ConvergenceRow]:
    """sigma(T_Gamma) and pi(T_E) as the sample density doubles."""
    rows = []
    for m in levels:
        T = extract_T(mesh, frame, h, m)
        TE = top_edge(T, workers)
        TG = cone_filter(T, among=TE, workers=workers)
        w = T.weights * T.cos_vertical
        rows.append(ConvergenceRow(m, float(T.weights[TG].sum()), float(w[TE].sum())))
    return rows
