"""Oriented boundary meshes (polylines in 2D, triangle meshes in 3D)."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from . import _kernels as K


class MeshError(ValueError):
    """Structural problem with a boundary mesh."""


class DomainError(ValueError):
    """A query was made outside the domain where it is defined."""


class Side(str, Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SurfaceBall:
    center: np.ndarray
    radius: float
    elements: np.ndarray  # indices of elements meeting the ball
    clipped: np.ndarray  # clipped measure of each listed element
    measure: float


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class BoundaryMesh:
    """Closed oriented boundary of a bounded domain in R^2 or R^3.

    Elements are segments (2D) or triangles (3D) given as vertex index
    tuples.  Construction validates closure and orientability and flips
    the orientation, if needed, so that normals point out of the bounded
    region.  Instances are immutable and safe to share between threads.
    """

    def __init__(self, vertices, elements, *, validate: bool = True, tol_factor: float = 1e-9):
        V = np.asarray(vertices, dtype=float)
        El = np.asarray(elements, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] not in (2, 3):
            raise MeshError("vertices must have shape (V, 2) or (V, 3)")
        n = V.shape[1]
        if El.ndim != 2 or El.shape[1] != n:
            raise MeshError(f"elements must have shape (E, {n}) for n = {n}")
        if len(El) == 0:
            raise MeshError("mesh has no elements")
        if not np.all(np.isfinite(V)):
            raise MeshError("vertex coordinates must be finite")
        if El.min() < 0 or El.max() >= len(V):
            bad = int(np.argmax((El < 0).any(1) | (El >= len(V)).any(1)))
            raise MeshError(f"element {bad} references a vertex outside 0..{len(V) - 1}")
        self.dim = n
        self.tol_factor = tol_factor
        meas = self._measures(V, El)
        scale = np.ptp(V, axis=0).max()
        if np.any(meas <= 1e-14 * scale ** (n - 1)):
            bad = int(np.argmin(meas))
            raise MeshError(f"element {bad} has zero measure")
        if validate:
            self._check_closed(El, len(V))
            if self._signed_content(V, El) < 0:
                El = El[:, ::-1].copy()
        self.vertices = _freeze(V)
        self.elements = _freeze(El)
        self.element_measure = _freeze(meas)

    # construction helpers

    @staticmethod
    def _measures(V, El):
        if V.shape[1] == 2:
            return np.linalg.norm(V[El[:, 1]] - V[El[:, 0]], axis=1)
        a, b, c = V[El[:, 0]], V[El[:, 1]], V[El[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    @staticmethod
    def _check_closed(El, nv):
        if El.shape[1] == 2:
            out_deg = np.bincount(El[:, 0], minlength=nv)
            in_deg = np.bincount(El[:, 1], minlength=nv)
            tot = out_deg + in_deg
            if np.any(tot != 2):
                v = int(np.argmax(tot != 2))
                raise MeshError(f"not closed: vertex {v} is shared by {tot[v]} elements (need 2)")
            if np.any(out_deg != 1):
                v = int(np.argmax(out_deg != 1))
                raise MeshError(f"not orientable: inconsistent segment directions at vertex {v}")
            return
        a = El[:, [0, 1, 2]].ravel()
        b = El[:, [1, 2, 0]].ravel()
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * nv + hi
        uniq, cnt = np.unique(key, return_counts=True)
        if np.any(cnt != 2):
            k = uniq[np.argmax(cnt != 2)]
            raise MeshError(f"not closed: edge ({k // nv}, {k % nv}) is shared by "
                            f"{cnt[np.argmax(cnt != 2)]} triangles (need 2)")
        directed = a * nv + b
        if len(np.unique(directed)) != len(directed):
            raise MeshError("not orientable: some edge is traversed twice in the same direction")
        used = np.zeros(nv, bool)
        used[El.ravel()] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.argmin(used))} is not used by any element")

    @staticmethod
    def _signed_content(V, El):
        if V.shape[1] == 2:
            a, b = V[El[:, 0]], V[El[:, 1]]
            return 0.5 * np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        a, b, c = V[El[:, 0]], V[El[:, 1]], V[El[:, 2]]
        return np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0

    # basic geometry

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def total_measure(self) -> float:
        return float(self.element_measure.sum())

    @cached_property
    def enclosed_content(self) -> float:
        """Area (2D) or volume (3D) of the bounded region."""
        return float(self._signed_content(self.vertices, self.elements))

    @cached_property
    def diameter(self) -> float:
        # bounding box diagonal; an upper bound that is cheap and stable
        return float(np.linalg.norm(np.ptp(self.vertices, axis=0)))

    @cached_property
    def element_scale(self) -> float:
        """Largest element diameter."""
        c = self.element_coords
        d = np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
        if self.dim == 3:
            d = np.maximum(d, np.linalg.norm(c[:, 2] - c[:, 1], axis=1))
            d = np.maximum(d, np.linalg.norm(c[:, 0] - c[:, 2], axis=1))
        return float(d.max())

    @property
    def tol(self) -> float:
        return self.tol_factor * self.diameter

    @cached_property
    def element_coords(self) -> np.ndarray:
        """(E, k, 3) element vertex coordinates, padded with z = 0 in 2D."""
        V3 = self.pad(self.vertices)
        return _freeze(V3[self.elements])

    @cached_property
    def centroids(self) -> np.ndarray:
        return _freeze(self.vertices[self.elements].mean(axis=1))

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit outward normal per element."""
        V, El = self.vertices, self.elements
        if self.dim == 2:
            t = V[El[:, 1]] - V[El[:, 0]]
            nrm = np.column_stack([t[:, 1], -t[:, 0]])
        else:
            nrm = np.cross(V[El[:, 1]] - V[El[:, 0]], V[El[:, 2]] - V[El[:, 0]])
        return _freeze(nrm / np.linalg.norm(nrm, axis=1)[:, None])

    def pad(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        if P.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {P.shape[1]}")
        if self.dim == 2:
            P = np.column_stack([P, np.zeros(len(P))])
        return np.ascontiguousarray(P)

    # spatial index

    @cached_property
    def _bvh(self):
        c = self.element_coords
        return K.build_bvh(c.min(axis=1), c.max(axis=1))

    def _query(self, pts):
        P = self.pad(pts)
        if not np.all(np.isfinite(P)):
            raise ValueError("query points must be finite")
        d, el, cp, feat = K.nearest_many(P, *self._bvh, self.element_coords)
        return d, el, cp[:, : self.dim], feat

    def distance(self, pts) -> np.ndarray:
        """Exact Euclidean distance from each point to the mesh."""
        return self._query(pts)[0]

    def nearest(self, pts):
        """Distance, nearest element, closest point and feature code."""
        return self._query(pts)

    def brute_distance(self, pts) -> np.ndarray:
        return K.brute_nearest(self.pad(pts), self.element_coords)[0]

    # inside/outside

    @cached_property
    def _pseudo_normals(self):
        V, El, N = self.vertices, self.elements, self.normals
        nv = len(V)
        vn = np.zeros((nv, self.dim))
        if self.dim == 2:
            np.add.at(vn, El[:, 0], N)
            np.add.at(vn, El[:, 1], N)
            return vn, None
        # angle-weighted vertex normals
        for k in range(3):
            p = V[El[:, k]]
            u = V[El[:, (k + 1) % 3]] - p
            w = V[El[:, (k + 2) % 3]] - p
            cosang = np.einsum("ij,ij->i", u, w) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            np.add.at(vn, El[:, k], ang[:, None] * N)
        # edge normals: sum of the two incident face normals
        a = El[:, [0, 1, 2]].ravel()
        b = El[:, [1, 2, 0]].ravel()
        key_fwd = a * nv + b
        key_rev = b * nv + a
        srt = np.argsort(key_fwd)
        pos = np.searchsorted(key_fwd[srt], key_rev)
        twin = srt[np.clip(pos, 0, len(srt) - 1)]
        face = np.repeat(np.arange(len(El)), 3)
        en = (N[face] + N[face[twin]]).reshape(len(El), 3, 3)
        return vn, en

    def classify(self, pts, tol: float | None = None) -> np.ndarray:
        """Return +1 interior, -1 exterior, 0 boundary for each point."""
        return self.classify_with_distance(pts, tol)[0]

    def classify_with_distance(self, pts, tol: float | None = None):
        """Side codes (+1, -1, 0) by the pseudo-normal sign of the nearest feature, and distances."""
        tol = self.tol if tol is None else tol
        if tol <= 0:
            raise ValueError("tol must be positive")
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        d, el, cp, feat = self._query(P)
        vn, en = self._pseudo_normals
        El = self.elements
        normal = np.array(self.normals[el])
        if self.dim == 2:
            m = feat == 4
            normal[m] = vn[El[el[m], 0]]
            m = feat == 5
            normal[m] = vn[El[el[m], 1]]
        else:
            for code, k in ((1, 0), (2, 1), (3, 2)):
                m = feat == code
                normal[m] = en[el[m], k]
            for code, k in ((4, 0), (5, 1), (6, 2)):
                m = feat == code
                normal[m] = vn[El[el[m], k]]
        s = np.einsum("ij,ij->i", P - cp, normal)
        out = np.where(s < 0, 1, -1)
        out[d <= tol] = 0
        return out, d

    def inside_test(self, p, tol: float | None = None) -> Side:
        c = int(self.classify(np.asarray(p, dtype=float)[None, :], tol)[0])
        return {1: Side.INTERIOR, -1: Side.EXTERIOR, 0: Side.BOUNDARY}[c]

    def winding_classify(self, pts) -> np.ndarray:
        """Slow reference classification: winding number (2D) or solid angle (3D)."""
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        V, El = self.vertices, self.elements
        out = np.empty(len(P), dtype=int)
        for i, p in enumerate(P):
            if self.dim == 2:
                a = V[El[:, 0]] - p
                b = V[El[:, 1]] - p
                ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], np.einsum("ij,ij->i", a, b))
                w = ang.sum() / (2 * np.pi)
            else:
                a = V[El[:, 0]] - p
                b = V[El[:, 1]] - p
                c = V[El[:, 2]] - p
                la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
                num = np.einsum("ij,ij->i", a, np.cross(b, c))
                den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
                       + np.einsum("ij,ij->i", a, c) * lb + np.einsum("ij,ij->i", b, c) * la)
                w = 2 * np.arctan2(num, den).sum() / (4 * np.pi)
            out[i] = 1 if w > 0.5 else -1
        return out

    # surface measure

    def surface_ball(self, Q, r: float, tol: float | None = None) -> SurfaceBall:
        """Clip the mesh to the open ball B(Q, r) and return the piece's measure."""
        if not r > 0:
            raise ValueError("radius must be positive")
        Q = np.asarray(Q, dtype=float)
        tol = self.tol if tol is None else tol
        if self.distance(Q[None, :])[0] > tol:
            raise DomainError("surface ball center is not on the boundary")
        clipped, _, _ = self.clip_ball(Q, r)
        idx = np.nonzero(clipped > 0)[0]
        return SurfaceBall(center=Q.copy(), radius=float(r), elements=idx,
                           clipped=clipped[idx], measure=float(clipped[idx].sum()))

    def clip_ball(self, Q, r: float):
        """Per-element measure inside B(Q, r) for any center Q.

        Also returns the clipped parameter interval (segments only).
        """
        q = self.pad(Q)[0]
        E = self.n_elements
        out, t0, t1 = np.empty(E), np.empty(E), np.empty(E)
        K.clip_ball(self.element_coords, q[0], q[1], q[2], float(r), out, t0, t1)
        return out, t0, t1

    # sampling

    def sample_surface(self, count: int, rng: np.random.Generator):
        """Points uniform with respect to surface measure, with their elements."""
        p = self.element_measure / self.total_measure
        el = rng.choice(self.n_elements, size=count, p=p)
        X = self.vertices[self.elements[el]]
        if self.dim == 2:
            t = rng.random(count)[:, None]
            pts = X[:, 0] + t * (X[:, 1] - X[:, 0])
        else:
            u, v = rng.random(count), rng.random(count)
            flip = u + v > 1
            u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
            pts = X[:, 0] + u[:, None] * (X[:, 1] - X[:, 0]) + v[:, None] * (X[:, 2] - X[:, 0])
        return pts, el

    def element_samples(self, per_element: int):
        """Regular interior samples per element with equal weights.

        Returns points (E*m, n), owning element, and the measure each
        sample represents.
        """
        X = self.vertices[self.elements]
        pts, w = _element_samples(X, per_element)
        el = np.repeat(np.arange(self.n_elements), w.shape[1])
        weight = (self.element_measure[:, None] * w).ravel()
        return pts.reshape(-1, self.dim), el, weight

    # crossings

    def segment_crossings(self, a, b):
        """Parameters t in [0, 1] where a + t (b - a) meets the mesh, sorted."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        d = b - a
        X = self.vertices[self.elements]
        eps = 1e-12
        if self.dim == 2:
            p, q = X[:, 0], X[:, 1] - X[:, 0]
            den = d[0] * q[:, 1] - d[1] * q[:, 0]
            w = p - a
            ok = np.abs(den) > eps * np.linalg.norm(d) * np.linalg.norm(q, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (w[:, 0] * q[:, 1] - w[:, 1] * q[:, 0]) / den
                u = (w[:, 0] * d[1] - w[:, 1] * d[0]) / den
            hit = ok & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
        else:
            p0, e1, e2 = X[:, 0], X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]
            h = np.cross(d, e2)
            det = np.einsum("ij,ij->i", e1, h)
            ok = np.abs(det) > eps * np.linalg.norm(d) * np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                f = 1.0 / det
                s = a - p0
                u = f * np.einsum("ij,ij->i", s, h)
                qv = np.cross(s, e1)
                v = f * (qv @ d)
                t = f * np.einsum("ij,ij->i", e2, qv)
                hit = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t >= -eps) & (t <= 1 + eps)
        ts = np.sort(np.clip(t[hit], 0.0, 1.0))
        return ts


def _element_samples(X, m, cells: bool = False):
    """Sample points of (E, k, n) simplices and relative weights (E, m').

    With ``cells`` the sub-simplex owning each sample is returned as well,
    shaped (E, m', k, n); the sample is that sub-simplex's midpoint/centroid.
    """
    E, k, n = X.shape
    if k == 2:
        t = (np.arange(m) + 0.5) / m
        pts = X[:, None, 0] + t[None, :, None] * (X[:, None, 1] - X[:, None, 0])
        w = np.full((E, m), 1.0 / m)
        if not cells:
            return pts, w
        ends = np.stack([t - 0.5 / m, t + 0.5 / m], axis=1)  # (m, 2)
        C = X[:, None, None, 0] + ends[None, :, :, None] * (X[:, None, None, 1] - X[:, None, None, 0])
        return pts, w, C
    # subdivide each triangle into q^2 congruent pieces, q = ceil(sqrt(m))
    q = max(1, int(np.ceil(np.sqrt(m))))
    bary, corners = [], []
    for i in range(q):
        for j in range(q - i):
            bary.append(((i + 1 / 3) / q, (j + 1 / 3) / q))
            corners.append(((i, j), (i + 1, j), (i, j + 1)))
            if i + j < q - 1:
                bary.append(((i + 2 / 3) / q, (j + 2 / 3) / q))
                corners.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
    B = np.array(bary)
    u, v = B[:, 0], B[:, 1]
    pts = (X[:, None, 0] + u[None, :, None] * (X[:, None, 1] - X[:, None, 0])
           + v[None, :, None] * (X[:, None, 2] - X[:, None, 0]))
    w = np.full((E, len(B)), 1.0 / len(B))
    if not cells:
        return pts, w
    Cb = np.array(corners, dtype=float) / q  # (m', 3, 2)
    C = (X[:, None, None, 0] + Cb[None, :, :, 0, None] * (X[:, None, None, 1] - X[:, None, None, 0])
         + Cb[None, :, :, 1, None] * (X[:, None, None, 2] - X[:, None, None, 0]))
    return pts, w, C
