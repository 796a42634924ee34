"""Local coordinate frames adapted to a boundary point, and upward cones."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import BoundaryMesh, Side


class GeometryError(ValueError):
    """Witness points or a frame are geometrically inconsistent."""


def _rotation_for(axis: np.ndarray) -> np.ndarray:
    """Orthonormal rows e_1..e_{n-1}, axis (axis is the last row)."""
    n = len(axis)
    if n == 2:
        return np.array([[axis[1], -axis[0]], [axis[0], axis[1]]])
    # Householder-free Gram-Schmidt against the least aligned coordinate axis
    k = int(np.argmin(np.abs(axis)))
    e = np.zeros(3)
    e[k] = 1.0
    u = e - axis * (e @ axis)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    return np.array([u, v, axis])


@dataclass(frozen=True)
class Frame:
    """Rotated and translated coordinates with the crossing point at 0.

    In local coordinates a point y has horizontal part pi(y) (first n-1
    coordinates) and height f(y) (last coordinate); a sits at height
    ``a_height`` on the axis and b at ``-b_height``.
    """

    origin: np.ndarray
    axis: np.ndarray
    rotation: np.ndarray
    a_height: float
    b_height: float
    side: float
    r: float
    M: float
    Q: np.ndarray
    check_tol: float = 1e-9
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.origin)
        R = self.rotation
        if R.shape != (n, n):
            raise GeometryError("rotation has the wrong shape")
        if np.max(np.abs(R @ R.T - np.eye(n))) > 1e-12:
            raise GeometryError("rotation is not orthonormal")
        if np.max(np.abs(R[-1] - self.axis)) > 1e-12:
            raise GeometryError("last rotation row must be the axis")
        lo = self.r / (2 * self.M) * (1 - self.check_tol)
        hi = self.r * (1 + self.check_tol)
        for name, v in (("a_height", self.a_height), ("b_height", self.b_height)):
            if not lo <= v <= hi:
                raise GeometryError(f"{name} = {v:.6g} outside [r/2M, r] = [{self.r / (2 * self.M):.6g}, {self.r:.6g}]")
        if self.side != side_length(self.r, self.M, n):
            raise GeometryError("side length must equal r / (2 M sqrt(n-1))")

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def h_scale(self) -> float:
        return math.sqrt(self.dim - 1)

    def to_local(self, pts) -> np.ndarray:
        P = np.asarray(pts, dtype=float)
        return (P - self.origin) @ self.rotation.T

    def to_global(self, local) -> np.ndarray:
        L = np.asarray(local, dtype=float)
        return L @ self.rotation + self.origin

    def pi(self, pts) -> np.ndarray:
        return self.to_local(pts)[..., :-1]

    def f(self, pts) -> np.ndarray:
        return self.to_local(pts)[..., -1]

    @property
    def a_point(self) -> np.ndarray:
        return self.origin + self.a_height * self.axis

    @property
    def b_point(self) -> np.ndarray:
        return self.origin - self.b_height * self.axis


def side_length(r: float, M: float, n: int) -> float:
    return r / (2 * M * math.sqrt(n - 1))


@dataclass(frozen=True)
class Cone:
    """Upward cone {z : f(z) >= h |pi(z)|} in frame coordinates."""

    slope: float

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("cone slope must be positive")

    def contains(self, local) -> np.ndarray:
        L = np.atleast_2d(np.asarray(local, dtype=float))
        return L[:, -1] >= self.slope * np.linalg.norm(L[:, :-1], axis=1)


def build_frame(mesh: BoundaryMesh, Q, r: float, a, b, M: float) -> Frame:
    """Frame through the crossing of segment a-b nearest to b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    Q = np.asarray(Q, dtype=float)
    sides = mesh.classify(np.array([a, b]))
    if sides[0] != 1:
        raise GeometryError("a is not an interior point")
    if sides[1] != -1:
        raise GeometryError("b is not an exterior point")
    ts = mesh.segment_crossings(a, b)
    if len(ts) == 0:
        raise GeometryError("segment a-b does not cross the boundary")
    t = ts[-1]
    origin = a + t * (b - a)
    axis = (a - b) / np.linalg.norm(a - b)
    rot = _rotation_for(axis)
    an = float((a - origin) @ axis)
    bn = float((origin - b) @ axis)
    return Frame(origin=origin, axis=axis, rotation=rot, a_height=an, b_height=bn,
                 side=side_length(r, M, mesh.dim), r=float(r), M=float(M), Q=Q.copy(),
                 meta={"a": a, "b": b, "crossings": len(ts)})


__all__ = ["Frame", "Cone", "GeometryError", "build_frame", "side_length", "Side"]
