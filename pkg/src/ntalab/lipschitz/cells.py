"""Star-shaped columns covering the graph domain, and their angle function.

For h* = h sqrt(n-1) and a center c at height a with
|pi(c)|_inf <= s/2 - s/4h* - s/8h*, the column

    D_c = {y in Omega_L : |pi(y) - pi(c)|_inf < s/8h*}

is checked to be star-shaped about c, to contain B(c, s/8h*), to lie in
B(c, 4 M s sqrt(n-1)), and to satisfy cos(angle) >= 1/(h sqrt 10) on its
lower (graph) boundary.  All checks are made on boundary samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import DomainError
from .patch import ConstructionError, LipschitzPatch


def angle_function(y, c, normal) -> np.ndarray:
    """Angle between the outward normal at y and the ray from c to y, in [0, pi]."""
    y = np.atleast_2d(np.asarray(y, float))
    c = np.broadcast_to(np.asarray(c, float), y.shape)
    nv = np.atleast_2d(np.asarray(normal, float))
    d = y - c
    L = np.linalg.norm(d, axis=1)
    if np.any(L == 0):
        raise DomainError("angle function undefined at the center")
    cos = np.einsum("ij,ij->i", nv, d) / (L * np.linalg.norm(nv, axis=1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


@dataclass
class StarCell:
    kind: str                # "top" or "graph"
    center: np.ndarray       # local coordinates
    lo: np.ndarray           # box bounds, local
    hi: np.ndarray
    angle_bound: float       # max angle over lower-boundary samples
    min_cos_graph: float
    max_angle_all: float     # max angle over every boundary sample
    rho_inner: float         # min distance from c to boundary samples
    rho_outer: float         # max distance
    segments_inside: bool    # sampled segments from c to the graph stay above it

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


@dataclass
class StarCover:
    """The top region plus graph columns; per-column results are arrays."""

    top: StarCell
    centers: np.ndarray      # (C, n) local
    angle_bound: np.ndarray  # per column: max angle on graph samples
    min_cos_graph: np.ndarray
    max_angle_all: np.ndarray
    rho_inner: np.ndarray
    rho_outer: np.ndarray
    segments_inside: np.ndarray
    h: float
    h_star: float
    half_width: float
    cos_bound: float         # 1 / (h sqrt 10)
    rho1: float              # s / 8h*
    rho2: float              # 4 M s sqrt(n-1)
    per_axis: int
    cover_ok: bool

    def __len__(self) -> int:
        return len(self.centers) + 1

    def cell(self, i: int) -> StarCell:
        c = self.centers[i]
        w = self.half_width
        top = self.top.hi[-1]
        return StarCell("graph", c, np.r_[c[:-1] - w, -np.inf], np.r_[c[:-1] + w, top],
                        float(self.angle_bound[i]), float(self.min_cos_graph[i]), float(self.max_angle_all[i]),
                        float(self.rho_inner[i]), float(self.rho_outer[i]), bool(self.segments_inside[i]))

    @property
    def cells(self) -> list:
        return [self.top] + [self.cell(i) for i in range(len(self.centers))]

    def violations(self, rel_tol: float = 1e-9) -> dict:
        return {
            "angle": int(np.sum(self.min_cos_graph < self.cos_bound)),
            "inner": int(np.sum(self.rho_inner < self.rho1 * (1 - rel_tol))),
            "outer": int(np.sum(self.rho_outer > self.rho2 * (1 + rel_tol))),
            "star": int(np.sum(~self.segments_inside | (self.max_angle_all > math.pi / 2))),
        }

    def summary(self) -> dict:
        return {
            "cells": len(self), "graph_cells": len(self.centers), "per_axis": self.per_axis,
            "cos_bound": self.cos_bound, "min_cos_graph": float(self.min_cos_graph.min()),
            "max_angle_graph": float(self.angle_bound.max()),
            "rho1": self.rho1, "rho2": self.rho2,
            "min_rho_inner": float(self.rho_inner.min()), "max_rho_outer": float(self.rho_outer.max()),
            "cover_ok": self.cover_ok, **{f"violations_{k}": v for k, v in self.violations().items()},
        }


def centers_per_axis(h_star: float) -> int:
    """Fewest equally spaced open boxes of width s/4h* covering the open
    interval (-s/2 + s/4h*, s/2 - s/4h*) with extreme centers at the allowed limit."""
    return int(math.floor(4 * h_star - 2)) + 1


def _box_grid(per_axis, n1):
    t = (np.arange(per_axis) + 0.5) / per_axis * 2 - 1  # in (-1, 1)
    if n1 == 1:
        return t[:, None]
    A, B = np.meshgrid(t, t, indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


def star_cells(patch: LipschitzPatch, samples: int = 4, segment_steps: int = 16,
               max_cells: int | None = None, chunk: int = 2048) -> StarCover:
    """Cover the patch by the top region plus graph columns D_c and check each column.

    ``max_cells`` keeps an evenly spread subset of the columns.
    """
    frame = patch.frame
    n = frame.dim
    n1 = n - 1
    s, an, h = frame.side, frame.a_height, patch.h
    hs = h * math.sqrt(n1)
    w = s / (8 * hs)
    edge = s / 2 - s / (4 * hs) - w
    if edge < 0:
        raise ConstructionError("slope too small for any admissible column center")
    k = centers_per_axis(hs)
    pos = np.linspace(-edge, edge, k) if k > 1 else np.zeros(1)
    spacing = pos[1] - pos[0] if k > 1 else np.inf
    cover_ok = bool((k == 1 and w >= s / 2 - s / (4 * hs)) or (spacing < 2 * w and pos[0] - w <= -s / 2 + s / (4 * hs)))
    if n1 == 1:
        C = pos[:, None]
    else:
        A, B = np.meshgrid(pos, pos, indexing="ij")
        C = np.stack([A.ravel(), B.ravel()], axis=1)
    if max_cells is not None and len(C) > max_cells:
        pick = np.unique(np.linspace(0, len(C) - 1, max_cells).round().astype(int))
        C = C[pick]
    top = an + s / 4
    rho2 = 4 * frame.M * s * math.sqrt(n1)
    top_cell = StarCell("top", np.r_[np.zeros(n1), an], np.r_[np.full(n1, -s / 2), an - s / 4],
                        np.r_[np.full(n1, s / 2), top], np.nan, np.nan, np.nan, s / 4, np.nan, True)
    off = _box_grid(samples if n1 == 2 else samples * samples, n1) * w
    ts = np.arange(1, segment_steps) / segment_steps
    cols = {key: [] for key in ("ab", "mc", "ma", "ri", "ro", "seg")}
    for i0 in range(0, len(C), chunk):
        Cc = C[i0:i0 + chunk]
        nc, m = len(Cc), len(off)
        X = (Cc[:, None, :] + off[None, :, :]).reshape(-1, n1)
        Y = np.hstack([X, patch.G_at(X)[:, None]])
        Nrm = np.hstack([patch.grad_G_at(X), -np.ones((len(X), 1))])
        cen = np.hstack([Cc, np.full((nc, 1), an)])
        Crep = np.repeat(cen, m, axis=0)
        theta = angle_function(Y, Crep, Nrm).reshape(nc, m)
        dist_g = np.linalg.norm(Y - Crep, axis=1).reshape(nc, m)
        # segments from c to graph samples must stay strictly above the graph
        seg = Crep[:, None, :] + ts[None, :, None] * (Y - Crep)[:, None, :]
        above = seg[..., -1] > patch.G_at(seg[..., :-1].reshape(-1, n1)).reshape(seg.shape[:2])
        wall_th, wall_d = _walls(patch, Cc, w, an, top, samples)
        all_th = np.concatenate([theta, wall_th], axis=1)
        dists = np.concatenate([dist_g, wall_d], axis=1)
        cols["ab"].append(theta.max(axis=1))
        cols["mc"].append(np.cos(theta).min(axis=1))
        cols["ma"].append(all_th.max(axis=1))
        cols["ri"].append(dists.min(axis=1))
        cols["ro"].append(dists.max(axis=1))
        cols["seg"].append(above.reshape(nc, -1).all(axis=1))
    cat = {key: np.concatenate(v) for key, v in cols.items()}
    return StarCover(top=top_cell, centers=np.hstack([C, np.full((len(C), 1), an)]),
                     angle_bound=cat["ab"], min_cos_graph=cat["mc"], max_angle_all=cat["ma"],
                     rho_inner=cat["ri"], rho_outer=cat["ro"], segments_inside=cat["seg"],
                     h=h, h_star=hs, half_width=w, cos_bound=1 / (h * math.sqrt(10)),
                     rho1=w, rho2=rho2, per_axis=k, cover_ok=cover_ok)


def _walls(patch, C, w, an, top, q):
    """Angles and distances at wall and top samples for every column center."""
    n1 = C.shape[1]
    nc = len(C)
    ths, ds = [], []
    levels = np.linspace(0, 1, q + 1)
    for axis in range(n1):
        for sgn in (-1.0, 1.0):
            if n1 == 1:
                X = C + sgn * w
                Gv = patch.G_at(X)
                U = Gv[:, None] + levels[None, :] * (top - Gv)[:, None]
                U = np.hstack([U, np.full((nc, 1), an)])
                P = np.stack([np.repeat(X, U.shape[1], axis=1), U], axis=2)
            else:
                across = np.linspace(-w, w, q + 1)
                X = np.repeat(C[:, None, :], len(across), axis=1).copy()
                X[:, :, axis] += sgn * w
                X[:, :, 1 - axis] += across[None, :]
                Gv = patch.G_at(X.reshape(-1, 2)).reshape(nc, -1)
                U = Gv[:, :, None] + levels[None, None, :] * (top - Gv)[:, :, None]
                U = np.concatenate([U, np.full(U.shape[:2] + (1,), an)], axis=2)
                P = np.concatenate([np.repeat(X[:, :, None, :], U.shape[2], axis=2), U[..., None]], axis=3)
                P = P.reshape(nc, -1, 3)
            nv = np.zeros(n1 + 1)
            nv[axis] = sgn
            cen = np.hstack([C, np.full((nc, 1), an)])
            D = P - cen[:, None, :]
            L = np.linalg.norm(D, axis=2)
            ths.append(np.arccos(np.clip(D[..., axis] * sgn / L, -1, 1)))
            ds.append(L)
    # top face samples above the column
    off = _box_grid(q, n1) * w
    T = C[:, None, :] + off[None, :, :]
    D = np.concatenate([T - C[:, None, :], np.full(T.shape[:2] + (1,), top - an)], axis=2)
    L = np.linalg.norm(D, axis=2)
    ths.append(np.arccos(np.clip(D[..., -1] / L, -1, 1)))
    ds.append(L)
    return np.concatenate(ths, axis=1), np.concatenate(ds, axis=1)
