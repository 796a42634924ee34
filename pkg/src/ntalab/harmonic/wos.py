"""Walk-on-spheres estimates of harmonic measure on boundary cells."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import stats

from ..geometry import _kernels as GK
from ..geometry.mesh import BoundaryMesh, DomainError

BATCH = 4096


@dataclass(frozen=True)
class Partition:
    """Groups of boundary elements.  ``labels[e]`` is the cell of element e."""

    labels: np.ndarray
    n_cells: int
    kind: str
    sigma: np.ndarray  # surface measure of each cell

    @classmethod
    def from_labels(cls, mesh: BoundaryMesh, labels, kind: str = "custom") -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (mesh.n_elements,):
            raise ValueError("one label per element is required")
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        k = int(labels.max()) + 1
        sigma = np.bincount(labels, weights=mesh.element_measure, minlength=k)
        return cls(labels, k, kind, sigma)

    def cells_of(self, elements) -> np.ndarray:
        return np.unique(self.labels[np.asarray(elements)])


def element_partition(mesh: BoundaryMesh) -> Partition:
    return Partition.from_labels(mesh, np.arange(mesh.n_elements), "element")


def angle_partition(mesh: BoundaryMesh, cells: int, center=None, offset: float = 0.0) -> Partition:
    """Equal angular sectors about ``center`` (plane only), by element midpoint."""
    if mesh.dim != 2:
        raise ValueError("angular partitions need a planar mesh")
    c = mesh.vertices.mean(axis=0) if center is None else np.asarray(center, float)
    d = mesh.centroids - c
    th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - offset, 2 * math.pi)
    lab = np.minimum((th / (2 * math.pi) * cells).astype(np.int64), cells - 1)
    return _compact(mesh, lab, "angle", cells)


def order_partition(mesh: BoundaryMesh, cells: int, elements=None) -> Partition:
    """Consecutive runs of equal measure along element order.

    With ``elements`` only those elements are split; every other element
    goes to one extra last cell.
    """
    idx = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    m = mesh.element_measure[idx]
    mid = np.cumsum(m) - m / 2
    lab_sub = np.minimum((mid / m.sum() * cells).astype(np.int64), cells - 1)
    lab = np.full(mesh.n_elements, cells, dtype=np.int64)
    lab[idx] = lab_sub
    if elements is None:
        lab = lab_sub
    return _compact(mesh, lab, "order", None)


def grid_partition(mesh: BoundaryMesh, cells: int, elements=None) -> Partition:
    """Boxes of a uniform grid (about ``cells`` boxes over the bounding box), by element centroid.

    Empty boxes are dropped; with ``elements`` the rest of the boundary is one extra cell.
    """
    idx = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    C = mesh.centroids[idx]
    lo, hi = C.min(axis=0), C.max(axis=0)
    ext = np.maximum(hi - lo, 1e-300)
    k = max(1, round(cells ** (1 / mesh.dim)))
    ijk = np.minimum(((C - lo) / ext * k).astype(np.int64), k - 1)
    key = np.ravel_multi_index(ijk.T, (k,) * mesh.dim)
    _, sub = np.unique(key, return_inverse=True)
    lab = np.full(mesh.n_elements, sub.max() + 1 if len(sub) else 0, dtype=np.int64)
    lab[idx] = sub.ravel()
    return _compact(mesh, lab, "grid", None)


def face_partition(mesh: BoundaryMesh, decimals: int = 6) -> Partition:
    """Cells of equal outward normal (the sides of a polygon, faces of a polyhedron)."""
    key = np.round(mesh.normals, decimals) + 0.0
    _, lab = np.unique(key, axis=0, return_inverse=True)
    return _compact(mesh, lab.ravel(), "face", None)


def _compact(mesh, lab, kind, n_cells):
    if n_cells is None:
        _, lab = np.unique(lab, return_inverse=True)
        lab = lab.ravel()
    p = Partition.from_labels(mesh, lab, kind)
    if n_cells is not None and p.n_cells < n_cells:
        p = Partition(p.labels, n_cells, kind, np.pad(p.sigma, (0, n_cells - p.n_cells)))
    return p


def make_partition(mesh: BoundaryMesh, spec: str = "auto", cells: int = 64) -> Partition:
    """Partition by name: element, angle, order, grid, face or auto."""
    if spec == "auto":
        spec = "order" if mesh.dim == 2 else "grid"
    if spec == "element":
        return element_partition(mesh)
    if spec == "angle":
        return angle_partition(mesh, cells)
    if spec == "order":
        return order_partition(mesh, cells)
    if spec == "grid":
        return grid_partition(mesh, cells)
    if spec == "face":
        return face_partition(mesh)
    raise ValueError(f"unknown partition {spec!r}; expected element, angle, order, grid, face or auto")


def auto_pole(mesh: BoundaryMesh, grid: int | None = None) -> np.ndarray:
    """Interior point of (approximately) maximal distance to the boundary."""
    n = mesh.dim
    grid = grid or (64 if n == 2 else 24)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    axes = [np.linspace(lo[i], hi[i], grid + 2)[1:-1] for i in range(n)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    cls, d = mesh.classify_with_distance(G)
    d = np.where(cls == 1, d, -np.inf)
    if not np.isfinite(d.max()):
        raise DomainError("no interior grid point found")
    x = G[int(np.argmax(d))].copy()
    best = float(d.max())
    step = float((hi - lo).max()) / (grid + 1) / 2
    dirs = np.array([v for v in product((-1, 0, 1), repeat=n) if any(v)], float)
    while step > 1e-6 * mesh.diameter:
        cand = x + step * dirs
        c, dc = mesh.classify_with_distance(cand)
        dc = np.where(c == 1, dc, -np.inf)
        j = int(np.argmax(dc))
        if dc[j] > best:
            x, best = cand[j], float(dc[j])
        else:
            step /= 2
    return x


@dataclass
class MeasureEstimate:
    partition: Partition
    pole: np.ndarray
    counts: np.ndarray          # hits per cell
    element_counts: np.ndarray  # hits per element
    n_walks: int
    shell: float
    seed: int
    steps: int = 0
    truncated: int = 0
    exits: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_walks

    @property
    def std_err(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1 - p) / self.n_walks)

    def mass(self, cells) -> float:
        return float(self.counts[np.asarray(cells, dtype=np.int64)].sum()) / self.n_walks

    def mass_std_err(self, cells) -> float:
        p = self.mass(cells)
        return math.sqrt(p * (1 - p) / self.n_walks)

    def regroup(self, partition: Partition) -> "MeasureEstimate":
        """Same walks scored on a different partition of the same mesh."""
        counts = np.bincount(partition.labels, weights=self.element_counts,
                             minlength=partition.n_cells).astype(np.int64)
        return MeasureEstimate(partition, self.pole, counts, self.element_counts, self.n_walks,
                               self.shell, self.seed, self.steps, self.truncated, self.exits,
                               list(self.notes))

    def chi_square_uniform(self, expected=None):
        """Chi-square statistic and p-value of the cell counts against ``expected`` probabilities
        (default: proportional to cell measure)."""
        if expected is None:
            expected = self.partition.sigma / self.partition.sigma.sum()
        exp = np.asarray(expected, float) * self.n_walks
        res = stats.chisquare(self.counts, exp)
        return float(res.statistic), float(res.pvalue)

    def to_dict(self) -> dict:
        return {
            "partition": self.partition.kind, "cells": self.partition.n_cells,
            "pole": self.pole.tolist(), "n_walks": self.n_walks, "shell": self.shell, "seed": self.seed,
            "counts": self.counts.tolist(), "probabilities": self.probabilities.tolist(),
            "std_err": self.std_err.tolist(), "sigma": self.partition.sigma.tolist(),
            "mean_steps": self.steps / max(self.n_walks, 1), "truncated": self.truncated,
            "notes": self.notes,
        }


def batch_seeds(seed: int, n_batches: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(max(n_batches, 1), dtype=np.uint64)


def walk_on_spheres(mesh: BoundaryMesh, pole="auto", partition: Partition | str | None = None,
                    n_walks: int = 100_000, shell: float = 1e-4, seed: int = 0, *,
                    workers: int = 1, max_steps: int = 100_000, record_exits: bool = False,
                    cells: int = 64) -> MeasureEstimate:
    """Hitting distribution of Brownian motion from ``pole`` on the cells of ``partition``.

    Walks run in batches of a fixed size, each with its own seed drawn from
    ``seed``, so the counts do not depend on ``workers``.  A walk stops
    within ``shell`` of the boundary and scores the nearest element.
    """
    n_walks = int(n_walks)
    if n_walks <= 0:
        raise ValueError("n_walks must be positive")
    if not shell > 0:
        raise ValueError("shell must be positive")
    if isinstance(pole, str):
        if pole != "auto":
            raise ValueError("pole must be a point or 'auto'")
        pole = auto_pole(mesh)
    pole = np.asarray(pole, float)
    cls, d = mesh.classify_with_distance(pole[None, :])
    if cls[0] != 1:
        raise DomainError("pole is not an interior point")
    if d[0] <= shell:
        raise DomainError(f"pole clearance {d[0]:.3g} does not exceed the shell {shell:.3g}")
    if partition is None or isinstance(partition, str):
        partition = make_partition(mesh, partition or "auto", cells)
    if partition.labels.shape != (mesh.n_elements,):
        raise ValueError("partition does not belong to this mesh")
    p3 = mesh.pad(pole)[0]
    bvh = mesh._bvh
    ec = mesh.element_coords
    nb = -(-n_walks // BATCH)
    seeds = batch_seeds(seed, nb)
    E = mesh.n_elements

    def run(b):
        m = min(BATCH, n_walks - b * BATCH)
        counts = np.zeros(E, np.int64)
        ex = np.empty((m if record_exits else 0, 3))
        steps, trunc = GK.wos_batch(p3[0], p3[1], p3[2], mesh.dim, m, seeds[b], float(shell), max_steps,
                                    *bvh, ec, counts, ex, record_exits)
        return counts, ex, steps, trunc

    if workers > 1 and nb > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(nb)))
    else:
        parts = [run(b) for b in range(nb)]
    el_counts = np.sum([p[0] for p in parts], axis=0)
    exits = np.concatenate([p[1] for p in parts])[:, : mesh.dim] if record_exits else None
    steps = int(sum(p[2] for p in parts))
    trunc = int(sum(p[3] for p in parts))
    notes = []
    if trunc:
        notes.append(f"{trunc} walks hit the step cap {max_steps} and were scored at their last nearest element")
    counts = np.bincount(partition.labels, weights=el_counts, minlength=partition.n_cells).astype(np.int64)
    return MeasureEstimate(partition, pole, counts, el_counts.astype(np.int64), n_walks, float(shell),
                           int(seed), steps, trunc, exits, notes)


@dataclass
class DensityProfile:
    """Empirical density k = omega(cell) / sigma(cell) on each cell."""

    sigma: np.ndarray
    k: np.ndarray
    k_std_err: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.k * self.sigma))


def density_profile(estimate: MeasureEstimate) -> DensityProfile:
    sig = estimate.partition.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(sig > 0, estimate.probabilities / sig, 0.0)
        se = np.where(sig > 0, estimate.std_err / sig, 0.0)
    return DensityProfile(sig, k, se)


def disk_arc_probability(rho: float, theta0, theta1) -> np.ndarray:
    """Harmonic measure from the real point rho of the arc (theta0, theta1) of the unit circle."""
    k = (1 + rho) / (1 - rho)

    def F(t):
        # antiderivative of the Poisson kernel, continuous on (-pi, pi)
        t = np.asarray(t, float)
        w = np.mod(t + math.pi, 2 * math.pi) - math.pi
        turns = np.floor((t + math.pi) / (2 * math.pi))
        return np.arctan(k * np.tan(w / 2)) / math.pi + turns

    return F(theta1) - F(theta0)
