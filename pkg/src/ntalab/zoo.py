"""Test domains: smooth, Lipschitz and prefractal boundaries."""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry.mesh import BoundaryMesh, MeshError

KINDS = ("disk", "square", "cube", "lipschitz_graph", "koch_curve",
         "quadratic_koch_surface", "file")
MAX_LEVEL = 8
MAX_ELEMENTS = 1_000_000


class MeshFormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None, path=None):
        loc = f"{path}:" if path else ""
        loc += f"line {line}: " if line is not None else ""
        super().__init__(loc + msg)
        self.line = line


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    resolution: int = 0
    level: int = 0
    slope: float = 0.0
    seed: int = 0
    path: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.resolution and self.resolution < 8:
            raise ValueError("resolution must be at least 8 elements")
        if not 0 <= self.level <= MAX_LEVEL:
            raise ValueError(f"level must be in 0..{MAX_LEVEL}")
        if self.slope < 0:
            raise ValueError("graph slope must be >= 0")
        if self.kind == "file" and not self.path:
            raise ValueError("file domains need a path")


def generate(spec: DomainSpec) -> BoundaryMesh:
    k = spec.kind
    if k == "disk":
        return disk(spec.resolution or 4096)
    if k == "square":
        return square(spec.resolution or 4)
    if k == "cube":
        return cube(max(1, (spec.resolution or 12) // 12))
    if k == "lipschitz_graph":
        return lipschitz_graph(spec.slope, pieces=spec.resolution or 64, seed=spec.seed)
    if k == "koch_curve":
        return koch_curve(spec.level)
    if k == "quadratic_koch_surface":
        return quadratic_koch_surface(spec.level)
    return load_mesh(spec.path)


def _loop(V):
    n = len(V)
    i = np.arange(n)
    return BoundaryMesh(V, np.column_stack([i, (i + 1) % n]))


def disk(n: int = 4096, radius: float = 1.0, center=(0.0, 0.0)) -> BoundaryMesh:
    """Regular n-gon inscribed in the circle."""
    th = 2 * np.pi * np.arange(n) / n
    return _loop(np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]))


def square(per_side: int = 1, side: float = 1.0) -> BoundaryMesh:
    """[0, side]^2 with each edge split into ``per_side`` segments."""
    t = np.arange(per_side) / per_side * side
    z = np.zeros(per_side)
    V = np.concatenate([np.column_stack([t, z]), np.column_stack([z + side, t]),
                        np.column_stack([side - t, z + side]), np.column_stack([z, side - t])])
    return _loop(V)


def _grid_face(origin, u, v, m):
    """Vertices and triangles for an m x m grid on a planar square."""
    i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    P = origin + (i.ravel()[:, None] * u + j.ravel()[:, None] * v) / m
    idx = (i * (m + 1) + j)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    T = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return P, T


def _weld(V, T, decimals=12):
    key = np.round(V, decimals)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    Vout = np.zeros((len(uniq), V.shape[1]))
    Vout[inv] = V
    return Vout, inv[T]


def cube(m: int = 1, side: float = 1.0) -> BoundaryMesh:
    """[0, side]^3 with each face an m x m grid of square pairs."""
    e = np.eye(3) * side
    faces = [
        (np.zeros(3), e[1], e[0]), (e[2], e[0], e[1]),  # z = 0, z = 1
        (np.zeros(3), e[0], e[2]), (e[1], e[2], e[0]),  # y = 0, y = 1
        (np.zeros(3), e[2], e[1]), (e[0], e[1], e[2]),  # x = 0, x = 1
    ]
    Vs, Ts, off = [], [], 0
    for o, u, v in faces:
        P, T = _grid_face(o, u, v, m)
        Vs.append(P)
        Ts.append(T + off)
        off += len(P)
    V, T = _weld(np.concatenate(Vs), np.concatenate(Ts))
    return BoundaryMesh(V, T)


def lipschitz_profile(slope: float, pieces: int = 64, seed: int = 0):
    """Nodes and values of a random piecewise-linear graph on [0, 1]."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, pieces + 1)
    slopes = rng.uniform(-slope, slope, pieces)
    y = np.concatenate([[0.0], np.cumsum(slopes * np.diff(x))])
    return x, y - y.mean()


def lipschitz_graph(slope: float, pieces: int = 64, seed: int = 0, depth: float = 1.0) -> BoundaryMesh:
    """Box over [0, 1] whose top is a piecewise-linear graph with |F'| <= slope."""
    x, y = lipschitz_profile(slope, pieces, seed)
    bottom = y.min() - depth
    # walk counterclockwise: bottom edge, right side, graph right to left, left side
    nb = pieces
    bx = np.linspace(0.0, 1.0, nb + 1)[:-1]
    V = [np.column_stack([bx, np.full(nb, bottom)])]
    ry = np.linspace(bottom, y[-1], pieces + 1)[:-1]
    V.append(np.column_stack([np.ones(pieces), ry]))
    V.append(np.column_stack([x[::-1], y[::-1]])[:-1])
    ly = np.linspace(y[0], bottom, pieces + 1)[:-1]
    V.append(np.column_stack([np.zeros(pieces), ly]))
    return _loop(np.concatenate(V))


def koch_curve(level: int, side: float = 1.0) -> BoundaryMesh:
    """Koch snowflake prefractal with 3 * 4^level segments of length side / 3^level."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 0..{MAX_LEVEL}")
    P = side * np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    # counterclockwise, bumps point outward (to the right of travel)
    for _ in range(level):
        a = P
        b = np.roll(P, -1, axis=0)
        d = (b - a) / 3
        p1 = a + d
        p3 = a + 2 * d
        rot = np.array([[0.5, np.sqrt(3) / 2], [-np.sqrt(3) / 2, 0.5]])  # -60 degrees
        p2 = p1 + d @ rot.T
        P = np.stack([a, p1, p2, p3], axis=1).reshape(-1, 2)
    return _loop(P)


def quadratic_koch_squares(level: int, side: float = 1.0):
    """Squares (origin, u, v) of the level-``level`` surface, outward normal u x v."""
    e = np.eye(3) * side
    # squares as (origin, u, v) with outward normal u x v
    sq = [
        (np.zeros(3), e[1], e[0]), (e[2], e[0], e[1]),
        (np.zeros(3), e[0], e[2]), (e[1], e[2], e[0]),
        (np.zeros(3), e[2], e[1]), (e[0], e[1], e[2]),
    ]
    O = np.array([s[0] for s in sq])
    U = np.array([s[1] for s in sq])
    W = np.array([s[2] for s in sq])
    for _ in range(level):
        N = np.cross(U, W)
        N /= np.linalg.norm(N, axis=1)[:, None]
        h = np.linalg.norm(U, axis=1)[:, None] / 3
        u3, w3 = U / 3, W / 3
        nO, nU, nW = [], [], []
        for i in range(3):
            for j in range(3):
                if i == 1 and j == 1:
                    continue
                nO.append(O + i * u3 + j * w3)
                nU.append(u3)
                nW.append(w3)
        base = O + u3 + w3
        top = base + h * N
        nO.append(top)
        nU.append(u3)
        nW.append(w3)
        # four walls with outward normals -w, +u, +w, -u
        nO += [base, base + u3, base + u3 + w3, base + w3]
        nU += [u3, w3, -u3, -w3]
        nW += [h * N, h * N, h * N, h * N]
        O = np.concatenate(nO)
        U = np.concatenate(nU)
        W = np.concatenate(nW)
    return O, U, W


def quadratic_koch_surface(level: int, side: float = 1.0) -> BoundaryMesh:
    """Cube whose faces are recursively replaced by the 13-square generator.

    Each square is split 3x3 and the middle ninth is pushed out into a
    cube bump (5 new squares replace 1), so the area grows by 13/9 per
    level.  Vertices are identified topologically, since bumps of
    different generations touch along edges from level 2 on.
    """
    n_tri = 12 * 13 ** level
    if n_tri >= MAX_ELEMENTS:
        raise ValueError(f"level {level} would need {n_tri} triangles (cap {MAX_ELEMENTS})")
    O, U, W = quadratic_koch_squares(level, side)
    A, B, C, D = O, O + U, O + U + W, O + W
    corners = np.stack([A, B, C, D], axis=1).reshape(-1, 3)
    # topological corner labels: integer lattice coordinates at scale 3^-level
    scale = 3 ** level / side
    lattice = np.rint(corners * scale).astype(np.int64)
    # distinct squares that touch only along an edge share corner lattice
    # points, so weld by lattice point and square adjacency: two corners are
    # the same vertex when the squares share the full edge they lie on.
    V, T = _weld_topological(corners, lattice, len(O))
    return BoundaryMesh(V, T)


def _weld_topological(corners, lattice, nsq):
    """Weld square corners so that edge-sharing squares share vertices.

    Geometric self-contact (two squares meeting along an edge but lying on
    different sheets) is kept apart: an edge is glued only to the edge that
    runs the opposite way, and each lattice edge is glued at most once.
    """
    L = lattice.reshape(nsq, 4, 3)
    # directed edges of each square
    edges = {}
    for s in range(nsq):
        for k in range(4):
            a = tuple(L[s, k])
            b = tuple(L[s, (k + 1) % 4])
            edges.setdefault((a, b), []).append((s, k))
    parent = list(range(nsq * 4))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for (a, b), lst in edges.items():
        rev = edges.get((b, a), [])
        if len(lst) == 1 and len(rev) == 1:
            (s, k), (t, j) = lst[0], rev[0]
            union(s * 4 + k, t * 4 + (j + 1) % 4)
            union(s * 4 + (k + 1) % 4, t * 4 + j)
        elif lst and rev:
            # self-contact: pair each copy with the reverse copy whose square
            # normal is not opposite (same sheet side)
            _pair_contact(lst, rev, L, union)
    roots = np.array([find(i) for i in range(nsq * 4)])
    uniq, inv = np.unique(roots, return_inverse=True)
    V = np.zeros((len(uniq), 3))
    V[inv] = corners
    q = inv.reshape(nsq, 4)
    T = np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])
    return V, T


def _pair_contact(lst, rev, L, union):
    """Glue the copies of a self-contact edge as convex folds.

    Bumps that touch along a line then stay separate solids: each square
    is paired with the reverse-edge square lying on the inner side of its
    own plane.
    """
    def nrm(s):
        return np.cross(L[s, 1] - L[s, 0], L[s, 3] - L[s, 0])

    used = set()
    for s, k in lst:
        ns = nrm(s)
        best = None
        for t, j in rev:
            if (t, j) in used:
                continue
            side_t = L[t].mean(0) - (L[t, j] + L[t, (j + 1) % 4]) / 2
            score = float(np.dot(side_t, ns))
            if best is None or score < best[0]:
                best = (score, t, j)
        if best is not None:
            _, t, j = best
            used.add((t, j))
            union(s * 4 + k, t * 4 + (j + 1) % 4)
            union(s * 4 + (k + 1) % 4, t * 4 + j)


# file formats

def mesh_text(mesh: BoundaryMesh) -> str:
    """The plain MESH text format."""
    lines = [f"MESH n={mesh.dim}", f"V {len(mesh.vertices)}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines.append(f"E {mesh.n_elements}")
    lines += [" ".join(str(int(i)) for i in e) for e in mesh.elements]
    return "\n".join(lines) + "\n"


def save_mesh(mesh: BoundaryMesh, path) -> None:
    """Write the plain MESH text format atomically."""
    atomic_write(path, mesh_text(mesh))


def atomic_write(path, text: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(text, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_mesh(path) -> BoundaryMesh:
    path = Path(path)
    text = path.read_text()
    first = next((ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")), "")
    if first.startswith("MESH"):
        V, El = _parse_mesh(text, path)
    else:
        V, El = _parse_obj(text, path)
    try:
        return BoundaryMesh(V, El)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from None


def _parse_mesh(text, path):
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    it = iter(lines)

    def take(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshFormatError(f"unexpected end of file, expected {what}", len(text.splitlines()), path)

    ln, head = take("header")
    parts = head.split()
    if len(parts) != 2 or parts[0] != "MESH" or parts[1] not in ("n=2", "n=3"):
        raise MeshFormatError("header must be 'MESH n=2' or 'MESH n=3'", ln, path)
    n = int(parts[1][2:])

    def count(tag):
        ln, s = take(f"'{tag} <count>'")
        p = s.split()
        if len(p) != 2 or p[0] != tag or not p[1].isdigit():
            raise MeshFormatError(f"expected '{tag} <count>'", ln, path)
        return int(p[1])

    nv = count("V")
    V = np.empty((nv, n))
    for k in range(nv):
        ln, s = take("vertex coordinates")
        p = s.split()
        if len(p) != n:
            raise MeshFormatError(f"vertex needs {n} coordinates, got {len(p)}", ln, path)
        try:
            V[k] = [float(x) for x in p]
        except ValueError:
            raise MeshFormatError("vertex coordinate is not a number", ln, path) from None
        if not np.all(np.isfinite(V[k])):
            raise MeshFormatError("vertex coordinate is not finite", ln, path)
    ne = count("E")
    El = np.empty((ne, n), dtype=np.int64)
    for k in range(ne):
        ln, s = take("element indices")
        p = s.split()
        if len(p) != n:
            raise MeshFormatError(f"element needs {n} indices, got {len(p)}", ln, path)
        try:
            idx = [int(x) for x in p]
        except ValueError:
            raise MeshFormatError("element index is not an integer", ln, path) from None
        for i in idx:
            if not 0 <= i < nv:
                raise MeshFormatError(f"element references vertex {i}, valid range is 0..{nv - 1}", ln, path)
        El[k] = idx
    rest = next(it, None)
    if rest is not None:
        raise MeshFormatError("trailing content after elements", rest[0], path)
    return V, El


def _parse_obj(text, path):
    V, F = [], []
    face_lines = []
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        tag, *rest = s.split()
        if tag == "v":
            if len(rest) != 3:
                raise MeshFormatError("OBJ vertex needs 3 coordinates", i, path)
            try:
                V.append([float(x) for x in rest])
            except ValueError:
                raise MeshFormatError("OBJ vertex coordinate is not a number", i, path) from None
        elif tag == "f":
            if len(rest) != 3:
                raise MeshFormatError("only triangular OBJ faces are supported", i, path)
            try:
                F.append([int(x.split("/")[0]) for x in rest])
            except ValueError:
                raise MeshFormatError("OBJ face index is not an integer", i, path) from None
            face_lines.append(i)
        else:
            raise MeshFormatError(f"unsupported OBJ record {tag!r} (only v and f)", i, path)
    if not V or not F:
        raise MeshFormatError("OBJ file needs v and f records", None, path)
    nv = len(V)
    El = []
    for ln, f in zip(face_lines, F):
        idx = []
        for j in f:
            k = j - 1 if j > 0 else nv + j
            if not 0 <= k < nv:
                raise MeshFormatError(f"face references vertex {j}, valid range is 1..{nv}", ln, path)
            idx.append(k)
        El.append(idx)
    return np.array(V, float), np.array(El, np.int64)
