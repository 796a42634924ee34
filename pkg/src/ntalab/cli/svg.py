"""Small deterministic SVG writer: fixed number formatting, no timestamps or ids from memory."""
from __future__ import annotations

import math
import warnings

import numpy as np

W, H, PAD = 640, 640, 24


def _n(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _esc(t: str) -> str:
    return t.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class Canvas:
    def __init__(self, lo, hi, width: int = W, height: int = H):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        span = np.maximum(hi - lo, 1e-12)
        self.scale = min((width - 2 * PAD) / span[0], (height - 2 * PAD) / span[1])
        self.lo = lo
        self.width, self.height = width, height
        self.items: list[str] = []
        self._layer: str | None = None

    def xy(self, p):
        p = np.atleast_2d(p)
        x = PAD + (p[:, 0] - self.lo[0]) * self.scale
        y = self.height - PAD - (p[:, 1] - self.lo[1]) * self.scale
        return x, y

    def layer(self, name: str):
        if self._layer is not None:
            self.items.append("</g>")
        self.items.append(f'<g id="{_esc(name)}">')
        self._layer = name

    def polyline(self, P, stroke="#000", width=1.0, fill="none", closed=False, opacity=1.0):
        x, y = self.xy(P)
        pts = " ".join(f"{_n(a)},{_n(b)}" for a, b in zip(x, y))
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{pts}" fill="{fill}" fill-opacity="{_n(opacity)}" '
                          f'stroke="{stroke}" stroke-width="{_n(width)}"/>')

    def segments(self, A, B, stroke="#000", width=1.0):
        xa, ya = self.xy(A)
        xb, yb = self.xy(B)
        d = " ".join(f"M{_n(a)} {_n(b)}L{_n(c)} {_n(e)}" for a, b, c, e in zip(xa, ya, xb, yb))
        self.items.append(f'<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{_n(width)}"/>')

    def dots(self, P, r=1.5, fill="#000"):
        x, y = self.xy(P)
        self.items += [f'<circle cx="{_n(a)}" cy="{_n(b)}" r="{_n(r)}" fill="{fill}"/>' for a, b in zip(x, y)]

    def text(self, px: float, py: float, t: str, size=12):
        self.items.append(f'<text x="{_n(px)}" y="{_n(py)}" font-family="sans-serif" '
                          f'font-size="{size}">{_esc(t)}</text>')

    def render(self) -> str:
        body = list(self.items)
        if self._layer is not None:
            body.append("</g>")
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>', *body, "</svg>"]) + "\n"


def _planar(P, dim):
    if dim == 3:
        return np.asarray(P)[..., :2]
    return np.asarray(P)


def mesh_svg(mesh, highlight=None) -> str:
    """Boundary segments; a 3D mesh is drawn as its projection to the first two coordinates."""
    if mesh.dim == 3:
        warnings.warn("3D mesh drawn as a projection onto the x-y plane", stacklevel=2)
    X = _planar(mesh.vertices[mesh.elements], mesh.dim)
    c = Canvas(X.reshape(-1, 2).min(0), X.reshape(-1, 2).max(0))
    c.layer("boundary")
    if mesh.dim == 2:
        c.segments(X[:, 0], X[:, 1], width=0.8)
    else:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            c.segments(X[:, a], X[:, b], stroke="#555", width=0.3)
    if highlight is not None and len(highlight):
        c.layer("highlight")
        c.dots(_planar(highlight, mesh.dim), r=1.2, fill="#c00")
    return c.render()


def patch_svg(mesh, patch) -> str:
    """Layers: the boundary near Q, the trapezoid outline, T_Gamma samples and the Omega_L fill."""
    frame = patch.frame
    if frame.dim == 3:
        warnings.warn("3D patch drawn as a projection onto the first two local coordinates", stacklevel=2)
    trap = patch.T.trapezoid
    s, an, bn, h = frame.side, frame.a_height, frame.b_height, trap.h
    lo = np.array([-s / 2 - 0.05 * s, -bn - 0.05 * (an + bn)])
    hi = np.array([s / 2 + 0.05 * s, an + s / 4 + 0.05 * (an + bn)])
    c = Canvas(lo, hi)
    c.layer("boundary")
    X = mesh.vertices[mesh.elements]
    if frame.dim == 2:
        L = frame.to_local(X.reshape(-1, 2)).reshape(X.shape)
        keep = np.all((L[..., 0] > lo[0] - s) & (L[..., 0] < hi[0] + s), axis=1)
        L = L[keep]
        c.segments(L[:, 0], L[:, 1], stroke="#000", width=1.0)
    c.layer("trapezoid")
    # top edge at height an, walls u = an - h (s/2 - |x|) down to -bn
    xb = max(s / 2 - (an + bn) / h, 0.0)
    c.polyline(np.array([[-s / 2, an], [s / 2, an], [xb, -bn], [-xb, -bn]]), stroke="#06c", width=1.0,
               closed=True)
    c.layer("omega_L")
    V = patch.omega_L.vertices
    if frame.dim == 2:
        loc = frame.to_local(V)
        E = patch.omega_L.elements
        A, B = loc[E[:, 0]], loc[E[:, 1]]
        c.segments(A, B, stroke="#090", width=1.2)
        c.polyline(loc[_loop_order(E)], stroke="none", fill="#9c9", opacity=0.35, closed=True)
    else:
        c.dots(frame.to_local(V)[:, [0, 2]], r=0.6, fill="#090")
    c.layer("T_Gamma")
    y = patch.T.samples[patch.T_Gamma]
    c.dots(y[:, [0, -1]], r=1.2, fill="#c00")
    c.layer("labels")
    c.text(PAD, PAD - 6, f"h = {h:g}, s = {s:.4g}, sigma(T_Gamma) = {patch.common_measure:.4g}")
    return c.render()


def _loop_order(E):
    nxt = {int(a): int(b) for a, b in E}
    start = int(E[0, 0])
    out, v = [start], nxt[start]
    while v != start and len(out) <= len(E):
        out.append(v)
        v = nxt[v]
    return np.array(out)


def loglog_svg(x, y, slope: float | None = None, xlabel: str = "log(1/r)", ylabel: str = "log value",
               series: dict | None = None) -> str:
    """Log-log polylines with a fitted-slope note.  ``x`` and ``y`` are already logarithms."""
    series = series or {"data": (x, y)}
    allx = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ally = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    ok = np.isfinite(allx) & np.isfinite(ally)
    lo = np.array([allx[ok].min(), ally[ok].min()])
    hi = np.array([allx[ok].max(), ally[ok].max()])
    c = Canvas(lo, hi)
    c.layer("axes")
    c.polyline(np.array([[lo[0], lo[1]], [hi[0], lo[1]]]), stroke="#888")
    c.polyline(np.array([[lo[0], lo[1]], [lo[0], hi[1]]]), stroke="#888")
    c.text(W / 2 - 30, H - 4, xlabel)
    c.text(4, 14, ylabel)
    palette = ["#c00", "#06c", "#090", "#c60", "#609", "#066", "#333"]
    for i, (name, (sx, sy)) in enumerate(sorted(series.items())):
        P = np.column_stack([sx, sy]).astype(float)
        P = P[np.all(np.isfinite(P), axis=1)]
        if len(P) == 0:
            continue
        c.layer(f"series-{name}")
        col = palette[i % len(palette)]
        c.polyline(P, stroke=col, width=1.5)
        c.dots(P, r=2.5, fill=col)
    if slope is not None and not math.isnan(slope):
        c.layer("fit")
        c.text(PAD + 8, PAD + 14, f"fitted slope {slope:.4f}")
    return c.render()
