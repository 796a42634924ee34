"""Compiled pairwise searches used by the cone construction.

Pieces live in frame coordinates padded to width 3: (x, 0, u) for the
plane and (x1, x2, u) in space.  Every kernel works on a contiguous range
of target indices so callers can split work across threads.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def bin_pieces(xmin, xmax, lo, width, nbins):
    """CSR lists of pieces overlapping each bin along the first coordinate."""
    K = xmin.shape[0]
    counts = np.zeros(nbins + 1, np.int64)
    b0 = np.empty(K, np.int64)
    b1 = np.empty(K, np.int64)
    for i in range(K):
        a = int(math.floor((xmin[i] - lo) / width))
        b = int(math.floor((xmax[i] - lo) / width))
        a = min(max(a, 0), nbins - 1)
        b = min(max(b, 0), nbins - 1)
        b0[i] = a
        b1[i] = b
        for j in range(a, b + 1):
            counts[j + 1] += 1
    for j in range(nbins):
        counts[j + 1] += counts[j]
    fill = counts[:-1].copy()
    items = np.empty(counts[nbins], np.int64)
    for i in range(K):
        for j in range(b0[i], b1[i] + 1):
            items[fill[j]] = i
            fill[j] += 1
    return counts, items


@njit(cache=True, nogil=True)
def height_above(P, k, x1, x2):
    """Height of piece k over (x1, x2), or NaN if (x1, x2) is outside its shadow."""
    if P.shape[1] == 2:
        xa, ua = P[k, 0, 0], P[k, 0, 2]
        xb, ub = P[k, 1, 0], P[k, 1, 2]
        dx = xb - xa
        if dx == 0.0:
            return np.nan
        t = (x1 - xa) / dx
        if t < 0.0 or t > 1.0:
            return np.nan
        return ua + t * (ub - ua)
    ax, ay, au = P[k, 0, 0], P[k, 0, 1], P[k, 0, 2]
    bx, by, bu = P[k, 1, 0] - ax, P[k, 1, 1] - ay, P[k, 1, 2] - au
    cx, cy, cu = P[k, 2, 0] - ax, P[k, 2, 1] - ay, P[k, 2, 2] - au
    det = bx * cy - by * cx
    scale = (abs(bx) + abs(by)) * (abs(cx) + abs(cy))
    if abs(det) <= 1e-14 * scale:
        return np.nan
    px, py = x1 - ax, x2 - ay
    v = (px * cy - py * cx) / det
    w = (bx * py - by * px) / det
    if v < -1e-12 or w < -1e-12 or v + w > 1.0 + 1e-12:
        return np.nan
    return au + v * bu + w * cu


@njit(cache=True, nogil=True)
def occluded(S, P, counts, items, lo, width, nbins, tol, start, stop, out):
    """out[j] = True when some piece lies strictly above sample j."""
    for j in range(start, stop):
        x1, x2, u = S[j, 0], S[j, 1], S[j, 2]
        b = int(math.floor((x1 - lo) / width))
        b = min(max(b, 0), nbins - 1)
        hit = False
        for q in range(counts[b], counts[b + 1]):
            hv = height_above(P, items[q], x1, x2)
            if hv == hv and hv > u + tol:
                hit = True
                break
        out[j] = hit


@njit(cache=True, nogil=True)
def cone_blocked(S, order, xs_sorted, targets, h, umax, start, stop, out):
    """out[i] = True when some sample z != targets[i] sits in the upward cone.

    z blocks y when f(z) - f(y) > 0 and f(z) - f(y) >= h |pi(z) - pi(y)|.
    ``order`` sorts S by first coordinate and ``xs_sorted`` holds those keys.
    """
    n = xs_sorted.shape[0]
    for i in range(start, stop):
        y = targets[i]
        x1, x2, u = S[y, 0], S[y, 1], S[y, 2]
        reach = (umax - u) / h
        lo = np.searchsorted(xs_sorted, x1 - reach, side="left")
        hi = np.searchsorted(xs_sorted, x1 + reach, side="right")
        hit = False
        for q in range(lo, min(hi, n)):
            z = order[q]
            dz = S[z, 2] - u
            if dz <= 0.0:
                continue
            d1 = S[z, 0] - x1
            d2 = S[z, 1] - x2
            if dz >= h * math.sqrt(d1 * d1 + d2 * d2):
                hit = True
                break
        out[i] = hit


@njit(cache=True, nogil=True)
def cone_scale_mask(S, order, xs_sorted, targets, h, umax, s, log_alpha, start, stop, out):
    """Bit k of out[i] is set when some z in the cone of y has s_k <= dz <= s_(k-1).

    s_k = s / alpha^k; only k in [0, 62] are recorded.
    """
    n = xs_sorted.shape[0]
    for i in range(start, stop):
        y = targets[i]
        x1, x2, u = S[y, 0], S[y, 1], S[y, 2]
        reach = (umax - u) / h
        lo = np.searchsorted(xs_sorted, x1 - reach, side="left")
        hi = np.searchsorted(xs_sorted, x1 + reach, side="right")
        mask = np.int64(0)
        for q in range(lo, min(hi, n)):
            z = order[q]
            dz = S[z, 2] - u
            if dz <= 0.0:
                continue
            d1 = S[z, 0] - x1
            d2 = S[z, 1] - x2
            if dz < h * math.sqrt(d1 * d1 + d2 * d2):
                continue
            # s_k <= dz <= s_(k-1)  <=>  k >= log(s/dz)/log(alpha) >= k - 1
            t = math.log(s / dz) / log_alpha
            kk = int(math.ceil(t))
            if kk < 0:
                kk = 0
            if kk <= 62:
                mask |= np.int64(1) << kk
            # dz exactly on a ladder value belongs to two consecutive k
            if t == math.floor(t) and kk + 1 <= 62:
                mask |= np.int64(1) << (kk + 1)
        out[i] = mask


@njit(cache=True, nogil=True)
def envelope_points(nodes, pts, h, start, stop, out):
    """out[i] = max(out[i], max_p (u_p - h |x_i - x_p|))."""
    for i in range(start, stop):
        best = out[i]
        a1, a2 = nodes[i, 0], nodes[i, 1]
        for p in range(pts.shape[0]):
            d1 = a1 - pts[p, 0]
            d2 = a2 - pts[p, 1]
            v = pts[p, 2] - h * math.sqrt(d1 * d1 + d2 * d2)
            if v > best:
                best = v
        out[i] = best


@njit(cache=True, nogil=True)
def envelope_segments(nodes, A, B, h, start, stop, out):
    """Max over segment points p of u(p) - h |x - pi(p)|, for segments with slope <= h.

    The objective is concave along the segment; its maximizer has a closed form.
    """
    for i in range(start, stop):
        best = out[i]
        x1, x2 = nodes[i, 0], nodes[i, 1]
        for q in range(A.shape[0]):
            e1 = B[q, 0] - A[q, 0]
            e2 = B[q, 1] - A[q, 1]
            du = B[q, 2] - A[q, 2]
            L2 = e1 * e1 + e2 * e2
            if L2 == 0.0:
                v = max(A[q, 2], B[q, 2]) - h * math.sqrt((x1 - A[q, 0]) ** 2 + (x2 - A[q, 1]) ** 2)
                if v > best:
                    best = v
                continue
            L = math.sqrt(L2)
            w1, w2 = x1 - A[q, 0], x2 - A[q, 1]
            t0 = (w1 * e1 + w2 * e2) / L2
            p1, p2 = w1 - t0 * e1, w2 - t0 * e2
            dperp = math.sqrt(p1 * p1 + p2 * p2)
            kappa = du / (h * L)
            if kappa >= 1.0:
                t = 1.0
            elif kappa <= -1.0:
                t = 0.0
            else:
                t = t0 + dperp * kappa / (L * math.sqrt(1.0 - kappa * kappa))
                t = min(max(t, 0.0), 1.0)
            d1 = x1 - (A[q, 0] + t * e1)
            d2 = x2 - (A[q, 1] + t * e2)
            v = A[q, 2] + t * du - h * math.sqrt(d1 * d1 + d2 * d2)
            if v > best:
                best = v
        out[i] = best


@njit(cache=True, nogil=True)
def envelope_triangles(nodes, P, start, stop, out):
    """Plane value of each triangle at nodes inside its shadow (gradient <= h assumed)."""
    for i in range(start, stop):
        best = out[i]
        for k in range(P.shape[0]):
            v = height_above(P, k, nodes[i, 0], nodes[i, 1])
            if v == v and v > best:
                best = v
        out[i] = best
