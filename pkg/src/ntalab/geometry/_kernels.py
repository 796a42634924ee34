"""Numba kernels: BVH construction, exact nearest-element queries, clipping.

Every element is stored as padded 3D vertex coordinates ``ecoords`` of
shape (E, k, 3) with k = 2 for segments (z = 0) and k = 3 for triangles.

Feature codes returned by the closest-point routines:
0 element interior, 1 edge AB, 2 edge BC, 3 edge CA, 4 vertex A,
5 vertex B, 6 vertex C.
"""
import math

import numba as nb
import numpy as np

LEAF_SIZE = 4
STACK_SIZE = 256


@nb.njit(cache=True)
def build_bvh(lo, hi):
    E = lo.shape[0]
    cent = 0.5 * (lo + hi)
    order = np.arange(E)
    cap = 2 * E + 1
    nlo = np.empty((cap, 3))
    nhi = np.empty((cap, 3))
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    count = np.zeros(cap, np.int64)
    st_node = np.empty(cap, np.int64)
    st_s = np.empty(cap, np.int64)
    st_e = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_s[0] = 0
    st_e[0] = E
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_s[sp]
        e = st_e[sp]
        bl = np.full(3, np.inf)
        bh = np.full(3, -np.inf)
        cl = np.full(3, np.inf)
        ch = np.full(3, -np.inf)
        for i in range(s, e):
            el = order[i]
            for a in range(3):
                bl[a] = min(bl[a], lo[el, a])
                bh[a] = max(bh[a], hi[el, a])
                cl[a] = min(cl[a], cent[el, a])
                ch[a] = max(ch[a], cent[el, a])
        for a in range(3):
            nlo[node, a] = bl[a]
            nhi[node, a] = bh[a]
        start[node] = s
        count[node] = e - s
        if e - s <= LEAF_SIZE:
            continue
        axis = 0
        ext = ch[0] - cl[0]
        for a in range(1, 3):
            if ch[a] - cl[a] > ext:
                ext = ch[a] - cl[a]
                axis = a
        if ext > 0.0:
            sub = order[s:e].copy()
            keys = np.empty(e - s)
            for i in range(e - s):
                keys[i] = cent[sub[i], axis]
            idx = np.argsort(keys, kind="mergesort")
            for i in range(e - s):
                order[s + i] = sub[idx[i]]
        mid = (s + e) // 2
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_node[sp] = lc
        st_s[sp] = s
        st_e[sp] = mid
        sp += 1
        st_node[sp] = rc
        st_s[sp] = mid
        st_e[sp] = e
        sp += 1
    return (nlo[:n_nodes].copy(), nhi[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy(), order)


@nb.njit(cache=True, inline="always")
def _box_d2(nlo, nhi, nd, px, py, pz):
    d = 0.0
    t = nlo[nd, 0] - px
    if t > 0.0:
        d += t * t
    t = px - nhi[nd, 0]
    if t > 0.0:
        d += t * t
    t = nlo[nd, 1] - py
    if t > 0.0:
        d += t * t
    t = py - nhi[nd, 1]
    if t > 0.0:
        d += t * t
    t = nlo[nd, 2] - pz
    if t > 0.0:
        d += t * t
    t = pz - nhi[nd, 2]
    if t > 0.0:
        d += t * t
    return d


@nb.njit(cache=True, inline="always")
def _closest_seg(ec, e, px, py, pz):
    ax = ec[e, 0, 0]
    ay = ec[e, 0, 1]
    az = ec[e, 0, 2]
    dx = ec[e, 1, 0] - ax
    dy = ec[e, 1, 1] - ay
    dz = ec[e, 1, 2] - az
    t = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / (dx * dx + dy * dy + dz * dz)
    feat = 0
    if t <= 0.0:
        t = 0.0
        feat = 4
    elif t >= 1.0:
        t = 1.0
        feat = 5
    cx = ax + t * dx
    cy = ay + t * dy
    cz = az + t * dz
    return (px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2, cx, cy, cz, feat


@nb.njit(cache=True, inline="always")
def _closest_tri(ec, e, px, py, pz):
    # Region classification after Ericson, Real-Time Collision Detection 5.1.5
    ax = ec[e, 0, 0]
    ay = ec[e, 0, 1]
    az = ec[e, 0, 2]
    bx = ec[e, 1, 0]
    by = ec[e, 1, 1]
    bz = ec[e, 1, 2]
    qx = ec[e, 2, 0]
    qy = ec[e, 2, 1]
    qz = ec[e, 2, 2]
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = qx - ax
    acy = qy - ay
    acz = qz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        cx, cy, cz, feat = ax, ay, az, 4
    else:
        bpx = px - bx
        bpy = py - by
        bpz = pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            cx, cy, cz, feat = bx, by, bz, 5
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                cx, cy, cz, feat = ax + v * abx, ay + v * aby, az + v * abz, 1
            else:
                cpx = px - qx
                cpy = py - qy
                cpz = pz - qz
                d5 = abx * cpx + aby * cpy + abz * cpz
                d6 = acx * cpx + acy * cpy + acz * cpz
                if d6 >= 0.0 and d5 <= d6:
                    cx, cy, cz, feat = qx, qy, qz, 6
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        cx, cy, cz, feat = ax + w * acx, ay + w * acy, az + w * acz, 3
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            cx = bx + w * (qx - bx)
                            cy = by + w * (qy - by)
                            cz = bz + w * (qz - bz)
                            feat = 2
                        else:
                            den = 1.0 / (va + vb + vc)
                            v = vb * den
                            w = vc * den
                            cx = ax + abx * v + acx * w
                            cy = ay + aby * v + acy * w
                            cz = az + abz * v + acz * w
                            feat = 0
    return (px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2, cx, cy, cz, feat


@nb.njit(cache=True, inline="always")
def _closest(ec, e, px, py, pz):
    if ec.shape[1] == 2:
        return _closest_seg(ec, e, px, py, pz)
    return _closest_tri(ec, e, px, py, pz)


@nb.njit(cache=True)
def _nearest(px, py, pz, hint, nlo, nhi, left, right, start, count, order, ec, stack):
    best = np.inf
    be = -1
    bx = 0.0
    by = 0.0
    bz = 0.0
    bf = 0
    if hint >= 0:
        best, bx, by, bz, bf = _closest(ec, hint, px, py, pz)
        be = hint
    sp = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        nd = stack[sp]
        if _box_d2(nlo, nhi, nd, px, py, pz) > best:
            continue
        lc = left[nd]
        if lc < 0:
            for i in range(start[nd], start[nd] + count[nd]):
                e = order[i]
                d2, cx, cy, cz, f = _closest(ec, e, px, py, pz)
                if d2 < best or (d2 == best and e < be):
                    best = d2
                    be = e
                    bx = cx
                    by = cy
                    bz = cz
                    bf = f
        else:
            rc = right[nd]
            dl = _box_d2(nlo, nhi, lc, px, py, pz)
            dr = _box_d2(nlo, nhi, rc, px, py, pz)
            if dl < dr:
                if dr <= best:
                    stack[sp] = rc
                    sp += 1
                if dl <= best:
                    stack[sp] = lc
                    sp += 1
            else:
                if dl <= best:
                    stack[sp] = lc
                    sp += 1
                if dr <= best:
                    stack[sp] = rc
                    sp += 1
    return best, be, bx, by, bz, bf


@nb.njit(cache=True, nogil=True)
def nearest_many(P, nlo, nhi, left, right, start, count, order, ec):
    m = P.shape[0]
    d = np.empty(m)
    el = np.empty(m, np.int64)
    cp = np.empty((m, 3))
    feat = np.empty(m, np.int64)
    stack = np.empty(STACK_SIZE, np.int64)
    hint = -1
    for i in range(m):
        d2, e, cx, cy, cz, f = _nearest(P[i, 0], P[i, 1], P[i, 2], hint,
                                        nlo, nhi, left, right, start, count, order, ec, stack)
        d[i] = math.sqrt(d2)
        el[i] = e
        cp[i, 0] = cx
        cp[i, 1] = cy
        cp[i, 2] = cz
        feat[i] = f
        hint = e
    return d, el, cp, feat


@nb.njit(cache=True, nogil=True)
def brute_nearest(P, ec):
    m = P.shape[0]
    d = np.empty(m)
    el = np.empty(m, np.int64)
    for i in range(m):
        best = np.inf
        be = -1
        for e in range(ec.shape[0]):
            d2 = _closest(ec, e, P[i, 0], P[i, 1], P[i, 2])[0]
            if d2 < best:
                best = d2
                be = e
        d[i] = math.sqrt(best)
        el[i] = be
    return d, el


# splitmix64 counter-based generator, one independent stream per walk

@nb.njit(cache=True, inline="always")
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def _unit(z):
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True, nogil=True)
def wos_batch(sx, sy, sz, dim, n_walks, seed, shell, max_steps,
              nlo, nhi, left, right, start, count, order, ec, counts, exits, record):
    """Run ``n_walks`` walks from (sx, sy, sz); add hits to ``counts``.

    Returns (total steps, truncated walks).
    """
    stack = np.empty(STACK_SIZE, np.int64)
    d2, e0, cx, cy, cz, f = _nearest(sx, sy, sz, -1, nlo, nhi, left, right, start, count,
                                     order, ec, stack)
    r0 = math.sqrt(d2)
    total = 0
    truncated = 0
    base = np.uint64(seed)
    two_pi = 2.0 * math.pi
    for w in range(n_walks):
        state = base ^ (np.uint64(w) * np.uint64(0xD1B54A32D192ED03))
        state, z = _splitmix(state)
        x = sx
        y = sy
        zc = sz
        d = r0
        hint = e0
        qx, qy, qz = cx, cy, cz
        steps = 0
        while d > shell:
            if steps >= max_steps:
                truncated += 1
                break
            if dim == 2:
                state, z = _splitmix(state)
                ang = two_pi * _unit(z)
                x += d * math.cos(ang)
                y += d * math.sin(ang)
            else:
                state, z = _splitmix(state)
                u = 2.0 * _unit(z) - 1.0
                state, z = _splitmix(state)
                ang = two_pi * _unit(z)
                rho = math.sqrt(max(0.0, 1.0 - u * u))
                x += d * rho * math.cos(ang)
                y += d * rho * math.sin(ang)
                zc += d * u
            d2, hint, qx, qy, qz, f = _nearest(x, y, zc, hint, nlo, nhi, left, right, start,
                                               count, order, ec, stack)
            d = math.sqrt(d2)
            steps += 1
        total += steps
        counts[hint] += 1
        if record:
            exits[w, 0] = qx
            exits[w, 1] = qy
            exits[w, 2] = qz
    return total, truncated


# exact clipped measure of elements against a ball

@nb.njit(cache=True, inline="always")
def _sector(ux, uy, vx, vy, r2):
    return 0.5 * r2 * math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)


@nb.njit(cache=True)
def _tri_disk_signed(ax, ay, bx, by, r):
    """Signed area of disk(0, r) intersected with triangle (0, a, b)."""
    r2 = r * r
    cr = ax * by - ay * bx
    if cr == 0.0:
        return 0.0
    da2 = ax * ax + ay * ay
    db2 = bx * bx + by * by
    in_a = da2 <= r2
    in_b = db2 <= r2
    if in_a and in_b:
        return 0.5 * cr
    dx = bx - ax
    dy = by - ay
    qa = dx * dx + dy * dy
    qb = ax * dx + ay * dy
    qc = da2 - r2
    disc = qb * qb - qa * qc
    if disc <= 0.0:
        return _sector(ax, ay, bx, by, r2)
    sq = math.sqrt(disc)
    t1 = (-qb - sq) / qa
    t2 = (-qb + sq) / qa
    if in_a:
        px = ax + t2 * dx
        py = ay + t2 * dy
        return 0.5 * (ax * py - ay * px) + _sector(px, py, bx, by, r2)
    if in_b:
        px = ax + t1 * dx
        py = ay + t1 * dy
        return _sector(ax, ay, px, py, r2) + 0.5 * (px * by - py * bx)
    if 0.0 < t1 < 1.0:
        p1x = ax + t1 * dx
        p1y = ay + t1 * dy
        p2x = ax + t2 * dx
        p2y = ay + t2 * dy
        return (_sector(ax, ay, p1x, p1y, r2) + 0.5 * (p1x * p2y - p1y * p2x)
                + _sector(p2x, p2y, bx, by, r2))
    return _sector(ax, ay, bx, by, r2)


@nb.njit(cache=True)
def clip_ball(ec, qx, qy, qz, r, out, t0, t1):
    """Per-element measure inside the open ball B(q, r).

    For segments the parameter interval [t0, t1] of the clipped piece is
    also written (t0 > t1 marks an empty piece).
    """
    E = ec.shape[0]
    r2 = r * r
    for e in range(E):
        out[e] = 0.0
        t0[e] = 1.0
        t1[e] = 0.0
        if ec.shape[1] == 2:
            ax = ec[e, 0, 0] - qx
            ay = ec[e, 0, 1] - qy
            az = ec[e, 0, 2] - qz
            dx = ec[e, 1, 0] - ec[e, 0, 0]
            dy = ec[e, 1, 1] - ec[e, 0, 1]
            dz = ec[e, 1, 2] - ec[e, 0, 2]
            qa = dx * dx + dy * dy + dz * dz
            qb = ax * dx + ay * dy + az * dz
            qc = ax * ax + ay * ay + az * az - r2
            disc = qb * qb - qa * qc
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            lo = max((-qb - sq) / qa, 0.0)
            hi = min((-qb + sq) / qa, 1.0)
            if hi > lo:
                out[e] = (hi - lo) * math.sqrt(qa)
                t0[e] = lo
                t1[e] = hi
        else:
            # bounding-sphere reject
            skip = True
            for k in range(3):
                ddx = ec[e, k, 0] - qx
                ddy = ec[e, k, 1] - qy
                ddz = ec[e, k, 2] - qz
                if ddx * ddx + ddy * ddy + ddz * ddz < r2:
                    skip = False
            ax = ec[e, 0, 0]
            ay = ec[e, 0, 1]
            az = ec[e, 0, 2]
            ux = ec[e, 1, 0] - ax
            uy = ec[e, 1, 1] - ay
            uz = ec[e, 1, 2] - az
            vx = ec[e, 2, 0] - ax
            vy = ec[e, 2, 1] - ay
            vz = ec[e, 2, 2] - az
            nx = uy * vz - uz * vy
            ny = uz * vx - ux * vz
            nz = ux * vy - uy * vx
            nn = math.sqrt(nx * nx + ny * ny + nz * nz)
            nx /= nn
            ny /= nn
            nz /= nn
            hgt = (qx - ax) * nx + (qy - ay) * ny + (qz - az) * nz
            if abs(hgt) >= r:
                continue
            if skip:
                # the ball may still cut the triangle interior
                d2 = _closest_tri(ec, e, qx, qy, qz)[0]
                if d2 >= r2:
                    continue
            rho = math.sqrt(r2 - hgt * hgt)
            # in-plane frame: e1 along u, e2 = n x e1
            lu = math.sqrt(ux * ux + uy * uy + uz * uz)
            e1x = ux / lu
            e1y = uy / lu
            e1z = uz / lu
            e2x = ny * e1z - nz * e1y
            e2y = nz * e1x - nx * e1z
            e2z = nx * e1y - ny * e1x
            cx = qx - hgt * nx
            cy = qy - hgt * ny
            cz = qz - hgt * nz
            px = np.empty(3)
            py = np.empty(3)
            for k in range(3):
                wx = ec[e, k, 0] - cx
                wy = ec[e, k, 1] - cy
                wz = ec[e, k, 2] - cz
                px[k] = wx * e1x + wy * e1y + wz * e1z
                py[k] = wx * e2x + wy * e2y + wz * e2z
            area = 0.0
            for k in range(3):
                j = (k + 1) % 3
                area += _tri_disk_signed(px[k], py[k], px[j], py[j], rho)
            out[e] = abs(area)
    return out
