"""Numba inner loops for the matcher and the procedural texture.

Cost volumes use a ragged layout: pixel (y, x) owns the disparities
``dlo[y, x] .. dlo[y, x] + width[y, x] - 1`` stored contiguously at
``cost[start[y, x]:start[y, x] + width[y, x]]``.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return int((v * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def census_cost(desc_l, valid_l, desc_r, valid_r, dlo, width, start, total, saturation):
    H, W = desc_l.shape
    cost = np.empty(total, dtype=np.uint16)
    for y in range(H):
        for x in range(W):
            s = start[y, x]
            lo = dlo[y, x]
            for k in range(width[y, x]):
                xr = x - (lo + k)
                if valid_l[y, x] and 0 <= xr < W and valid_r[y, xr]:
                    cost[s + k] = popcount64(desc_l[y, x] ^ desc_r[y, xr])
                else:
                    cost[s + k] = saturation
    return cost


@njit(cache=True)
def aggregate_direction(cost, dlo, width, start, dx, dy, p1, p2, L):
    """One scanline pass of the SGM recurrence, written into ``L``."""
    H, W = dlo.shape
    if dy >= 0:
        y0, y1, ys = 0, H, 1
    else:
        y0, y1, ys = H - 1, -1, -1
    if dx >= 0:
        x0, x1, xs = 0, W, 1
    else:
        x0, x1, xs = W - 1, -1, -1
    for y in range(y0, y1, ys):
        py = y - dy
        for x in range(x0, x1, xs):
            s = start[y, x]
            n = width[y, x]
            px = x - dx
            if py < 0 or py >= H or px < 0 or px >= W:
                for k in range(n):
                    L[s + k] = cost[s + k]
                continue
            ps = start[py, px]
            pn = width[py, px]
            shift = dlo[y, x] - dlo[py, px]
            mprev = np.int32(2147483647)
            for j in range(pn):
                v = np.int32(L[ps + j])
                if v < mprev:
                    mprev = v
            far = mprev + p2
            for k in range(n):
                best = far
                j = k + shift
                if 0 <= j < pn:
                    v = np.int32(L[ps + j])
                    if v < best:
                        best = v
                if 0 <= j - 1 < pn:
                    v = np.int32(L[ps + j - 1]) + p1
                    if v < best:
                        best = v
                if 0 <= j + 1 < pn:
                    v = np.int32(L[ps + j + 1]) + p1
                    if v < best:
                        best = v
                L[s + k] = np.int32(cost[s + k]) + best - mprev


@njit(cache=True)
def accumulate(S, L):
    for i in range(S.shape[0]):
        S[i] += L[i]


@njit(cache=True)
def winner_take_all(agg, dlo, width, start, valid, uniqueness):
    """Integer argmin (smallest disparity on ties), subpixel disparity and uniqueness flag."""
    H, W = dlo.shape
    dint = np.zeros((H, W), dtype=np.int32)
    dsub = np.full((H, W), -np.inf, dtype=np.float64)
    ok = np.zeros((H, W), dtype=np.bool_)
    for y in range(H):
        for x in range(W):
            if not valid[y, x]:
                continue
            s = start[y, x]
            n = width[y, x]
            bk = 0
            best = np.int64(agg[s])
            for k in range(1, n):
                v = np.int64(agg[s + k])
                if v < best:
                    best = v
                    bk = k
            second = np.int64(9223372036854775807)
            for k in range(n):
                if k < bk - 1 or k > bk + 1:
                    v = np.int64(agg[s + k])
                    if v < second:
                        second = v
            dint[y, x] = dlo[y, x] + bk
            if second <= best or second < uniqueness * best:
                continue
            off = 0.0
            if 0 < bk < n - 1:
                cm = float(agg[s + bk - 1])
                c0 = float(agg[s + bk])
                cp = float(agg[s + bk + 1])
                den = cm - 2.0 * c0 + cp
                if den > 0.0:
                    off = (cm - cp) / (2.0 * den)
            dsub[y, x] = dlo[y, x] + bk + off
            ok[y, x] = True
    return dint, dsub, ok


@njit(cache=True)
def right_wta(agg, dlo, width, start, valid, valid_r):
    """Right-view disparities from the left-referenced volume: min over d of C(q + d, d).

    Right pixels flagged invalid in ``valid_r`` get no disparity.
    """
    H, W = dlo.shape
    best = np.full((H, W), np.int64(9223372036854775807))
    dr = np.full((H, W), np.int32(-2147483647))
    for y in range(H):
        for x in range(W):
            if not valid[y, x]:
                continue
            s = start[y, x]
            lo = dlo[y, x]
            for k in range(width[y, x]):
                d = lo + k
                q = x - d
                if q < 0 or q >= W or not valid_r[y, q]:
                    continue
                v = np.int64(agg[s + k])
                if v < best[y, q] or (v == best[y, q] and d < dr[y, q]):
                    best[y, q] = v
                    dr[y, q] = d
    has = best < np.int64(9223372036854775807)
    return dr, has


@njit(cache=True)
def lr_check(dint, ok, dr, has_r, threshold):
    H, W = dint.shape
    out = ok.copy()
    for y in range(H):
        for x in range(W):
            if not ok[y, x]:
                continue
            q = x - dint[y, x]
            if q < 0 or q >= W or not has_r[y, q] or abs(dint[y, x] - dr[y, q]) > threshold:
                out[y, x] = False
    return out


# -- value noise ----------------------------------------------------------------

@njit(cache=True, inline="always")
def _lattice(ix, iy, seed):
    # integer hash -> [0, 1); stateless so results do not depend on evaluation order
    h = (ix * np.int64(73856093)) ^ (iy * np.int64(19349663)) ^ (seed * np.int64(83492791))
    h = (h ^ (h >> np.int64(13))) * np.int64(1274126177)
    h = h ^ (h >> np.int64(16))
    return float(h & np.int64(0xFFFFFF)) / 16777216.0


@njit(cache=True)
def value_noise(x, y, seed, octaves, reverse):
    """Flat float64 arrays in, smooth noise in [0, 1] out (see synth.value_noise)."""
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        total = 0.0
        norm = 0.0
        for o in range(octaves):
            if reverse:
                period = 2.0**o
                amp = 1.0 / (1.0 + o)
            else:
                period = 2.0 ** (octaves - 1 - o)
                amp = 0.5**o
            xs = x[i] / period
            ys = y[i] / period
            x0 = np.floor(xs)
            y0 = np.floor(ys)
            fx = xs - x0
            fy = ys - y0
            sx = fx * fx * (3.0 - 2.0 * fx)
            sy = fy * fy * (3.0 - 2.0 * fy)
            s = np.int64(seed + 101 * o)
            ix = np.int64(x0)
            iy = np.int64(y0)
            v00 = _lattice(ix, iy, s)
            v10 = _lattice(ix + 1, iy, s)
            v01 = _lattice(ix, iy + 1, s)
            v11 = _lattice(ix + 1, iy + 1, s)
            total += amp * ((v00 * (1 - sx) + v10 * sx) * (1 - sy) + (v01 * (1 - sx) + v11 * sx) * sy)
            norm += amp
        out[i] = total / norm
    return out
