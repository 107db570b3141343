"""Independent reference implementations used as test oracles."""

import numpy as np

from spherestereo.matcher import CostVolume


def census_oracle(img, ww, wh, mask=None):
    h, w = img.shape
    rx, ry = ww // 2, wh // 2
    desc = np.zeros((h, w), dtype=np.uint64)
    valid = np.zeros((h, w), dtype=bool)
    for y in range(ry, h - ry):
        for x in range(rx, w - rx):
            if mask is not None and not mask[y - ry : y + ry + 1, x - rx : x + rx + 1].all():
                continue
            valid[y, x] = True
            bits = 0
            bit = 0
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    if dy == 0 and dx == 0:
                        continue
                    if img[y + dy, x + dx] < img[y, x]:
                        bits |= 1 << bit
                    bit += 1
            desc[y, x] = bits
    return desc, valid


def dense_with_ranges(vol: CostVolume):
    """Dense (h, w, D) costs plus a mask of in-range disparities."""
    dense, d0 = vol.to_dense(fill=0)
    D = dense.shape[2]
    k = np.arange(D)
    inside = (k >= (vol.dlo - d0)[..., None]) & (k <= (vol.dhi - d0)[..., None])
    return dense.astype(np.int64), inside, d0


def naive_path(C, inside, dx, dy, p1, p2):
    """Direct recurrence along direction (dx, dy), one pixel at a time, vectorised over d."""
    h, w, D = C.shape
    INF = np.iinfo(np.int64).max // 4
    L = np.full((h, w, D), INF, dtype=np.int64)
    ys = range(h) if dy >= 0 else range(h - 1, -1, -1)
    xs = range(w) if dx >= 0 else range(w - 1, -1, -1)
    for y in ys:
        for x in xs:
            py, px = y - dy, x - dx
            here = inside[y, x]
            if not (0 <= py < h and 0 <= px < w):
                L[y, x, here] = C[y, x, here]
                continue
            prev = np.where(inside[py, px], L[py, px], INF)
            m = prev.min()
            left = np.concatenate([[INF], prev[:-1]])
            right = np.concatenate([prev[1:], [INF]])
            best = np.minimum.reduce([prev, left + p1, right + p1, np.full(D, m + p2)])
            L[y, x, here] = (C[y, x] + best - m)[here]
    return L


def naive_sgm(vol: CostVolume, p1, p2, directions):
    C, inside, d0 = dense_with_ranges(vol)
    S = np.zeros_like(C)
    for dx, dy in directions:
        S += np.where(inside, naive_path(C, inside, dx, dy, p1, p2), 0)
    return S, inside


def random_volume(rng, h, w, D, sat=48, ragged=False):
    dense = rng.integers(0, sat + 1, (h, w, D)).astype(np.uint16)
    if not ragged:
        return CostVolume.from_dense(dense, d_min=0, saturation=sat)
    lo = rng.integers(0, D // 2, (h, w))
    hi = lo + rng.integers(0, D - D // 2, (h, w))
    vol = CostVolume.layout(lo, hi, sat)
    vol.cost = np.concatenate([dense[y, x, lo[y, x] : hi[y, x] + 1] for y in range(h) for x in range(w)])
    return vol


def agg_dense(agg: CostVolume, inside):
    dense, _ = agg.to_dense(fill=0)
    return np.where(inside, dense.astype(np.int64), 0)


def brute_force(test, ref):
    """O(n m) double loop; ties go to the first (smallest) reference index."""
    dist = np.empty(len(test))
    idx = np.empty(len(test), dtype=np.intp)
    for i, p in enumerate(test):
        best, arg = np.inf, -1
        for j, q in enumerate(ref):
            diff = q - p
            dd = np.sqrt(diff @ diff)
            if dd < best:
                best, arg = dd, j
        dist[i], idx[i] = best, arg
    return dist, idx


def midpoint(c1, d1, c2, d2):
    """Closest-approach midpoint of two rays ``c + t d``."""
    w0 = c1 - c2
    a, b, c = d1 @ d1, d1 @ d2, d2 @ d2
    d, e = d1 @ w0, d2 @ w0
    den = a * c - b * b
    s = (b * e - c * d) / den
    t = (a * e - b * d) / den
    return 0.5 * ((c1 + s * d1) + (c2 + t * d2))
