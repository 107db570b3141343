"""Census-based hierarchical semi-global matching."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import EmptyRange, ImageTooSmall, WindowTooLarge

log = logging.getLogger(__name__)

INVALID = -np.inf

DIRECTIONS_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIRECTIONS_8 = DIRECTIONS_4 + ((1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True)
class SgmParams:
    p1: int = 10
    p2: int = 120
    num_paths: int = 8
    census_w: int = 7
    census_h: int = 7
    lr_threshold: float = 1.0
    uniqueness: float = 1.05
    levels: int | None = None
    margin: int = 4
    min_side: int = 32
    max_side: int = 128

    def __post_init__(self):
        if not 0 < self.p1 < self.p2:
            raise ValueError("penalties must satisfy 0 < P1 < P2")
        if self.num_paths not in (4, 8):
            raise ValueError("num_paths must be 4 or 8")
        if self.census_w % 2 == 0 or self.census_h % 2 == 0:
            raise ValueError("census window must be odd")
        if self.census_w * self.census_h - 1 > 64:
            raise ValueError("census descriptor must fit in 64 bits")
        if self.num_paths * (self.bitcount + self.p2) > np.iinfo(np.uint16).max:
            raise ValueError("aggregated costs would overflow 16 bits")

    @property
    def bitcount(self) -> int:
        return self.census_w * self.census_h - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.census_w, self.census_h


@dataclass(eq=False)
class CensusImage:
    desc: np.ndarray      # uint64 (h, w)
    valid: np.ndarray     # False on the border and wherever the window touches masked pixels
    window: tuple[int, int]

    @property
    def bitcount(self) -> int:
        return self.window[0] * self.window[1] - 1

    @property
    def shape(self):
        return self.desc.shape


@dataclass(eq=False)
class CostVolume:
    """Per-pixel disparity ranges with costs stored back to back.

    Pixel ``(y, x)`` covers disparities ``dlo[y, x] .. dhi[y, x]`` and its
    costs are ``cost[start[y, x] : start[y, x] + width[y, x]]``.
    """

    dlo: np.ndarray
    width: np.ndarray
    start: np.ndarray
    cost: np.ndarray
    saturation: int
    valid: np.ndarray | None = None

    @property
    def shape(self):
        return self.dlo.shape

    @property
    def dhi(self) -> np.ndarray:
        return self.dlo + self.width - 1

    def at(self, y: int, x: int) -> np.ndarray:
        s = self.start[y, x]
        return self.cost[s : s + self.width[y, x]]

    def with_costs(self, cost: np.ndarray) -> "CostVolume":
        return CostVolume(self.dlo, self.width, self.start, cost, self.saturation, self.valid)

    def to_dense(self, fill=None) -> tuple[np.ndarray, int]:
        """Dense ``(h, w, D)`` array over the global range and its first disparity."""
        fill = self.saturation if fill is None else fill
        d0 = int(self.dlo.min())
        D = int(self.dhi.max()) - d0 + 1
        h, w = self.shape
        out = np.full((h, w, D), fill, dtype=self.cost.dtype)
        for y in range(h):
            for x in range(w):
                k = self.dlo[y, x] - d0
                out[y, x, k : k + self.width[y, x]] = self.at(y, x)
        return out, d0

    @classmethod
    def layout(cls, dlo, dhi, saturation: int, valid=None, cost=None) -> "CostVolume":
        dlo = np.ascontiguousarray(dlo, dtype=np.int32)
        dhi = np.asarray(dhi, dtype=np.int32)
        if np.any(dhi < dlo):
            raise EmptyRange("disparity range is empty")
        width = np.ascontiguousarray(dhi - dlo + 1, dtype=np.int32)
        flat = np.cumsum(width.ravel(), dtype=np.int64)
        start = np.concatenate([[0], flat[:-1]]).reshape(width.shape)
        if cost is None:
            cost = np.zeros(int(flat[-1]), dtype=np.uint16)
        return cls(dlo, width, np.ascontiguousarray(start), cost, saturation, valid)

    @classmethod
    def from_dense(cls, dense, d_min: int = 0, saturation: int | None = None) -> "CostVolume":
        dense = np.asarray(dense)
        h, w, D = dense.shape
        sat = int(dense.max()) if saturation is None else saturation
        vol = cls.layout(np.full((h, w), d_min), np.full((h, w), d_min + D - 1), sat)
        vol.cost = np.ascontiguousarray(dense.reshape(-1)).astype(np.uint16)
        return vol


@dataclass(eq=False)
class DisparityMap:
    """Left-referenced disparity in pixels; ``INVALID`` (-inf) marks rejected pixels."""

    data: np.ndarray
    space: str = "frame"
    meta: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.data)

    @property
    def shape(self):
        return self.data.shape


def census_transform(image, window=(7, 7), mask=None) -> CensusImage:
    """Bit i set iff neighbour i (row-major, centre skipped) is strictly darker than the centre."""
    img = np.asarray(image, dtype=np.float32)
    ww, wh = window
    if ww % 2 == 0 or wh % 2 == 0:
        raise ValueError("census window must be odd")
    h, w = img.shape
    if ww > w or wh > h:
        raise WindowTooLarge(f"window {ww}x{wh} does not fit a {w}x{h} image")
    rx, ry = ww // 2, wh // 2
    desc = np.zeros((h, w), dtype=np.uint64)
    centre = img[ry : h - ry, rx : w - rx]
    inner = desc[ry : h - ry, rx : w - rx]
    bit = 0
    for dy in range(-ry, ry + 1):
        for dx in range(-rx, rx + 1):
            if dy == 0 and dx == 0:
                continue
            nb = img[ry + dy : h - ry + dy, rx + dx : w - rx + dx]
            inner |= (nb < centre).astype(np.uint64) << np.uint64(bit)
            bit += 1
    valid = np.zeros((h, w), dtype=bool)
    valid[ry : h - ry, rx : w - rx] = True
    if mask is not None:
        valid &= ndimage.minimum_filter(np.asarray(mask, dtype=bool), size=(wh, ww), mode="constant", cval=False)
    desc[~valid] = 0
    return CensusImage(desc, valid, (ww, wh))


def _range_arrays(shape, d_range):
    if isinstance(d_range, tuple) and len(d_range) == 2 and np.ndim(d_range[0]) == 0:
        lo, hi = int(d_range[0]), int(d_range[1])
        if hi < lo:
            raise EmptyRange(f"empty disparity range [{lo}, {hi}]")
        return np.full(shape, lo, dtype=np.int32), np.full(shape, hi, dtype=np.int32)
    lo, hi = d_range
    return np.asarray(lo, dtype=np.int32), np.asarray(hi, dtype=np.int32)


def compute_cost_volume(census_l: CensusImage, census_r: CensusImage, d_range) -> CostVolume:
    """Hamming cost ``C(p, d)`` between left pixel ``(x, y)`` and right pixel ``(x - d, y)``.

    ``d_range`` is either ``(d_min, d_max)`` or a pair of per-pixel arrays.
    Samples on census borders, masked pixels or outside the right image
    get the saturation cost (the descriptor bit count).
    """
    if census_l.shape != census_r.shape:
        raise ValueError("census images must have the same shape")
    lo, hi = _range_arrays(census_l.shape, d_range)
    sat = census_l.bitcount
    vol = CostVolume.layout(lo, hi, sat, valid=census_l.valid)
    vol.cost = _kernels.census_cost(
        census_l.desc, census_l.valid, census_r.desc, census_r.valid,
        vol.dlo, vol.width, vol.start, vol.cost.shape[0], sat,
    )
    return vol


def aggregate_paths(volume: CostVolume, p1: int, p2: int, directions=DIRECTIONS_8) -> CostVolume:
    """Sum of the per-direction scanline recurrences

    ``L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d+-1) + P1, min_k L(p-r, k) + P2) - min_k L(p-r, k)``.

    Disparities absent from the predecessor's range are simply not
    candidates; the ``P2`` jump from its minimum is always available.
    Penalties are used as given (``P1 = P2 = 0`` is allowed here).
    """
    if p1 < 0 or p2 < 0:
        raise ValueError("penalties must be non-negative")
    if len(directions) * (volume.saturation + max(p1, p2)) > np.iinfo(np.uint16).max:
        raise ValueError("aggregated costs would overflow 16 bits")
    n = volume.cost.shape[0]
    L = np.empty(n, dtype=np.uint16)
    S = np.zeros(n, dtype=np.uint16)
    cost = np.ascontiguousarray(volume.cost, dtype=np.uint16)
    for dx, dy in directions:
        _kernels.aggregate_direction(cost, volume.dlo, volume.width, volume.start, dx, dy, int(p1), int(p2), L)
        _kernels.accumulate(S, L)
    return volume.with_costs(S)


def sgm_aggregate(volume: CostVolume, params: SgmParams) -> CostVolume:
    """Multi-path aggregation with the penalties and path count of ``params``."""
    directions = DIRECTIONS_8 if params.num_paths == 8 else DIRECTIONS_4
    return aggregate_paths(volume, params.p1, params.p2, directions)


@dataclass(eq=False)
class Selection:
    left: DisparityMap
    right: np.ndarray       # integer right-view disparities, -1e9 where undefined
    winner: np.ndarray      # integer left winners before any rejection


def select_disparity(aggregated: CostVolume, params: SgmParams, valid=None, valid_r=None) -> Selection:
    """Winner-take-all with parabola subpixel fit, uniqueness and left-right check.

    ``valid``/``valid_r`` flag usable left/right pixels; a left pixel whose
    partner is an unusable right pixel fails the left-right check.
    """
    if valid is None:
        valid = aggregated.valid if aggregated.valid is not None else np.ones(aggregated.shape, dtype=bool)
    valid = np.ascontiguousarray(valid, dtype=np.bool_)
    if valid_r is None:
        valid_r = np.ones(aggregated.shape, dtype=bool)
    valid_r = np.ascontiguousarray(valid_r, dtype=np.bool_)
    dint, dsub, ok = _kernels.winner_take_all(
        aggregated.cost, aggregated.dlo, aggregated.width, aggregated.start, valid, float(params.uniqueness)
    )
    dr, has_r = _kernels.right_wta(aggregated.cost, aggregated.dlo, aggregated.width, aggregated.start, valid, valid_r)
    keep = _kernels.lr_check(dint, ok, dr, has_r, float(params.lr_threshold))
    data = np.where(keep, dsub, INVALID).astype(np.float32)
    right = np.where(has_r, dr, -(10**9))
    return Selection(DisparityMap(data), right, dint)


def downsample(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[0] // 2, image.shape[1] // 2
    a = image[: 2 * h, : 2 * w].astype(np.float32)
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def downsample_mask(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape[0] // 2, mask.shape[1] // 2
    m = mask[: 2 * h, : 2 * w]
    return m[0::2, 0::2] & m[1::2, 0::2] & m[0::2, 1::2] & m[1::2, 1::2]


def pyramid_levels(shape, params: SgmParams) -> int:
    """Number of halvings so that the short side ends in [min_side, max_side]."""
    short = min(shape)
    if params.levels is not None:
        levels = params.levels
    else:
        levels = 0
        while short // (2**levels) > params.max_side:
            levels += 1
    if short // (2**levels) < params.min_side:
        raise ImageTooSmall(f"coarsest pyramid level would be {short // 2**levels} px (< {params.min_side})")
    return levels


def propagate_range(coarse: np.ndarray, fine_shape, margin: int, lo_k: int, hi_k: int):
    """Per-pixel search range at the next finer level from a coarse disparity map."""
    hc, wc = coarse.shape
    valid = np.isfinite(coarse)
    big = np.float64(1e9)
    cmin = ndimage.minimum_filter(np.where(valid, coarse, big), size=5, mode="constant", cval=big)
    cmax = ndimage.maximum_filter(np.where(valid, coarse, -big), size=5, mode="constant", cval=-big)
    has_nb = cmin < big
    yi = np.minimum(np.arange(fine_shape[0]) // 2, hc - 1)
    xi = np.minimum(np.arange(fine_shape[1]) // 2, wc - 1)
    idx = np.ix_(yi, xi)
    c = coarse[idx]
    v = valid[idx]
    centre = np.rint(2.0 * np.where(v, c, 0.0))
    lo = np.where(v, centre - margin, np.where(has_nb[idx], np.floor(2.0 * cmin[idx]) - margin, lo_k))
    hi = np.where(v, centre + margin, np.where(has_nb[idx], np.ceil(2.0 * cmax[idx]) + margin, hi_k))
    lo = np.clip(lo, lo_k, hi_k).astype(np.int32)
    hi = np.clip(hi, lo_k, hi_k).astype(np.int32)
    return lo, hi


def match_level(left, right, d_range, params: SgmParams, mask_l=None, mask_r=None) -> Selection:
    cl = census_transform(left, params.window, mask_l)
    cr = census_transform(right, params.window, mask_r)
    vol = compute_cost_volume(cl, cr, d_range)
    agg = sgm_aggregate(vol, params)
    return select_disparity(agg, params, cl.valid, cr.valid)


def _level_bounds(bounds, k: int, shape, lo_k: int, hi_k: int):
    # per-pixel bounds at pyramid level k: min/max pooled over the 2^k x 2^k block, then scaled
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    n = 2**k
    h, w = shape
    lo = lo[: h * n, : w * n].reshape(h, n, w, n).min(axis=(1, 3))
    hi = hi[: h * n, : w * n].reshape(h, n, w, n).max(axis=(1, 3))
    lo = np.clip(np.floor(lo / n), lo_k, hi_k).astype(np.int32)
    hi = np.clip(np.ceil(hi / n), lo_k, hi_k).astype(np.int32)
    return lo, np.maximum(hi, lo)


def hierarchical_match(left, right, d_range, params: SgmParams | None = None, mask_l=None, mask_r=None,
                       bounds=None) -> DisparityMap:
    """Coarse-to-fine SGM over factor-2 pyramids.

    The coarsest level searches ``d_range`` scaled down; each finer level
    searches ``2*d_coarse +- margin`` per pixel. ``bounds`` optionally gives
    full-resolution per-pixel ``(lo, hi)`` maps that narrow the search at
    every level (for spaces where the feasible disparity varies over the image).
    """
    params = params or SgmParams()
    left = np.asarray(left, dtype=np.float32)
    right = np.asarray(right, dtype=np.float32)
    if left.shape != right.shape:
        raise ValueError("left and right images must have the same shape")
    d_min, d_max = int(np.floor(d_range[0])), int(np.ceil(d_range[1]))
    if d_max < d_min:
        raise EmptyRange(f"empty disparity range [{d_min}, {d_max}]")
    ml = np.ones(left.shape, bool) if mask_l is None else np.asarray(mask_l, bool)
    mr = np.ones(right.shape, bool) if mask_r is None else np.asarray(mask_r, bool)
    levels = pyramid_levels(left.shape, params)

    pyr = [(left, right, ml, mr)]
    for _ in range(levels):
        l, r, a, b = pyr[-1]
        pyr.append((downsample(l), downsample(r), downsample_mask(a), downsample_mask(b)))

    disp = None
    for k in range(levels, -1, -1):
        l, r, a, b = pyr[k]
        lo_k = int(np.floor(d_min / 2**k))
        hi_k = int(np.ceil(d_max / 2**k))
        if disp is None:
            rng = (lo_k, hi_k)
        else:
            rng = propagate_range(disp, l.shape, params.margin, lo_k, hi_k)
        if bounds is not None:
            blo, bhi = _level_bounds(bounds, k, l.shape, lo_k, hi_k)
            if disp is None:
                rng = (blo, bhi)
            else:
                # keep the propagated window where it overlaps, else fall back to the bounds
                plo, phi = rng
                nlo, nhi = np.maximum(plo, blo), np.minimum(phi, bhi)
                empty = nhi < nlo
                rng = (np.where(empty, blo, nlo).astype(np.int32), np.where(empty, bhi, nhi).astype(np.int32))
        sel = match_level(l, r, rng, params, a, b)
        disp = sel.left.data.astype(np.float64)
        log.debug("level %d: %dx%d, %d valid", k, l.shape[1], l.shape[0], int(np.isfinite(disp).sum()))
    return DisparityMap(disp.astype(np.float32), meta={"d_range": [d_min, d_max]})
