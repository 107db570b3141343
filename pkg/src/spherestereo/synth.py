"""Ray-cast stereo renderer with analytic ground truth.

Scenes are height fields ``Z = g(X, Y)`` in world coordinates (world Z is
the depth direction of a canonical rig), textured with seeded multi-octave
value noise evaluated on the surface's (X, Y) coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import SceneNotVisible
from .geometry import CameraPose, CameraView, Intrinsics, pixel_to_ray, rotation_x, rotation_y
from .triangulate import PointCloud

SURFACES = ("plane", "ramp", "steps", "heightfield")


@dataclass(frozen=True)
class SyntheticScene:
    """Height-field scene.

    ``kind`` selects the surface: ``plane`` (``Z = depth``), ``ramp``
    (linear in X with ``slope``), ``steps`` (terraces of ``step_height``
    every ``step_width`` metres along X) or ``heightfield`` (smooth noise
    relief of amplitude ``relief``).
    """

    kind: str = "plane"
    depth: float = 10.0
    slope: float = 0.2
    step_height: float = 0.5
    step_width: float = 2.0
    relief: float = 0.5
    relief_scale: float = 2.0
    seed: int = 0
    texture_scale: float = 0.05     # metres per texture lattice cell, finest octave
    octaves: int = 4
    contrast: float = 200.0
    center: tuple[float, float] = (0.0, 0.0)
    z_bounds: tuple[float, float] = field(default=(0.1, 1e4))

    def __post_init__(self):
        if self.kind not in SURFACES:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if not 0 < self.z_bounds[0] < self.z_bounds[1]:
            raise ValueError("depth bounds must satisfy 0 < Z_min < Z_max")

    def height(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        dx = X - self.center[0]
        if self.kind == "plane":
            return np.full(np.broadcast(X, Y).shape, self.depth)
        if self.kind == "ramp":
            return self.depth + self.slope * dx + 0.0 * Y
        if self.kind == "steps":
            return self.depth - self.step_height * np.floor(dx / self.step_width + 0.5) + 0.0 * Y
        n = value_noise(X / self.relief_scale, Y / self.relief_scale, self.seed + 7919, octaves=2)
        return self.depth + self.relief * (2.0 * n - 1.0)

    def texture(self, X, Y) -> np.ndarray:
        n = value_noise(np.asarray(X) / self.texture_scale, np.asarray(Y) / self.texture_scale,
                        self.seed, octaves=self.octaves, reverse=True)
        return np.clip(127.5 + self.contrast * (n - 0.5) * 2.0, 0.0, 255.0)


def value_noise(x, y, seed: int, octaves: int = 1, reverse: bool = False) -> np.ndarray:
    """Smooth value noise in [0, 1].

    Octave ``i`` has lattice spacing ``2**i`` (``reverse=True``: the first
    octave is the finest and coarser octaves add low-frequency variation).
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    flat = _kernels.value_noise(np.ascontiguousarray(x).ravel(), np.ascontiguousarray(y).ravel(),
                                int(seed), int(octaves), bool(reverse))
    return flat.reshape(x.shape)


def intersect(scene: SyntheticScene, origin, dirs, steps: int = 48) -> np.ndarray:
    """Ray parameter of the first surface hit for rays ``origin + t * dirs``; NaN on a miss."""
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    o = np.asarray(origin, dtype=float)
    if scene.kind == "plane" or scene.kind == "ramp":
        slope = scene.slope if scene.kind == "ramp" else 0.0
        # o_z + t d_z = depth + slope (o_x + t d_x - cx)
        num = scene.depth + slope * (o[0] - scene.center[0]) - o[2]
        den = dirs[:, 2] - slope * dirs[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        return np.where((den > 1e-12) & (t > 0), t, np.nan)

    n = len(dirs)
    zlo, zhi = _height_bounds(scene, o, dirs)
    dz = dirs[:, 2]
    fwd = dz > 1e-9
    safe = np.where(fwd, dz, 1.0)
    t0 = np.where(fwd, np.maximum((zlo - o[2]) / safe, 0.0), np.nan)
    t1 = np.where(fwd, np.maximum((zhi - o[2]) / safe, 0.0), np.nan)
    hit_lo = np.full(n, np.nan)
    hit_hi = np.full(n, np.nan)
    active = np.flatnonzero(fwd)
    t_prev = t0[active]
    for a in np.linspace(0.0, 1.0, steps + 1)[1:]:
        t = t0[active] + a * (t1[active] - t0[active])
        p = o + t[:, None] * dirs[active]
        hit = p[:, 2] >= scene.height(p[:, 0], p[:, 1])
        hit_lo[active[hit]] = t_prev[hit]
        hit_hi[active[hit]] = t[hit]
        active, t_prev = active[~hit], t[~hit]
        if not len(active):
            break
    found = ~np.isnan(hit_lo)
    lo, hi = hit_lo[found], hit_hi[found]
    fd = dirs[found]
    for _ in range(36):  # bracket starts below 1 cm; 2**-36 of that is far below 1e-9 m
        mid = 0.5 * (lo + hi)
        p = o + mid[:, None] * fd
        g = p[:, 2] - scene.height(p[:, 0], p[:, 1])
        above = g < 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    t = np.full(n, np.nan)
    t[found] = 0.5 * (lo + hi)
    return t


def _height_bounds(scene: SyntheticScene, o, dirs):
    """Surface depth bounds over the footprint of the rays on the mean surface."""
    if scene.kind == "heightfield":
        return scene.depth - scene.relief - 1e-6, scene.depth + scene.relief + 1e-6
    fwd = dirs[:, 2] > 1e-9
    t = (scene.depth - o[2]) / dirs[fwd, 2]
    xs = o[0] + t * dirs[fwd, 0]
    span = xs.max() - xs.min() + 1.0
    grid = np.linspace(xs.min() - span, xs.max() + span, 4096)
    z = scene.height(grid, np.zeros_like(grid))
    return z.min() - 1e-6, z.max() + 1e-6


@dataclass(eq=False)
class RenderedView:
    image: np.ndarray      # float32 gray
    depth: np.ndarray      # camera-frame Z at pixel centres, NaN where the surface is missed
    points: np.ndarray     # world hit points of the supersamples, (n, 3)


def render_view(scene: SyntheticScene, view: CameraView, supersample: int = 2) -> RenderedView:
    """Render with ``supersample**2`` rays per pixel averaged by a box filter."""
    intr = view.intrinsics
    R, c = view.pose.R, view.pose.c
    ss = supersample
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    ys = (np.arange(intr.h)[:, None] + offs[None, :]).ravel()
    xs = (np.arange(intr.w)[:, None] + offs[None, :]).ravel()
    xx, yy = np.meshgrid(xs, ys)
    dirs = pixel_to_ray(intr, xx, yy).reshape(-1, 3) @ R
    t = intersect(scene, c, dirs)
    hits = c + t[:, None] * dirs
    tex = np.where(np.isnan(t), 0.0, scene.texture(np.nan_to_num(hits[:, 0]), np.nan_to_num(hits[:, 1])))
    image = tex.reshape(intr.h, ss, intr.w, ss).mean(axis=(1, 3)).astype(np.float32)

    cx, cy = np.meshgrid(np.arange(intr.w, dtype=float), np.arange(intr.h, dtype=float))
    cdirs = pixel_to_ray(intr, cx, cy).reshape(-1, 3) @ R
    tc = intersect(scene, c, cdirs)
    depth = (tc * (cdirs @ R[2])).reshape(intr.h, intr.w)
    pts = hits[~np.isnan(t)]
    return RenderedView(image, depth, pts)


@dataclass(eq=False)
class RenderedPair:
    left: RenderedView
    right: RenderedView
    cloud: PointCloud


def render_pair(scene: SyntheticScene, view_l: CameraView, view_r: CameraView, supersample: int = 2) -> RenderedPair:
    """Images, per-view true depth and a dense true-surface cloud (union of the supersample hits)."""
    left = render_view(scene, view_l, supersample)
    right = render_view(scene, view_r, supersample)
    if not np.isfinite(left.depth).any() or not np.isfinite(right.depth).any():
        raise SceneNotVisible("the surface is not visible from both cameras")
    cloud = PointCloud(np.concatenate([left.points, right.points]))
    return RenderedPair(left, right, cloud)


def surface_samples(scene: SyntheticScene, x_range, y_range, spacing: float) -> PointCloud:
    """True surface sampled on a regular (X, Y) lattice, a dense reference cloud."""
    xs = np.arange(x_range[0], x_range[1] + 0.5 * spacing, spacing)
    ys = np.arange(y_range[0], y_range[1] + 0.5 * spacing, spacing)
    X, Y = np.meshgrid(xs, ys)
    return PointCloud(np.stack([X.ravel(), Y.ravel(), scene.height(X, Y).ravel()], axis=1))


def make_oblique_pair(convergence_deg: float, baseline_m: float, scene: SyntheticScene,
                      intrinsics: Intrinsics, elevation_deg: float = 0.0) -> tuple[CameraView, CameraView]:
    """Two cameras on the world X axis toeing in by +-convergence/2 about Y.

    For non-zero convergence the rig is moved along Z so both principal
    rays meet at the scene centre point ``(center_x, center_y, depth)``.
    ``elevation_deg`` tilts both cameras about the baseline.
    """
    if not 0.0 <= convergence_deg <= 60.0:
        raise ValueError("convergence must be within [0, 60] degrees")
    half = np.deg2rad(convergence_deg) / 2.0
    b2 = baseline_m / 2.0
    cx, cy = scene.center
    if half > 0:
        z0 = scene.depth - b2 / np.tan(half)
    else:
        z0 = 0.0
    tilt = rotation_x(np.deg2rad(elevation_deg))
    # world-to-camera: rows are camera axes; left looks toward +X
    R_l = (rotation_y(half) @ tilt).T
    R_r = (rotation_y(-half) @ tilt).T
    c_l = np.array([cx - b2, cy, z0])
    c_r = np.array([cx + b2, cy, z0])
    return CameraView(intrinsics, CameraPose(R_l, c_l)), CameraView(intrinsics, CameraPose(R_r, c_r))
