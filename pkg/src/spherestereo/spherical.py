"""Spherical epipolar images.

A rectified frame image is re-sampled on a (longitude, latitude) grid. The
camera-frame X and Y components are swapped before the angles are taken, so
longitude is ``atan(Y/Z)``: identical for the two images of a rectified
pair. The angular image is then rotated 90 degrees clockwise so that
longitude runs down the rows and disparities stay horizontal.

Coordinates used below:

* ``(u, v)``: unrotated spherical pixel, ``u = s*lam/2pi + u0`` (column),
  ``v = s*phi/2pi + v0`` (row).
* ``(u', v')``: the rotated image actually produced. Clockwise rotation in
  display orientation maps unrotated ``(row v, col u)`` to
  ``(row u, col n_phi - 1 - v)``, i.e. ``v' = u`` and ``u' = n_phi - 1 - v``.
  Columns then increase with camera X and rows with camera Y, like the
  frame image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfGrid, PoleSingularity
from .geometry import Intrinsics, pixel_to_ray, ray_to_pixel
from .sampling import bilinear

TWO_PI = 2.0 * np.pi
MAX_ANGLE = np.deg2rad(85.0)
GRID_TOL = 1e-9


@dataclass(frozen=True)
class SphericalGrid:
    """Angular sampling of a spherical image.

    ``s`` is pixels per full turn; ``n_lam`` x ``n_phi`` are the unrotated
    width and height, so the rotated image is ``n_lam`` rows by ``n_phi``
    columns. ``(u0, v0)`` is where (lam, phi) = (0, 0) falls.
    """

    s: float
    n_lam: int
    n_phi: int
    u0: float
    v0: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("scale s must be positive")
        if self.n_lam < 2 or self.n_phi < 2:
            raise ValueError("grid must be at least 2x2")
        if max(abs(a) for a in self.phi_range) >= np.pi / 2:
            raise ValueError("latitude extent must stay inside (-pi/2, pi/2)")

    @property
    def px_per_rad(self) -> float:
        return self.s / TWO_PI

    @property
    def lam_range(self) -> tuple[float, float]:
        return (-self.u0 / self.px_per_rad, (self.n_lam - 1 - self.u0) / self.px_per_rad)

    @property
    def phi_range(self) -> tuple[float, float]:
        return (-self.v0 / self.px_per_rad, (self.n_phi - 1 - self.v0) / self.px_per_rad)

    @property
    def out_w(self) -> int:
        """Width of the rotated spherical image."""
        return self.n_phi

    @property
    def out_h(self) -> int:
        return self.n_lam

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_lam, self.n_phi

    def to_dict(self) -> dict:
        return {"s": self.s, "n_lam": self.n_lam, "n_phi": self.n_phi, "u0": self.u0, "v0": self.v0,
                "lam_range": list(self.lam_range), "phi_range": list(self.phi_range)}

    @classmethod
    def from_dict(cls, d: dict) -> "SphericalGrid":
        return cls(float(d["s"]), int(d["n_lam"]), int(d["n_phi"]), float(d["u0"]), float(d["v0"]))


@dataclass(eq=False)
class SphericalImage:
    grid: SphericalGrid
    pixels: np.ndarray
    mask: np.ndarray


def ray_to_angles(ray):
    """(longitude, latitude) of camera-frame ray(s): ``atan2(X, Z)``, ``atan(-Y / hypot(X, Z))``."""
    ray = np.asarray(ray, dtype=float)
    X, Y, Z = ray[..., 0], ray[..., 1], ray[..., 2]
    r = np.hypot(X, Z)
    if np.any(r <= 1e-12):
        raise PoleSingularity("ray is parallel to the camera Y axis")
    return np.arctan2(X, Z), np.arctan(-Y / r)


def angles_to_ray(lam, phi) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    phi = np.asarray(phi, dtype=float)
    cp = np.cos(phi)
    return np.stack([np.sin(lam) * cp, -np.sin(phi) * np.ones_like(lam), np.cos(lam) * cp], axis=-1)


def swap_xy(ray) -> np.ndarray:
    ray = np.asarray(ray, dtype=float)
    return ray[..., [1, 0, 2]]


def angles_to_sphere_pixel(grid: SphericalGrid, lam, phi, check: bool = True):
    """Unrotated pixel ``(u, v)`` of the given angles."""
    u = grid.px_per_rad * np.asarray(lam, dtype=float) + grid.u0
    v = grid.px_per_rad * np.asarray(phi, dtype=float) + grid.v0
    if check and not np.all(_inside(u, grid.n_lam) & _inside(v, grid.n_phi)):
        raise OutOfGrid("angles fall outside the spherical grid")
    return u, v


def sphere_pixel_to_angles(grid: SphericalGrid, u, v):
    lam = (np.asarray(u, dtype=float) - grid.u0) / grid.px_per_rad
    phi = (np.asarray(v, dtype=float) - grid.v0) / grid.px_per_rad
    return lam, phi


def rotate_cw(grid: SphericalGrid, u, v):
    """Unrotated (u, v) -> rotated (u', v')."""
    return grid.n_phi - 1 - np.asarray(v, dtype=float), np.asarray(u, dtype=float)


def unrotate_cw(grid: SphericalGrid, u_rot, v_rot):
    return np.asarray(v_rot, dtype=float), grid.n_phi - 1 - np.asarray(u_rot, dtype=float)


def _inside(a, n):
    return (a >= -GRID_TOL) & (a <= n - 1 + GRID_TOL)


def frame_ray_to_sphere_pixel(grid: SphericalGrid, ray, check: bool = True):
    """Rectified camera-frame ray(s) -> rotated spherical pixel ``(u', v')``."""
    lam, phi = ray_to_angles(swap_xy(ray))
    u, v = angles_to_sphere_pixel(grid, lam, phi, check=check)
    return rotate_cw(grid, u, v)


def frame_to_sphere_pixel(grid: SphericalGrid, intr: Intrinsics, x, y, check: bool = True):
    return frame_ray_to_sphere_pixel(grid, pixel_to_ray(intr, x, y), check=check)


def sphere_pixel_to_ray(grid: SphericalGrid, u_rot, v_rot, check: bool = True) -> np.ndarray:
    """Rotated spherical pixel -> unit ray in the rectified camera frame."""
    if check and not np.all(_inside(np.asarray(u_rot), grid.n_phi) & _inside(np.asarray(v_rot), grid.n_lam)):
        raise OutOfGrid("spherical pixel outside the grid")
    u, v = unrotate_cw(grid, u_rot, v_rot)
    lam, phi = sphere_pixel_to_angles(grid, u, v)
    return swap_xy(angles_to_ray(lam, phi))


def sphere_pixel_to_frame(grid: SphericalGrid, intr: Intrinsics, u_rot, v_rot, check: bool = True):
    """Continuous rectified-frame pixel ``(x, y)`` seen at rotated spherical pixel ``(u', v')``."""
    return ray_to_pixel(intr, sphere_pixel_to_ray(grid, u_rot, v_rot, check=check))


def grid_from_extents(s: float, lam_range, phi_range, margin: float = 2.0) -> SphericalGrid:
    lam_lo = max(lam_range[0], -MAX_ANGLE)
    lam_hi = min(lam_range[1], MAX_ANGLE)
    phi_lo = max(phi_range[0], -MAX_ANGLE)
    phi_hi = min(phi_range[1], MAX_ANGLE)
    k = s / TWO_PI
    u0 = np.ceil(margin - k * lam_lo)
    v0 = np.ceil(margin - k * phi_lo)
    n_lam = int(np.ceil(u0 + k * lam_hi + margin)) + 1
    n_phi = int(np.ceil(v0 + k * phi_hi + margin)) + 1
    return SphericalGrid(float(s), n_lam, n_phi, float(u0), float(v0))


def grid_for_rays(rays_list, s: float, margin: float = 2.0) -> SphericalGrid:
    """Smallest grid whose angular extents contain all given rectified-frame rays."""
    lams, phis = [], []
    for rays in rays_list:
        rays = np.asarray(rays, dtype=float)
        rays = rays[rays[:, 2] > 1e-9]
        lam, phi = ray_to_angles(swap_xy(rays))
        lams.append(lam)
        phis.append(phi)
    lam = np.concatenate(lams)
    phi = np.concatenate(phis)
    return grid_from_extents(s, (lam.min(), lam.max()), (phi.min(), phi.max()), margin)


def raster_outline_rays(intr: Intrinsics, shape, offset=(0.0, 0.0), per_edge: int = 64) -> np.ndarray:
    h, w = shape
    t = np.linspace(0.0, 1.0, per_edge)
    xs = np.concatenate([t * (w - 1), np.full_like(t, w - 1.0), t * (w - 1), np.zeros_like(t)]) + offset[0]
    ys = np.concatenate([np.zeros_like(t), t * (h - 1), np.full_like(t, h - 1.0), t * (h - 1)]) + offset[1]
    return pixel_to_ray(intr, xs, ys)


def grid_for_frame(intr: Intrinsics, shape=None, offset=(0.0, 0.0), s: float | None = None,
                   margin: float = 2.0) -> SphericalGrid:
    """Grid covering a rectified raster; ``s`` defaults to ``2*pi*f``."""
    if shape is None:
        shape = (intr.h, intr.w)
    if s is None:
        s = TWO_PI * intr.f
    return grid_for_rays([raster_outline_rays(intr, shape, offset)], s, margin)


def _grid_rays(grid: SphericalGrid) -> np.ndarray:
    uu, vv = np.meshgrid(np.arange(grid.n_phi, dtype=float), np.arange(grid.n_lam, dtype=float))
    return sphere_pixel_to_ray(grid, uu, vv, check=False)


def spherical_warp(image, intr: Intrinsics, grid: SphericalGrid, offset=(0.0, 0.0), mask=None) -> SphericalImage:
    """Resample a rectified frame raster onto the rotated spherical grid.

    Each output pixel is traced back through the inverse chain (unrotate,
    angles, ray, unswap, frame projection) and bilinearly sampled; samples
    falling outside the raster, or on masked source pixels, are invalid.
    """
    rays = _grid_rays(grid)
    x = intr.f * rays[..., 0] / rays[..., 2] + intr.cx - offset[0]
    y = intr.f * rays[..., 1] / rays[..., 2] + intr.cy - offset[1]
    values, valid = bilinear(np.asarray(image), x, y)
    if mask is not None:
        mvals, _ = bilinear(np.asarray(mask, dtype=np.float32), x, y)
        valid &= mvals >= 1.0 - 1e-6
    values = np.where(valid, values, 0.0)
    return SphericalImage(grid, values.astype(np.float32), valid)


def spherical_warp_from_source(image, H, K_new: Intrinsics, grid: SphericalGrid) -> SphericalImage:
    """Spherical epipolar image straight from an unrectified source image.

    Equivalent to planar rectification with ``H`` onto an unbounded raster
    followed by :func:`spherical_warp`, but with a single interpolation.
    """
    rays = _grid_rays(grid)
    pts = rays @ K_new.K.T
    src = pts @ np.linalg.inv(np.asarray(H, dtype=float)).T
    wz = src[..., 2]
    good = wz > 1e-12
    safe = np.where(good, wz, 1.0)
    xs = np.where(good, src[..., 0] / safe, np.nan)
    ys = np.where(good, src[..., 1] / safe, np.nan)
    values, valid = bilinear(np.asarray(image), xs, ys)
    return SphericalImage(grid, values.astype(np.float32), valid)
