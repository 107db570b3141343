"""Disparity maps to world-frame point clouds via ``Z = b f / d``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDisparity
from .geometry import Intrinsics
from .io import read_ply, write_ply  # noqa: F401  (re-exported)
from .rectify import RectifyingFrame
from .sampling import nearest
from .spherical import SphericalGrid, sphere_pixel_to_frame

DEFAULT_Z_MAX = 1e4


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != len(self.points):
                raise ValueError("colour count does not match point count")

    @property
    def count(self) -> int:
        return len(self.points)

    def __len__(self):
        return self.count

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))

    @classmethod
    def concatenate(cls, clouds) -> "PointCloud":
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        pts = np.concatenate([c.points for c in clouds])
        if all(c.colors is not None for c in clouds):
            return cls(pts, np.concatenate([c.colors for c in clouds]))
        return cls(pts)


@dataclass(frozen=True, eq=False)
class StereoGeometry:
    """Everything needed to turn a left-referenced disparity into world points.

    ``offset`` is the virtual frame coordinate of raster pixel (0, 0) for
    frame-space disparity maps; ``grid`` is set for spherical maps.
    """

    frame: RectifyingFrame
    K_new: Intrinsics
    c_l: np.ndarray
    offset: tuple[float, float] = (0.0, 0.0)
    grid: SphericalGrid | None = None

    @property
    def b(self) -> float:
        return self.frame.baseline

    @property
    def f(self) -> float:
        return self.K_new.f

    def to_dict(self) -> dict:
        d = {
            "baseline": self.b,
            "focal_px": self.K_new.f,
            "width": self.K_new.w,
            "height": self.K_new.h,
            "rotation": [float(v) for v in self.frame.R.ravel()],
            "k": [float(v) for v in self.frame.k],
            "center_left": [float(v) for v in self.c_l],
            "offset": [float(v) for v in self.offset],
        }
        if self.grid is not None:
            d["grid"] = self.grid.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StereoGeometry":
        R = np.asarray(d["rotation"], dtype=float).reshape(3, 3)
        frame = RectifyingFrame(R=R, k=np.asarray(d.get("k", R[2]), dtype=float), baseline=float(d["baseline"]))
        grid = SphericalGrid.from_dict(d["grid"]) if d.get("grid") else None
        return cls(frame, Intrinsics(float(d["focal_px"]), int(d["width"]), int(d["height"])),
                   np.asarray(d["center_left"], dtype=float), tuple(d.get("offset", (0.0, 0.0))), grid)


def disparity_to_depth(geom: StereoGeometry, d, z_max: float = DEFAULT_Z_MAX):
    d = np.asarray(d, dtype=float)
    if np.any(d <= geom.b * geom.f / z_max):
        raise NonPositiveDisparity("disparity too small (point at or beyond the depth limit)")
    return geom.b * geom.f / d


def frame_points(geom: StereoGeometry, x, y, d) -> np.ndarray:
    """World points for virtual-frame pixels ``(x, y)`` with frame disparity ``d``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = geom.b * geom.f / np.asarray(d, dtype=float)
    Xr = (x - geom.K_new.cx) * Z / geom.f
    Yr = (y - geom.K_new.cy) * Z / geom.f
    cam = np.stack([Xr, Yr, Z], axis=-1)
    return cam @ geom.frame.R + geom.c_l


def _colors_at(colors, x, y):
    if colors is None:
        return None
    c, _ = nearest(np.asarray(colors), x, y)
    c = np.asarray(c)
    if c.ndim == 1:
        c = np.repeat(c[:, None], 3, axis=1)
    return np.clip(np.rint(c), 0, 255).astype(np.uint8)


def frame_disparity_cloud(disp, geom: StereoGeometry, colors=None, z_max: float = DEFAULT_Z_MAX) -> PointCloud:
    """Points for every valid pixel of a frame-space disparity raster."""
    data = np.asarray(getattr(disp, "data", disp), dtype=np.float64)
    eps = geom.b * geom.f / z_max
    ii, jj = np.nonzero(np.isfinite(data) & (data > eps))
    d = data[ii, jj]
    pts = frame_points(geom, jj + geom.offset[0], ii + geom.offset[1], d)
    return PointCloud(pts, _colors_at(colors, jj, ii))


def spherical_to_frame_matches(geom: StereoGeometry, disp):
    """Convert a spherical disparity raster to frame correspondences.

    Returns raster indices ``(ii, jj)`` of the used pixels, the left
    frame position ``(x_l, y_l)`` and frame disparity ``x_l - x_r``.
    """
    if geom.grid is None:
        raise ValueError("geometry has no spherical grid")
    grid = geom.grid
    data = np.asarray(getattr(disp, "data", disp), dtype=np.float64)
    ii, jj = np.nonzero(np.isfinite(data))
    ds = data[ii, jj]
    ur = jj - ds
    inside = (ur >= 0) & (ur <= grid.n_phi - 1)
    ii, jj, ur = ii[inside], jj[inside], ur[inside]
    xl, yl = sphere_pixel_to_frame(grid, geom.K_new, jj.astype(float), ii.astype(float), check=False)
    xr, _ = sphere_pixel_to_frame(grid, geom.K_new, ur, ii.astype(float), check=False)
    return ii, jj, xl, yl, xl - xr


def spherical_disparity_cloud(disp, geom: StereoGeometry, colors=None, z_max: float = DEFAULT_Z_MAX) -> PointCloud:
    """Points from a spherical disparity map, mapped back to frame geometry first."""
    ii, jj, xl, yl, d = spherical_to_frame_matches(geom, disp)
    keep = d > geom.b * geom.f / z_max
    ii, jj, xl, yl, d = ii[keep], jj[keep], xl[keep], yl[keep], d[keep]
    pts = frame_points(geom, xl, yl, d)
    return PointCloud(pts, _colors_at(colors, jj, ii))
