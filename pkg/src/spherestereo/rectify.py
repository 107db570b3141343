"""Frame-based (planar) epipolar rectification.

Both cameras are rotated about their centres into one shared orientation
whose x axis is the baseline, so corresponding points end up on the same
image row. Rectified images live in a *virtual* frame with intrinsics
``K_new`` (principal point at its centre); a raster may cover only part of
that frame, in which case ``offset`` gives the virtual pixel coordinate of
raster index (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBaseline, DegeneratePrincipalRays, SingularHomography
from .geometry import CameraPose, CameraView, Intrinsics
from .sampling import bilinear

# bounding-box extents never reach further than this off the rectified axis
MAX_HALF_ANGLE = np.deg2rad(75.0)


@dataclass(frozen=True, eq=False)
class RectifyingFrame:
    R: np.ndarray
    k: np.ndarray
    baseline: float

    @property
    def r1(self):
        return self.R[0]

    @property
    def r2(self):
        return self.R[1]

    @property
    def r3(self):
        return self.R[2]


@dataclass(frozen=True, eq=False)
class HomographyPair:
    H_l: np.ndarray
    H_r: np.ndarray
    K_new: Intrinsics
    offset: tuple[float, float] = (0.0, 0.0)
    out_w: int | None = None
    out_h: int | None = None

    @property
    def shape(self) -> tuple[int, int]:
        w = self.K_new.w if self.out_w is None else self.out_w
        h = self.K_new.h if self.out_h is None else self.out_h
        return h, w


@dataclass(eq=False)
class RectifiedPair:
    frame: RectifyingFrame
    homographies: HomographyPair
    left: np.ndarray
    right: np.ndarray
    mask_l: np.ndarray
    mask_r: np.ndarray


def build_rectifying_rotation(pose_l: CameraPose, pose_r: CameraPose) -> RectifyingFrame:
    """Shared rotation with x along the baseline and z along the summed principal rays.

    ``r2 = k x r1`` (not ``r1 x k``) so that a canonical stereo rig is a
    fixed point: identity rotations with the baseline along +x give R = I.
    """
    base = pose_r.c - pose_l.c
    b = float(np.linalg.norm(base))
    if b <= 1e-9:
        raise DegenerateBaseline("camera centers coincide")
    r1 = base / b
    k = pose_l.R[2] + pose_r.R[2]
    k_norm = np.linalg.norm(k)
    if k_norm == 0.0:
        raise DegeneratePrincipalRays("principal rays cancel out")
    sin_angle = np.linalg.norm(np.cross(k / k_norm, r1))
    if sin_angle <= np.sin(np.deg2rad(0.1)):
        raise DegeneratePrincipalRays("summed principal rays are parallel to the baseline")
    r2 = np.cross(k, r1)
    r2 /= np.linalg.norm(r2)
    r3 = np.cross(r1, r2)
    r3 /= np.linalg.norm(r3)
    R = np.vstack([r1, r2, r3])
    R.setflags(write=False)
    return RectifyingFrame(R=R, k=k, baseline=b)


def shared_intrinsics(a: Intrinsics, b: Intrinsics) -> Intrinsics:
    """Average focal length, largest image size per axis."""
    if a == b:
        return a
    return Intrinsics((a.f + b.f) / 2.0, max(a.w, b.w), max(a.h, b.h))


def _source_outline(intr: Intrinsics, per_edge: int = 32) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_edge)
    w1, h1 = intr.w - 1.0, intr.h - 1.0
    xs = np.concatenate([t * w1, np.full_like(t, w1), t * w1, np.zeros_like(t)])
    ys = np.concatenate([np.zeros_like(t), t * h1, np.full_like(t, h1), t * h1])
    return np.stack([xs, ys, np.ones_like(xs)], axis=-1)


def rectified_outline(view: CameraView, frame: RectifyingFrame, per_edge: int = 32) -> np.ndarray:
    """Rays (rectified camera frame) through the border pixels of a source image."""
    pts = _source_outline(view.intrinsics, per_edge)
    rays = pts @ view.intrinsics.K_inv.T
    return rays @ (frame.R @ view.pose.R.T).T


def _bbox_extents(rays_list, K_new: Intrinsics):
    lim = np.tan(MAX_HALF_ANGLE) * K_new.f
    xs, ys = [], []
    for rays in rays_list:
        z = rays[:, 2]
        front = z > 1e-9
        x = np.where(front, K_new.f * rays[:, 0] / np.where(front, z, 1.0), np.sign(rays[:, 0]) * np.inf)
        y = np.where(front, K_new.f * rays[:, 1] / np.where(front, z, 1.0), np.sign(rays[:, 1]) * np.inf)
        xs.append(np.clip(x, -lim, lim))
        ys.append(np.clip(y, -lim, lim))
    xs = np.concatenate(xs) + K_new.cx
    ys = np.concatenate(ys) + K_new.cy
    x0, x1 = np.floor(xs.min()), np.ceil(xs.max())
    y0, y1 = np.floor(ys.min()), np.ceil(ys.max())
    return (float(x0), float(y0)), int(x1 - x0) + 1, int(y1 - y0) + 1


def compute_homographies(
    view_l: CameraView, view_r: CameraView, frame: RectifyingFrame, extent: str = "fixed"
) -> HomographyPair:
    """``H = K_new R R_cam^T K_cam^-1`` for each camera.

    ``extent="fixed"`` keeps the rectified raster at ``K_new``'s size;
    ``extent="bbox"`` grows it to the union of both warped source images.
    """
    K_new = shared_intrinsics(view_l.intrinsics, view_r.intrinsics)
    H_l = K_new.K @ frame.R @ view_l.pose.R.T @ view_l.intrinsics.K_inv
    H_r = K_new.K @ frame.R @ view_r.pose.R.T @ view_r.intrinsics.K_inv
    if extent == "fixed":
        return HomographyPair(H_l, H_r, K_new)
    if extent != "bbox":
        raise ValueError(f"unknown extent mode {extent!r}")
    offset, out_w, out_h = _bbox_extents(
        [rectified_outline(view_l, frame), rectified_outline(view_r, frame)], K_new
    )
    return HomographyPair(H_l, H_r, K_new, offset=offset, out_w=out_w, out_h=out_h)


def warp_planar(image, H, out_w: int, out_h: int, offset=(0.0, 0.0)):
    """Inverse-warp ``image`` by homography ``H`` with bilinear sampling.

    Output raster pixel (i, j) sits at target coordinate ``(j + ox, i + oy)``
    and samples the source at ``H^-1`` of that point. Returns
    ``(warped, mask)``; invalid pixels are 0.
    """
    H = np.asarray(H, dtype=float)
    if abs(np.linalg.det(H)) <= 1e-12:
        raise SingularHomography("homography is not invertible")
    Hinv = np.linalg.inv(H)
    jj, ii = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
    pts = np.stack([jj + offset[0], ii + offset[1], np.ones_like(jj)], axis=-1)
    src = pts @ Hinv.T
    wz = src[..., 2]
    good = wz > 1e-12
    safe = np.where(good, wz, 1.0)
    xs = np.where(good, src[..., 0] / safe, np.nan)
    ys = np.where(good, src[..., 1] / safe, np.nan)
    values, mask = bilinear(np.asarray(image), xs, ys)
    return values.astype(np.float32), mask


def rectify_pair(view_l: CameraView, view_r: CameraView, image_l, image_r, extent: str = "fixed") -> RectifiedPair:
    frame = build_rectifying_rotation(view_l.pose, view_r.pose)
    hp = compute_homographies(view_l, view_r, frame, extent=extent)
    h, w = hp.shape
    left, mask_l = warp_planar(image_l, hp.H_l, w, h, hp.offset)
    right, mask_r = warp_planar(image_r, hp.H_r, w, h, hp.offset)
    return RectifiedPair(frame, hp, left, right, mask_l, mask_r)


def rectified_view(view: CameraView, frame: RectifyingFrame, K_new: Intrinsics) -> CameraView:
    """The virtual camera a rectified image was taken with."""
    return CameraView(K_new, CameraPose(frame.R, view.pose.c))
