"""Pinhole camera model and the projection primitives shared by every stage.

Conventions: world units are meters, pixels are continuous with (0, 0) at the
centre of the top-left pixel, x to the right and y down. The principal point
is always the image centre (w/2, h/2); there is no skew and no distortion.
A pose stores the world-to-camera rotation ``R`` (rows are the camera axes
expressed in world coordinates) and the camera centre ``c``, so a world
point ``X`` has camera coordinates ``R @ (X - c)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCamera

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    f: float
    w: int
    h: int

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if self.w < 2 or self.h < 2:
            raise ValueError(f"image must be at least 2x2, got {self.w}x{self.h}")

    @property
    def cx(self) -> float:
        return self.w / 2.0

    @property
    def cy(self) -> float:
        return self.h / 2.0

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [[1.0 / self.f, 0.0, -self.cx / self.f], [0.0, 1.0 / self.f, -self.cy / self.f], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True, eq=False)
class CameraPose:
    R: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        c = np.array(self.c, dtype=float).reshape(3)
        if np.abs(R @ R.T - np.eye(3)).max() > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation must have determinant +1")
        R.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "c", c)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def principal_ray(self) -> np.ndarray:
        """Viewing direction in world coordinates (third row of R)."""
        return self.R[2].copy()

    def to_camera(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.c) @ self.R.T

    def to_world(self, Xc) -> np.ndarray:
        Xc = np.asarray(Xc, dtype=float)
        return Xc @ self.R + self.c


@dataclass(frozen=True, eq=False)
class CameraView:
    intrinsics: Intrinsics
    pose: CameraPose = field(default_factory=CameraPose.identity)


def pixel_to_ray(intr: Intrinsics, x, y) -> np.ndarray:
    """Normalized camera-frame ray ``((x - w/2)/f, (y - h/2)/f, 1)``.

    Accepts scalars or broadcastable arrays; returns shape ``(..., 3)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    return np.stack([(x - intr.cx) / intr.f, (y - intr.cy) / intr.f, np.ones_like(x)], axis=-1)


def ray_to_pixel(intr: Intrinsics, ray) -> tuple[np.ndarray, np.ndarray]:
    ray = np.asarray(ray, dtype=float)
    z = ray[..., 2]
    if np.any(z <= 0):
        raise BehindCamera("ray has non-positive Z component")
    x = intr.f * ray[..., 0] / z + intr.cx
    y = intr.f * ray[..., 1] / z + intr.cy
    return x, y


def project_point(view: CameraView, X) -> tuple[np.ndarray, np.ndarray]:
    """Project world point(s) ``X`` (shape ``(..., 3)``) to pixel coordinates."""
    return ray_to_pixel(view.intrinsics, view.pose.to_camera(X))


def rotation_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    # QR of a Gaussian matrix with sign fix gives a Haar-distributed rotation
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# -- camera files -----------------------------------------------------------

def view_to_dict(view: CameraView) -> dict:
    return {
        "focal_px": float(view.intrinsics.f),
        "width": int(view.intrinsics.w),
        "height": int(view.intrinsics.h),
        "rotation": [float(v) for v in view.pose.R.ravel()],
        "center": [float(v) for v in view.pose.c],
    }


def view_from_dict(d: dict) -> CameraView:
    try:
        intr = Intrinsics(float(d["focal_px"]), int(d["width"]), int(d["height"]))
        R = np.asarray(d["rotation"], dtype=float)
        c = np.asarray(d["center"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"camera entry missing field {exc}") from None
    if R.size != 9 or c.size != 3:
        raise ValueError("camera rotation needs 9 numbers and center 3 numbers")
    return CameraView(intr, CameraPose(R.reshape(3, 3), c))


def save_cameras(path, left: CameraView, right: CameraView) -> None:
    """Write a stereo pair camera file ``{"left": {...}, "right": {...}}``."""
    data = {"left": view_to_dict(left), "right": view_to_dict(right)}
    Path(path).write_text(json.dumps(data, indent=2))


def load_cameras(path) -> tuple[CameraView, CameraView]:
    data = json.loads(Path(path).read_text())
    return view_from_dict(data["left"]), view_from_dict(data["right"])
