import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherestereo.errors import BehindCamera
from spherestereo.geometry import (
    CameraPose,
    CameraView,
    Intrinsics,
    load_cameras,
    pixel_to_ray,
    project_point,
    random_rotation,
    ray_to_pixel,
    save_cameras,
)

INTR = Intrinsics(1000.0, 2000, 2000)


def test_project_principal_ray():
    view = CameraView(INTR)
    x, y = project_point(view, [0.0, 0.0, 10.0])
    assert (x, y) == (1000.0, 1000.0)


def test_project_off_axis():
    x, y = project_point(CameraView(INTR), [1.0, 0.0, 10.0])
    assert x == pytest.approx(1100.0, abs=1e-12)
    assert y == pytest.approx(1000.0, abs=1e-12)


def test_project_behind_camera_raises():
    with pytest.raises(BehindCamera):
        project_point(CameraView(INTR), [0.0, 0.0, -1.0])


@pytest.mark.parametrize(
    "pixel, ray",
    [((1000.0, 1000.0), (0, 0, 1)), ((2000.0, 1000.0), (1, 0, 1)), ((1000.0, 0.0), (0, -1, 1))],
)
def test_pixel_to_ray_examples(pixel, ray):
    np.testing.assert_array_equal(pixel_to_ray(INTR, *pixel), ray)


def test_ray_to_pixel_examples():
    assert ray_to_pixel(INTR, [0, 0, 1]) == (1000.0, 1000.0)
    assert ray_to_pixel(INTR, [0.5, 0, 1]) == (1500.0, 1000.0)
    with pytest.raises(BehindCamera):
        ray_to_pixel(INTR, [0, 0, 0])


def test_pixel_ray_round_trip(rng):
    x = rng.uniform(-500, 2500, 1000)
    y = rng.uniform(-500, 2500, 1000)
    xr, yr = ray_to_pixel(INTR, pixel_to_ray(INTR, x, y))
    assert np.abs(xr - x).max() < 1e-9
    assert np.abs(yr - y).max() < 1e-9


def test_random_pose_round_trip(rng):
    for _ in range(20):
        pose = CameraPose(random_rotation(rng), rng.normal(size=3))
        view = CameraView(INTR, pose)
        Xc = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(1, 50)])
        X = pose.to_world(Xc)
        x, y = project_point(view, X)
        ray = pixel_to_ray(INTR, x, y)
        x2, y2 = ray_to_pixel(INTR, pose.to_camera(pose.to_world(ray * 3.7)))
        assert abs(x2 - x) < 1e-9 and abs(y2 - y) < 1e-9


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.01, 100.0), seed=st.integers(0, 2**31 - 1))
def test_projection_scale_invariance(t, seed):
    rng = np.random.default_rng(seed)
    pose = CameraPose(random_rotation(rng), rng.normal(size=3))
    Xc = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 1.0])
    a = ray_to_pixel(INTR, Xc)
    b = project_point(CameraView(INTR, pose), pose.to_world(t * Xc))
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_pose_composition_equals_identity_on_transformed_point(rng):
    pose = CameraPose(random_rotation(rng), rng.normal(size=3))
    X = pose.to_world([0.3, -0.2, 7.0])
    a = project_point(CameraView(INTR, pose), X)
    b = project_point(CameraView(INTR), pose.R @ (X - pose.c))
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_pose_validation():
    with pytest.raises(ValueError):
        CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        CameraPose(2 * np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        Intrinsics(0.0, 10, 10)


def test_camera_file_round_trip(tmp_path, rng):
    a = CameraView(Intrinsics(812.5, 640, 480), CameraPose(random_rotation(rng), rng.normal(size=3)))
    b = CameraView(Intrinsics(812.5, 640, 480), CameraPose(random_rotation(rng), rng.normal(size=3)))
    path = tmp_path / "cams.json"
    save_cameras(path, a, b)
    data = json.loads(path.read_text())
    assert set(data["left"]) == {"focal_px", "width", "height", "rotation", "center"}
    la, lb = load_cameras(path)
    np.testing.assert_array_equal(la.pose.R, a.pose.R)
    np.testing.assert_array_equal(lb.pose.c, b.pose.c)
    assert la.intrinsics == a.intrinsics
