import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherestereo.errors import DegenerateBaseline, DegeneratePrincipalRays, SingularHomography
from spherestereo.geometry import CameraPose, CameraView, Intrinsics, project_point, random_rotation, rotation_y
from spherestereo.rectify import (
    build_rectifying_rotation,
    compute_homographies,
    rectify_pair,
    shared_intrinsics,
    warp_planar,
)

from _helpers import random_pair, visible_points

INTR = Intrinsics(1000.0, 2000, 2000)


def apply_h(H, x, y):
    p = H @ np.array([x, y, 1.0])
    return p[0] / p[2], p[1] / p[2]


def canonical():
    left = CameraView(INTR, CameraPose(np.eye(3), np.zeros(3)))
    right = CameraView(INTR, CameraPose(np.eye(3), np.array([1.0, 0.0, 0.0])))
    return left, right


def test_canonical_is_fixed_point():
    left, right = canonical()
    frame = build_rectifying_rotation(left.pose, right.pose)
    np.testing.assert_array_equal(frame.R, np.eye(3))
    assert frame.baseline == 1.0
    hp = compute_homographies(left, right, frame)
    np.testing.assert_allclose(hp.H_l, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(hp.H_r, np.eye(3), atol=1e-9)


def test_orthonormal_rows(rng):
    for _ in range(50):
        vl, vr = random_pair(rng)
        R = build_rectifying_rotation(vl.pose, vr.pose).R
        gram = R @ R.T
        assert np.abs(gram - np.eye(3)).max() < 1e-9
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)


def test_toe_in_frame_matches_direct_construction():
    # cameras toeing in by +-10 degrees about Y; world-to-camera rotations
    half = np.deg2rad(10.0)
    pose_l = CameraPose(rotation_y(half).T, np.zeros(3))
    pose_r = CameraPose(rotation_y(-half).T, np.array([1.0, 0.0, 0.0]))
    frame = build_rectifying_rotation(pose_l, pose_r)
    np.testing.assert_array_equal(frame.r1, [1.0, 0.0, 0.0])
    # direct: r3 is the normalized bisector of the two principal rays, projected off r1
    k = pose_l.R[2] + pose_r.R[2]
    k_perp = k - k.dot(frame.r1) * frame.r1
    np.testing.assert_allclose(frame.r3, k_perp / np.linalg.norm(k_perp), atol=1e-12)
    a = np.arccos(np.clip(frame.r3 @ pose_l.R[2], -1, 1))
    b = np.arccos(np.clip(frame.r3 @ pose_r.R[2], -1, 1))
    assert a == pytest.approx(b, abs=1e-12)


def test_degenerate_inputs():
    pose = CameraPose(np.eye(3), np.zeros(3))
    with pytest.raises(DegenerateBaseline):
        build_rectifying_rotation(pose, CameraPose(np.eye(3), np.zeros(3)))
    # both cameras looking along the baseline
    look_x = rotation_y(np.pi / 2).T
    with pytest.raises(DegeneratePrincipalRays):
        build_rectifying_rotation(CameraPose(look_x, np.zeros(3)), CameraPose(look_x, np.array([1.0, 0, 0])))


def row_residuals(view_l, view_r, pts, extent="fixed"):
    frame = build_rectifying_rotation(view_l.pose, view_r.pose)
    hp = compute_homographies(view_l, view_r, frame, extent=extent)
    res = []
    for X in pts:
        _, yl = apply_h(hp.H_l, *project_point(view_l, X))
        _, yr = apply_h(hp.H_r, *project_point(view_r, X))
        res.append(abs(yl - yr))
    return np.array(res)


def test_row_alignment_random_pairs(rng):
    for _ in range(20):
        vl, vr = random_pair(rng)
        pts = visible_points(rng, vl, vr, 50)
        assert row_residuals(vl, vr, pts).max() <= 0.5


def test_row_alignment_swapped_cameras(rng):
    vl, vr = random_pair(rng)
    pts = visible_points(rng, vl, vr, 50)
    f1 = build_rectifying_rotation(vl.pose, vr.pose)
    f2 = build_rectifying_rotation(vr.pose, vl.pose)
    np.testing.assert_allclose(f2.r1, -f1.r1, atol=1e-12)
    assert row_residuals(vr, vl, pts).max() <= 0.5


def test_global_rigid_transform_invariance(rng):
    vl, vr = random_pair(rng)
    Q = random_rotation(rng)
    t = rng.normal(size=3)

    def moved(v):
        # world point X -> Q X + t; the camera co-moves
        return CameraView(v.intrinsics, CameraPose(v.pose.R @ Q.T, Q @ v.pose.c + t))

    h1 = compute_homographies(vl, vr, build_rectifying_rotation(vl.pose, vr.pose))
    ml, mr = moved(vl), moved(vr)
    h2 = compute_homographies(ml, mr, build_rectifying_rotation(ml.pose, mr.pose))
    np.testing.assert_allclose(h1.H_l, h2.H_l, atol=1e-9)
    np.testing.assert_allclose(h1.H_r, h2.H_r, atol=1e-9)


def test_bbox_extent_keeps_alignment_and_covers_sources(rng):
    vl, vr = random_pair(rng, intr=Intrinsics(400.0, 320, 240))
    pts = visible_points(rng, vl, vr, 30)
    assert row_residuals(vl, vr, pts, extent="bbox").max() <= 0.5
    frame = build_rectifying_rotation(vl.pose, vr.pose)
    hp = compute_homographies(vl, vr, frame, extent="bbox")
    h, w = hp.shape
    for H in (hp.H_l, hp.H_r):
        for corner in ((0, 0), (319, 0), (0, 239), (319, 239)):
            x, y = apply_h(H, *corner)
            assert -1 <= x - hp.offset[0] <= w and -1 <= y - hp.offset[1] <= h


def test_shared_intrinsics_average():
    k = shared_intrinsics(Intrinsics(800.0, 640, 480), Intrinsics(1000.0, 600, 500))
    assert (k.f, k.w, k.h) == (900.0, 640, 500)


def test_warp_identity_is_exact(rng):
    img = rng.uniform(0, 255, (30, 40)).astype(np.float32)
    out, mask = warp_planar(img, np.eye(3), 40, 30)
    assert mask.all()
    np.testing.assert_array_equal(out, img)


def test_warp_translation():
    img = np.tile(np.arange(40, dtype=np.float32), (30, 1)) * 3.0
    H = np.array([[1.0, 0, 5], [0, 1, 0], [0, 0, 1]])
    out, mask = warp_planar(img, H, 40, 30)
    np.testing.assert_array_equal(out[:, 5:], img[:, :-5])
    assert not mask[:, :5].any() and mask[:, 5:].all()
    assert (out[:, :5] == 0).all()


def test_warp_round_trip_smooth_image():
    yy, xx = np.mgrid[0:120, 0:160].astype(np.float64)
    img = (127 + 60 * np.sin(xx / 17.0) * np.cos(yy / 23.0)).astype(np.float32)
    th = np.deg2rad(4.0)
    H = np.array([[np.cos(th), -np.sin(th), 6.0], [np.sin(th), np.cos(th), -3.0], [1e-5, 0.0, 1.0]])
    fwd, m1 = warp_planar(img, H, 160, 120)
    back, m2 = warp_planar(fwd, np.linalg.inv(H), 160, 120)
    # interior, away from the masked border after two resamplings
    good = m2 & (back > 0)
    good[:10], good[-10:], good[:, :10], good[:, -10:] = False, False, False, False
    assert good.sum() > 10000
    assert np.abs(back - img)[good].max() <= 2.0


def test_warp_singular():
    with pytest.raises(SingularHomography):
        warp_planar(np.zeros((4, 4)), np.zeros((3, 3)), 4, 4)


def test_rectify_pair_shapes(rng):
    vl, vr = random_pair(rng, intr=Intrinsics(200.0, 64, 48))
    img = rng.uniform(0, 255, (48, 64))
    rp = rectify_pair(vl, vr, img, img)
    assert rp.left.shape == rp.right.shape == (48, 64)
    assert (rp.left[~rp.mask_l] == 0).all()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_row_alignment_property(seed):
    rng = np.random.default_rng(seed)
    vl, vr = random_pair(rng)
    pts = visible_points(rng, vl, vr, 10)
    assert row_residuals(vl, vr, pts).max() <= 0.5
