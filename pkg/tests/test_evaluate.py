import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherestereo.errors import EmptyReference
from spherestereo.evaluate import ReferenceIndex, cloud_to_cloud, completeness, evaluate, nearest_neighbors
from spherestereo.triangulate import PointCloud

from _oracles import brute_force


def test_completeness_examples():
    a, b = PointCloud(np.zeros((10405, 3))), PointCloud(np.zeros((10000, 3)))
    assert completeness(a, b).gain_pct == pytest.approx(4.05, abs=1e-12)
    assert completeness(b, b).gain_pct == 0.0
    c = completeness(a, PointCloud.empty())
    assert c.flagged and c.gain_pct is None


def test_identical_clouds(rng):
    ref = PointCloud(rng.normal(size=(300, 3)))
    r = cloud_to_cloud(ref, ref)
    assert (r.mean_abs_dist, r.std_dist, r.points_used) == (0.0, 0.0, 300)


def test_translated_clone_is_exact():
    g = np.stack(np.meshgrid(np.arange(10), np.arange(10), np.arange(10), indexing="ij"), -1).reshape(-1, 3)
    ref = g * 0.5      # spacing 0.5 > 0.2
    test = ref + (0.1, 0.0, 0.0)
    r = cloud_to_cloud(test, ref)
    assert r.mean_abs_dist == pytest.approx(0.1, abs=1e-15)
    assert r.std_dist < 1e-15


def test_matches_brute_force(rng):
    for n, m in ((200, 500), (1000, 1000), (7, 3)):
        test = rng.normal(size=(n, 3))
        ref = rng.normal(size=(m, 3))
        bd, bi = brute_force(test, ref)
        d, i = nearest_neighbors(test, ref)
        np.testing.assert_array_equal(i, bi)
        assert np.abs(d - bd).max() <= 1e-12
        r = cloud_to_cloud(test, ref)
        assert abs(r.mean_abs_dist - bd.mean()) <= 1e-12
        assert abs(r.std_dist - bd.std()) <= 1e-12


def test_ties_resolve_to_smallest_index():
    # a query equidistant from many lattice points, duplicated points included
    g = np.stack(np.meshgrid(*[np.arange(-2.0, 3.0)] * 3, indexing="ij"), -1).reshape(-1, 3)
    ref = np.concatenate([g[::-1], g])
    test = np.array([[0.5, 0.5, 0.5], [0.0, 0.0, 0.5], [1.0, 1.0, 1.0]])
    d, i = nearest_neighbors(test, ref, k_ties=2)
    bd, bi = brute_force(test, ref)
    np.testing.assert_array_equal(i, bi)
    np.testing.assert_array_equal(d, bd)


def test_max_dist_excludes_points():
    ref = np.zeros((1, 3))
    test = np.array([[0.1, 0, 0], [0.2, 0, 0], [5.0, 0, 0]])
    r = cloud_to_cloud(test, ref, max_dist=1.0)
    assert r.points_used == 2 and r.mean_abs_dist == pytest.approx(0.15)


def test_empty_reference():
    with pytest.raises(EmptyReference):
        cloud_to_cloud(np.zeros((2, 3)), np.zeros((0, 3)))


def test_reference_index_reuse(rng):
    ref = rng.normal(size=(400, 3))
    test = rng.normal(size=(50, 3))
    idx = ReferenceIndex(PointCloud(ref))
    assert cloud_to_cloud(test, idx) == cloud_to_cloud(test, ref)


def test_evaluate_report(rng):
    ref = PointCloud(rng.normal(size=(100, 3)))
    a = PointCloud(ref.points[:60])
    b = PointCloud(ref.points[:50])
    rep = evaluate(a, b, ref).to_dict()
    assert rep["count_a"] == 60 and rep["count_b"] == 50
    assert rep["completeness_gain_pct"] == pytest.approx(20.0)
    assert rep["mean_abs_dist"] == 0.0 and rep["points_used"] == 60


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), shift=st.tuples(*[st.floats(-50, 50)] * 3))
def test_translation_covariance(seed, shift):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=(80, 3))
    test = rng.normal(size=(40, 3))
    a = cloud_to_cloud(test, ref)
    b = cloud_to_cloud(test + shift, ref + shift)
    assert abs(a.mean_abs_dist - b.mean_abs_dist) <= 1e-12
    assert abs(a.std_dist - b.std_dist) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(0, 20))
def test_zero_mean_iff_coincident(seed, k):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=(30, 3))
    test = ref[rng.integers(0, 30, 20)].copy()
    assert cloud_to_cloud(test, ref).mean_abs_dist == 0.0
    if k < 20:
        test[k] += 1e-3
        assert cloud_to_cloud(test, ref).mean_abs_dist > 0.0
