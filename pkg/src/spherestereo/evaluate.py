"""Completeness and cloud-to-cloud accuracy metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyReference


@dataclass
class Completeness:
    count_a: int
    count_b: int
    gain_pct: float | None     # None when count_b == 0
    flagged: bool = False


@dataclass
class CloudDistance:
    mean_abs_dist: float
    std_dist: float
    points_used: int
    max_dist: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvalReport:
    count_a: int
    count_b: int
    completeness_gain_pct: float | None
    mean_abs_dist: float | None
    std_dist: float | None
    max_dist: float | None
    points_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def completeness(cloud_a, cloud_b) -> Completeness:
    """Point counts and the signed percentage gain of ``a`` over ``b``."""
    na, nb = len(cloud_a.points), len(cloud_b.points)
    if nb == 0:
        return Completeness(na, nb, None, flagged=True)
    return Completeness(na, nb, 100.0 * (na - nb) / nb)


class ReferenceIndex:
    """A reference cloud with its k-d tree, built once and queried many times."""

    def __init__(self, reference):
        pts = np.asarray(getattr(reference, "points", reference), dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise EmptyReference("reference cloud is empty")
        self.points = pts
        # sliding-midpoint splits: median splits degrade badly for queries far from a thin surface
        self.tree = cKDTree(pts, balanced_tree=False, compact_nodes=False)


def nearest_neighbors(test: np.ndarray, reference, k_ties: int = 8):
    """Exact nearest reference neighbour of each test point.

    ``reference`` is an ``(n, 3)`` array or a ``ReferenceIndex``.
    Equal-distance candidates resolve to the smallest reference index.
    Returns ``(distances, indices)``.
    """
    index = reference if isinstance(reference, ReferenceIndex) else ReferenceIndex(reference)
    reference, tree = index.points, index.tree
    test = np.asarray(test, dtype=np.float64).reshape(-1, 3)
    if len(test) == 0:
        return np.zeros(0), np.zeros(0, dtype=np.intp)
    k = min(k_ties, len(reference))
    dist, idx = tree.query(test, k=k)
    if k == 1:
        dist, idx = dist[:, None], idx[:, None]
    # recompute exactly so equal distances compare equal
    diff = reference[idx] - test[:, None, :]
    exact = np.sqrt(np.einsum("nkj,nkj->nk", diff, diff))
    best = exact.min(axis=1, keepdims=True)
    cand = np.where(exact == best, idx, np.iinfo(np.intp).max)
    choice = cand.min(axis=1)
    if k < len(reference):
        # every candidate tied: more equidistant points may exist beyond k
        for row in np.nonzero((exact == best).all(axis=1))[0]:
            r = best[row, 0]
            near = np.asarray(tree.query_ball_point(test[row], r * (1 + 1e-9) + 1e-300), dtype=np.intp)
            dd = np.sqrt(((reference[near] - test[row]) ** 2).sum(axis=1))
            choice[row] = near[dd == r].min()
    return best[:, 0], choice


def cloud_to_cloud(test, reference, max_dist: float | None = None) -> CloudDistance:
    """Mean and standard deviation of nearest-neighbour distances from ``test`` to ``reference``.

    Points farther than ``max_dist`` from the reference are left out.
    ``reference`` may be a cloud, an array or a prebuilt ``ReferenceIndex``.
    """
    ref = reference if isinstance(reference, ReferenceIndex) else getattr(reference, "points", reference)
    pts = getattr(test, "points", test)
    dist, _ = nearest_neighbors(pts, ref)
    if max_dist is not None:
        dist = dist[dist <= max_dist]
    if len(dist) == 0:
        return CloudDistance(float("nan"), float("nan"), 0, max_dist)
    return CloudDistance(float(dist.mean()), float(dist.std()), int(len(dist)), max_dist)


def evaluate(cloud_a, cloud_b, reference=None, max_dist: float | None = None) -> EvalReport:
    """Compare ``cloud_a`` against ``cloud_b`` (completeness) and ``reference`` (accuracy of ``a``)."""
    comp = completeness(cloud_a, cloud_b)
    mean = std = None
    used = 0
    if reference is not None:
        acc = cloud_to_cloud(cloud_a, reference, max_dist)
        mean, std, used = acc.mean_abs_dist, acc.std_dist, acc.points_used
    return EvalReport(comp.count_a, comp.count_b, comp.gain_pct, mean, std, max_dist, used)
