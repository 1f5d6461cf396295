"""KdTree queries checked against O(n^2) brute force."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfrecon.spatial import KdTree, SpatialError


def brute_knn(points, queries, k, exclude_index=None):
    """Reference knn with (distance, index) tie-break and index exclusion."""
    out_i = np.empty((len(queries), k), dtype=np.int64)
    out_d = np.empty((len(queries), k))
    for r, q in enumerate(queries):
        d = np.linalg.norm(points - q, axis=1)
        order = np.lexsort((np.arange(len(points)), d))
        if exclude_index is not None:
            order = order[order != exclude_index[r]]
        out_i[r] = order[:k]
        out_d[r] = d[order[:k]]
    return out_i, out_d


class TestKnnBatch:
    @given(st.integers(0, 1000), st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force(self, seed, k):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-1, 1, (30, 3))
        queries = rng.uniform(-1, 1, (10, 3))
        tree = KdTree(pts)
        idx, dist = tree.knn_batch(queries, k)
        bidx, bdist = brute_knn(pts, queries, k)
        np.testing.assert_allclose(dist, bdist, atol=1e-12)
        np.testing.assert_array_equal(idx, bidx)

    def test_self_exclusion_by_index(self, rng):
        pts = rng.uniform(-1, 1, (25, 2))
        tree = KdTree(pts)
        n = len(pts)
        idx, dist = tree.knn_batch(pts, 5, exclude_index=np.arange(n))
        bidx, bdist = brute_knn(pts, pts, 5, exclude_index=np.arange(n))
        np.testing.assert_array_equal(idx, bidx)
        np.testing.assert_allclose(dist, bdist, atol=1e-12)
        assert not np.any(idx == np.arange(n)[:, None])

    def test_duplicate_points_still_counted(self):
        # two coincident points: excluding self by index keeps the twin at d=0
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        tree = KdTree(pts)
        idx, dist = tree.knn_batch(pts[:1], 1, exclude_index=np.array([0]))
        assert idx[0, 0] == 1
        assert dist[0, 0] == 0.0

    def test_tie_break_prefers_lower_index(self):
        # points 1 and 2 are equidistant from the query
        pts = np.array([[0.0, 0.0], [2.0, 1.0], [2.0, -1.0], [9.0, 9.0]])
        tree = KdTree(pts)
        idx, _ = tree.knn_batch(np.array([[2.0, 0.0]]), 3)
        assert idx[0, 0] == 1 and idx[0, 1] == 2

    def test_k_out_of_range(self, rng):
        tree = KdTree(rng.uniform(-1, 1, (5, 3)))
        with pytest.raises(SpatialError):
            tree.knn_batch(np.zeros((1, 3)), 6)
        with pytest.raises(SpatialError):
            tree.knn_batch(np.zeros((1, 3)), 0)
        with pytest.raises(SpatialError):
            tree.knn_batch(np.zeros((1, 3)), 5, exclude_index=np.array([0]))


class TestSingleQuery:
    def test_knn_list_form(self, rng):
        pts = rng.uniform(-1, 1, (12, 3))
        tree = KdTree(pts)
        hits = tree.knn(pts[3], 4, exclude_self=True)
        assert len(hits) == 4
        assert all(i != 3 for i, _ in hits)
        d = [h[1] for h in hits]
        assert d == sorted(d)

    def test_exclude_self_requires_tree_point(self, rng):
        tree = KdTree(rng.uniform(-1, 1, (6, 2)))
        with pytest.raises(SpatialError):
            tree.knn(np.array([5.0, 5.0]), 2, exclude_self=True)


class TestKthDistanceSelf:
    def test_matches_brute_force(self, rng):
        pts = rng.uniform(-1, 1, (40, 3))
        tree = KdTree(pts)
        got = tree.kth_distance_self(7)
        n = len(pts)
        _, bdist = brute_knn(pts, pts, 7, exclude_index=np.arange(n))
        np.testing.assert_allclose(got, bdist[:, -1], atol=1e-12)


class TestNearest:
    def test_matches_brute_force(self, rng):
        pts = rng.uniform(-1, 1, (20, 3))
        queries = rng.uniform(-1, 1, (9, 3))
        tree = KdTree(pts)
        dist, idx = tree.nearest(queries)
        bidx, bdist = brute_knn(pts, queries, 1)
        np.testing.assert_allclose(dist, bdist[:, 0], atol=1e-12)
        np.testing.assert_array_equal(idx, bidx[:, 0])


class TestValidation:
    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(SpatialError):
            KdTree(np.zeros((0, 3)))
        with pytest.raises(SpatialError):
            KdTree(np.array([[0.0, np.inf]]))
