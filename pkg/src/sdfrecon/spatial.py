"""Exact k-nearest-neighbor queries over a fixed point set.

Backed by scipy's cKDTree (exact search); this wrapper adds the
deterministic tie-break (distance, then lower index) and the self-exclusion
semantics the rest of the library relies on.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["KdTree", "SpatialError"]

_LEAF_SIZE = 16


class SpatialError(ValueError):
    pass


class KdTree:
    def __init__(self, points: np.ndarray):
        points = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
        if points.ndim != 2 or len(points) == 0:
            raise SpatialError("KdTree needs a non-empty (n, d) point array")
        if not np.isfinite(points).all():
            raise SpatialError("KdTree input contains non-finite coordinates")
        self.points = points
        self._tree = cKDTree(points, leafsize=_LEAF_SIZE)

    def __len__(self):
        return len(self.points)

    def knn_batch(self, queries, k: int, exclude_index=None):
        """k nearest neighbors per query, sorted by (distance, index).

        exclude_index: optional per-row tree index to drop (self-exclusion
        by index identity, so coordinate duplicates still count).
        Returns (indices (m, k), distances (m, k)).
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        n = len(self.points)
        avail = n - 1 if exclude_index is not None else n
        if k < 1 or k > avail:
            raise SpatialError(f"k={k} out of range (available {avail})")
        kk = k + 1 if exclude_index is not None else k
        dist, idx = self._tree.query(queries, k=kk)
        dist = dist.reshape(len(queries), kk)
        idx = idx.reshape(len(queries), kk)
        # deterministic tie-break: distance, then lower index
        order = np.lexsort((idx, dist), axis=1)
        rows = np.arange(len(queries))[:, None]
        dist = np.take_along_axis(dist, order, axis=1)
        idx = np.take_along_axis(idx, order, axis=1)
        if exclude_index is None:
            return idx.astype(np.int64), dist
        exclude_index = np.broadcast_to(np.asarray(exclude_index, dtype=np.int64),
                                        (len(queries),))
        out_i = np.empty((len(queries), k), dtype=np.int64)
        out_d = np.empty((len(queries), k))
        for r in range(len(queries)):
            mask = idx[r] != exclude_index[r]
            if mask.all():
                mask[-1] = False   # excluded index beyond the k+1 hits; trim
            out_i[r] = idx[r][mask][:k]
            out_d[r] = dist[r][mask][:k]
        return out_i, out_d

    def knn(self, query, k: int, exclude_self: bool = False, self_index=None):
        """Single-query knn returning a list of (index, distance).

        With exclude_self, the query is assumed to coincide with tree point
        `self_index`; if not given, the lowest-index exact duplicate is used.
        """
        query = np.asarray(query, dtype=np.float64)
        if exclude_self:
            if self_index is None:
                dup = self._tree.query_ball_point(query, r=0.0)
                if not dup:
                    raise SpatialError("exclude_self set but query is not a tree point")
                self_index = min(dup)
            idx, dist = self.knn_batch(query[None, :], k, exclude_index=[self_index])
        else:
            idx, dist = self.knn_batch(query[None, :], k)
        return list(zip(idx[0].tolist(), dist[0].tolist()))

    def kth_distance_self(self, k: int):
        """Distance from every tree point to its k-th neighbor (self excluded)."""
        _, dist = self.knn_batch(self.points, k, exclude_index=np.arange(len(self.points)))
        return dist[:, -1]

    def nearest(self, queries):
        """Nearest-neighbor distance and index for each query point."""
        dist, idx = self._tree.query(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
        return np.atleast_1d(dist), np.atleast_1d(idx).astype(np.int64)
