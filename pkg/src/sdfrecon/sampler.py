"""Per-iteration batch construction: surface subset, Gaussian near-surface
queries, and uniform far queries in the normalized cube."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud
from .spatial import KdTree

__all__ = ["SampleBatch", "compute_sigmas", "draw_batch"]


@dataclass
class SampleBatch:
    surface_indices: np.ndarray    # indices into the cloud
    surface_points: np.ndarray     # (m, d)
    near_points: np.ndarray        # (m, d), one Gaussian draw per surface point
    far_points: np.ndarray         # (batch_size, d) uniform in [-1, 1]^d
    sigmas: np.ndarray             # (m,) radii used for the near draws
    surface_normals: np.ndarray | None = None


def compute_sigmas(cloud: PointCloud, k: int = 50, tree: KdTree | None = None) -> np.ndarray:
    """sigma_i = distance from p_i to its k-th nearest neighbor (self excluded)."""
    n = len(cloud)
    if n < 2:
        raise ValueError("need at least two points to compute sigmas")
    if k > n - 1:
        warnings.warn(f"k={k} too large for {n} points; clamping to {n - 1}")
        k = n - 1
    if tree is None:
        tree = KdTree(cloud.points)
    _, dist = tree.knn_batch(cloud.points, k, exclude_index=np.arange(n))
    return dist[:, -1]


def draw_batch(cloud: PointCloud, sigmas: np.ndarray, batch_size: int = 15000,
               rng: np.random.Generator | None = None) -> SampleBatch:
    """One training batch from a normalized cloud.

    Surface points: the whole cloud if it fits the batch size, otherwise a
    uniform subset without replacement. Near points: one isotropic Gaussian
    draw (stddev sigma_i) per selected surface point. Far points: batch_size
    uniform draws from [-1, 1]^d.
    """
    if rng is None:
        rng = np.random.default_rng()
    n, d = cloud.points.shape
    if n <= batch_size:
        idx = np.arange(n)
    else:
        idx = rng.choice(n, size=batch_size, replace=False)
    pts = cloud.points[idx]
    sig = np.asarray(sigmas)[idx]
    near = pts + sig[:, None] * rng.standard_normal((len(idx), d))
    far = rng.uniform(-1.0, 1.0, size=(batch_size, d))
    normals = cloud.normals[idx] if cloud.normals is not None else None
    return SampleBatch(surface_indices=idx, surface_points=pts, near_points=near,
                       far_points=far, sigmas=sig, surface_normals=normals)
