"""Surface evaluation metrics: Chamfer-L1, F-Score, and normal consistency.

Conventions follow the ConvONet metric suite: 100K area-weighted samples
per mesh, both sets rescaled by the ground truth's bounding box so its
longest axis spans [-0.5, 0.5], Chamfer reported x10^3, F-Score threshold
0.005, normal consistency as a percentage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .geometry import TriangleMesh
from .spatial import KdTree

__all__ = ["MetricsReport", "sample_surface", "rescale_pair", "chamfer_l1",
           "f_score", "normal_consistency", "evaluate_surfaces"]

CHAMFER_REPORT_SCALE = 1e3
DEFAULT_FSCORE_THRESHOLD = 0.005
DEFAULT_SAMPLES = 100_000


@dataclass
class MetricsReport:
    chamfer: float               # x10^3
    fscore: float                # percent
    precision: float             # percent
    recall: float                # percent
    normal_consistency: float | None   # percent, None if normals unavailable
    n_samples_gt: int
    n_samples_pred: int
    fscore_threshold: float

    def to_json(self, path=None) -> str:
        blob = json.dumps(asdict(self), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(blob + "\n")
        return blob

    def summary(self) -> str:
        nc = "n/a" if self.normal_consistency is None else f"{self.normal_consistency:.2f}"
        return (f"chamfer(x1e3)={self.chamfer:.4f} fscore={self.fscore:.2f} "
                f"precision={self.precision:.2f} recall={self.recall:.2f} "
                f"normal_consistency={nc}")


def sample_surface(mesh: TriangleMesh, n: int = DEFAULT_SAMPLES,
                   rng: np.random.Generator | None = None):
    """Area-weighted uniform samples on the mesh; returns (points, normals).

    Triangle choice is area-weighted, placement is uniform barycentric, and
    each sample carries its source triangle's face normal.
    """
    if mesh.n_triangles == 0:
        raise ValueError("cannot sample an empty mesh")
    if rng is None:
        rng = np.random.default_rng()
    v = mesh.vertices
    t = mesh.triangles
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    cross = np.cross(e1, e2)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero total area")
    probs = areas / total
    choice = rng.choice(len(t), size=n, p=probs)
    u = rng.random(n)
    w = rng.random(n)
    flip = u + w > 1.0
    u[flip] = 1.0 - u[flip]
    w[flip] = 1.0 - w[flip]
    pts = v[t[choice, 0]] + u[:, None] * e1[choice] + w[:, None] * e2[choice]
    nrm = cross[choice]
    lengths = np.linalg.norm(nrm, axis=1)
    nrm = nrm / np.where(lengths > 0, lengths, 1.0)[:, None]
    return pts, nrm


def rescale_pair(gt_points: np.ndarray, pred_points: np.ndarray):
    """One isotropic transform, computed from the ground-truth bbox, applied
    to both sets so the gt's longest axis spans [-0.5, 0.5]."""
    gt = np.asarray(gt_points, dtype=np.float64)
    pred = np.asarray(pred_points, dtype=np.float64)
    if len(gt) == 0 or len(pred) == 0:
        raise ValueError("rescale_pair needs non-empty point sets")
    lo = gt.min(axis=0)
    hi = gt.max(axis=0)
    longest = (hi - lo).max()
    if longest <= 0:
        raise ValueError("degenerate ground-truth bounding box")
    center = (lo + hi) / 2.0
    scale = 1.0 / longest
    return (gt - center) * scale, (pred - center) * scale


def _nearest(a, b):
    """For each point of a, distance to (and index of) its closest point in b."""
    tree = KdTree(b)
    return tree.nearest(a)


def chamfer_l1(p1: np.ndarray, p2: np.ndarray) -> float:
    """Symmetric mean closest-point distance (unscaled; reporting multiplies
    by 10^3)."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if len(p1) == 0 or len(p2) == 0:
        raise ValueError("chamfer_l1 needs non-empty point sets")
    d12, _ = _nearest(p1, p2)
    d21, _ = _nearest(p2, p1)
    return 0.5 * float(np.mean(d12)) + 0.5 * float(np.mean(d21))


def f_score(p1: np.ndarray, p2: np.ndarray, t: float = DEFAULT_FSCORE_THRESHOLD):
    """(fscore, precision, recall) in percent; p1 is ground truth.

    recall = fraction of p1 within t of p2, precision = fraction of p2
    within t of p1, fscore their harmonic mean (0 when both vanish).
    """
    if t <= 0:
        raise ValueError("threshold must be positive")
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if len(p1) == 0 or len(p2) == 0:
        raise ValueError("f_score needs non-empty point sets")
    d12, _ = _nearest(p1, p2)
    d21, _ = _nearest(p2, p1)
    recall = float(np.mean(d12 < t)) * 100.0
    precision = float(np.mean(d21 < t)) * 100.0
    if recall + precision == 0.0:
        return 0.0, precision, recall
    fs = 2.0 * recall * precision / (recall + precision)
    return fs, precision, recall


def normal_consistency(p1, n1, p2, n2, absolute: bool = False) -> float:
    """Symmetric mean dot product with the closest point's normal, x100.

    Signed by default (a flipped field scores -100); absolute=True matches
    the common |dot| variant.
    """
    for n in (n1, n2):
        if n is None:
            raise ValueError("normal_consistency requires normals on both sides")
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    n1 = np.asarray(n1, dtype=np.float64)
    n2 = np.asarray(n2, dtype=np.float64)
    _, i12 = _nearest(p1, p2)
    _, i21 = _nearest(p2, p1)
    dots12 = np.sum(n1 * n2[i12], axis=1)
    dots21 = np.sum(n2 * n1[i21], axis=1)
    if absolute:
        dots12 = np.abs(dots12)
        dots21 = np.abs(dots21)
    return float(0.5 * np.mean(dots12) + 0.5 * np.mean(dots21)) * 100.0


def evaluate_surfaces(gt_points, pred_points, gt_normals=None, pred_normals=None,
                      fscore_threshold: float = DEFAULT_FSCORE_THRESHOLD,
                      rescale: bool = True,
                      absolute_normals: bool = False) -> MetricsReport:
    """Full metric suite on two sampled surfaces (gt first)."""
    if rescale:
        gt_points, pred_points = rescale_pair(gt_points, pred_points)
    chamfer = chamfer_l1(gt_points, pred_points) * CHAMFER_REPORT_SCALE
    fs, precision, recall = f_score(gt_points, pred_points, t=fscore_threshold)
    nc = None
    if gt_normals is not None and pred_normals is not None:
        nc = normal_consistency(gt_points, gt_normals, pred_points, pred_normals,
                                absolute=absolute_normals)
    return MetricsReport(chamfer=chamfer, fscore=fs, precision=precision,
                         recall=recall, normal_consistency=nc,
                         n_samples_gt=len(gt_points), n_samples_pred=len(pred_points),
                         fscore_threshold=fscore_threshold)
