"""Critical-point census of the field in the thin shell around the surface.

Critical points (grad f = 0) are located by damped Newton iteration on the
gradient, seeded from grid nodes where the gradient norm is a local
minimum, then classified by the signs of the Hessian eigenvalues. The
alternating count sum estimates the Euler characteristic of the shell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import det_batch

__all__ = ["CriticalPoint", "MorseReport", "find_critical_points", "census",
           "shell_statistics"]

GRAD_TOL = 1e-8
DEDUP_RADIUS = 1e-4
DEGENERATE_EIG_TOL = 1e-6
TIKHONOV_SHIFT = 1e-8

_KINDS_3D = {0: "minimum", 1: "saddle_1", 2: "saddle_2", 3: "maximum"}
_KINDS_2D = {0: "minimum", 1: "saddle", 2: "maximum"}


@dataclass(frozen=True)
class CriticalPoint:
    position: np.ndarray
    value: float
    grad_norm: float
    eigenvalues: np.ndarray     # sorted ascending
    kind: str                   # minimum / saddle(_1/_2) / maximum / degenerate


@dataclass
class MorseReport:
    counts: dict                       # kind -> count (degenerate listed too)
    euler_characteristic_estimate: int
    shell_delta: float
    n_points: int
    n_degenerate: int
    n_seeds: int = 0
    n_nonconverged: int = 0
    stats: dict = field(default_factory=dict)   # from shell_statistics

    def to_json(self, path=None) -> str:
        rep = asdict(self)
        blob = json.dumps(rep, indent=1, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(blob + "\n")
        return blob


def _classify(eigenvalues, dim):
    if np.any(np.abs(eigenvalues) < DEGENERATE_EIG_TOL):
        return "degenerate"
    negatives = int(np.sum(eigenvalues < 0))
    return (_KINDS_3D if dim == 3 else _KINDS_2D)[negatives]


def _local_minima_mask(gn: np.ndarray) -> np.ndarray:
    """Nodes whose gradient norm is <= all axis neighbors."""
    mask = np.ones_like(gn, dtype=bool)
    for axis in range(gn.ndim):
        lo = [slice(None)] * gn.ndim
        hi = [slice(None)] * gn.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, b = gn[tuple(lo)], gn[tuple(hi)]
        mask[tuple(lo)] &= a <= b
        mask[tuple(hi)] &= b <= a
    return mask


def find_critical_points(field_obj, domain=None, resolution: int = 32,
                         delta: float = 0.05, max_newton: int = 50,
                         grad_tol: float = GRAD_TOL,
                         dedup_radius: float = DEDUP_RADIUS):
    """Locate and classify critical points of the field inside the domain
    with |f| < delta. Returns (points, diagnostics dict)."""
    if resolution < 8:
        raise ValueError("seed grid resolution must be at least 8")
    if delta <= 0:
        raise ValueError("shell half-width delta must be positive")
    d = field_obj.input_dim
    if domain is None:
        lo, hi = -np.ones(d), np.ones(d)
    else:
        lo = np.asarray(domain[0], dtype=np.float64) * np.ones(d)
        hi = np.asarray(domain[1], dtype=np.float64) * np.ones(d)

    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    _, g, _ = field_obj.forward(nodes, order=1)
    gn = np.linalg.norm(g, axis=1).reshape((resolution,) * d)
    seeds = nodes[_local_minima_mask(gn).ravel()]

    converged = []
    n_fail = 0
    for seed in seeds:
        x = seed.copy()
        ok = False
        for _ in range(max_newton):
            f, g1, H = field_obj.forward(x[None, :], order=2)
            gvec = g1[0]
            if np.linalg.norm(gvec) < grad_tol:
                ok = True
                break
            Hm = H[0]
            # damp near-singular Hessians with a Tikhonov shift
            try:
                step = np.linalg.solve(Hm + TIKHONOV_SHIFT * np.eye(d), gvec)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(Hm, gvec, rcond=None)[0]
            if not np.isfinite(step).all():
                break
            x = x - step
            if np.any(x < lo - 0.5) or np.any(x > hi + 0.5):
                break
        if ok and np.all(x >= lo) and np.all(x <= hi):
            converged.append(x)
        else:
            n_fail += 1

    # dedup within radius, keep first hit
    unique = []
    for x in converged:
        if all(np.linalg.norm(x - u) > dedup_radius for u in unique):
            unique.append(x)

    points = []
    for x in unique:
        f, g1, H = field_obj.forward(x[None, :], order=2)
        if abs(float(f[0])) >= delta:
            continue
        eig = np.sort(np.linalg.eigvalsh(H[0]))
        points.append(CriticalPoint(position=x, value=float(f[0]),
                                    grad_norm=float(np.linalg.norm(g1[0])),
                                    eigenvalues=eig, kind=_classify(eig, d)))
    diagnostics = {"n_seeds": len(seeds), "n_nonconverged": n_fail,
                   "n_outside_shell": len(unique) - len(points)}
    return points, diagnostics


def census(points, delta: float = 0.05, diagnostics=None, dim=None) -> MorseReport:
    """Counts by kind and the alternating-sum Euler characteristic estimate
    (c_min - c_1saddle + c_2saddle - c_max in 3D, c_min - c_saddle + c_max
    in 2D). Degenerate points (a near-zero Hessian eigenvalue) are excluded
    from the sum and reported separately.
    """
    counts = {}
    for p in points:
        counts[p.kind] = counts.get(p.kind, 0) + 1
    if dim is None:
        dim = len(points[0].position) if points else 3
    c_min = counts.get("minimum", 0)
    c_max = counts.get("maximum", 0)
    if dim == 3:
        chi = c_min - counts.get("saddle_1", 0) + counts.get("saddle_2", 0) - c_max
    else:
        chi = c_min - counts.get("saddle", 0) + c_max
    n_deg = counts.get("degenerate", 0)
    rep = MorseReport(counts=counts, euler_characteristic_estimate=int(chi),
                      shell_delta=delta, n_points=len(points), n_degenerate=n_deg)
    if diagnostics:
        rep.n_seeds = diagnostics.get("n_seeds", 0)
        rep.n_nonconverged = diagnostics.get("n_nonconverged", 0)
    return rep


def shell_statistics(field_obj, cloud_points, delta: float = 0.05,
                     n_samples: int = 10000,
                     rng: np.random.Generator | None = None,
                     sigma: float = 0.05, max_rounds: int = 200):
    """Rejection-sample points with |f| < delta near the cloud and aggregate
    |det H|, |trace H|, and the gradient norm over them."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if rng is None:
        rng = np.random.default_rng()
    cloud_points = np.atleast_2d(np.asarray(cloud_points, dtype=np.float64))
    n_cloud, d = cloud_points.shape
    accepted = []
    drawn = 0
    for _ in range(max_rounds):
        idx = rng.integers(0, n_cloud, size=n_samples)
        cand = cloud_points[idx] + sigma * rng.standard_normal((n_samples, d))
        drawn += n_samples
        f = field_obj.forward(cand, order=0)[0]
        keep = np.abs(f) < delta
        accepted.append(cand[keep])
        if sum(len(a) for a in accepted) >= n_samples:
            break
    pts = np.vstack(accepted)[:n_samples]
    if len(pts) < max(1, drawn // 1000):
        raise RuntimeError(
            f"shell sampling acceptance rate below 0.1% ({len(pts)}/{drawn})")
    _, g, H = field_obj.forward(pts, order=2)
    dets = np.abs(det_batch(H))
    traces = np.abs(np.trace(H, axis1=1, axis2=2))
    gn = np.linalg.norm(g, axis=1)
    return {
        "n_samples": int(len(pts)),
        "mean_abs_det": float(dets.mean()),
        "max_abs_det": float(dets.max()),
        "mean_abs_trace": float(traces.mean()),
        "max_abs_trace": float(traces.max()),
        "mean_grad_norm": float(gn.mean()),
        "max_grad_norm": float(gn.max()),
    }
