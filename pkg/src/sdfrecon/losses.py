"""Loss terms for fitting the implicit field, plus the annealing schedule.

All reductions over sample sets are arithmetic means (the loss integrals
are Monte-Carlo means over the sampled sets), which keeps the published
weights scale-free in batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LossConfig", "AnnealSchedule", "LossError",
    "manifold_loss", "non_manifold_loss", "eikonal_loss",
    "singular_hessian_loss", "smooth_energy_loss", "neumann_loss",
    "tau", "total_loss",
    "REGULARIZERS", "EIKONAL_MODES", "SMOOTH_KINDS",
]

REGULARIZERS = ("singular_hessian", "dirichlet", "hessian_l2", "hessian_l1",
                "laplacian", "none")
EIKONAL_MODES = ("relaxed_on_P", "exact_on_P", "exact_on_all")
SMOOTH_KINDS = ("dirichlet", "hessian_l2", "hessian_l1", "laplacian")


class LossError(ValueError):
    pass


@dataclass
class LossConfig:
    lambda_manifold: float = 7000.0
    lambda_non_manifold: float = 600.0
    lambda_eikonal_relax: float = 50.0
    lambda_singular_hessian: float = 3.0
    alpha: float = 100.0
    sigma_min: float = 0.8
    regularizer: str = "singular_hessian"
    eikonal_mode: str = "relaxed_on_P"
    neumann_weight: float = 0.0     # 0 = off; 100 when fitting oriented clouds
    laplacian_squared: bool = False  # square the trace instead of |trace|

    def __post_init__(self):
        for name in ("lambda_manifold", "lambda_non_manifold",
                     "lambda_eikonal_relax", "lambda_singular_hessian",
                     "neumann_weight"):
            if getattr(self, name) < 0:
                raise LossError(f"{name} must be >= 0")
        if not (0 < self.sigma_min <= 1):
            raise LossError("sigma_min must lie in (0, 1]")
        if self.alpha <= 0:
            raise LossError("alpha must be positive")
        if self.regularizer not in REGULARIZERS:
            raise LossError(f"unknown regularizer {self.regularizer!r}")
        if self.eikonal_mode not in EIKONAL_MODES:
            raise LossError(f"unknown eikonal mode {self.eikonal_mode!r}")


@dataclass
class AnnealSchedule:
    """Weight multiplier for the Hessian regularizer: 1 on the first 20% of
    iterations, then linear down to mid_value at 40%, then linear down to
    final_value at the end."""
    total_iters: int
    plateau_frac: float = 0.2
    mid_value: float = 0.0003
    final_value: float = 0.00003

    def __post_init__(self):
        if self.total_iters <= 0:
            raise LossError("total_iters must be positive")
        if not (0 < self.final_value <= self.mid_value <= 1):
            raise LossError("need 0 < final <= mid <= 1")

    def __call__(self, iteration: int) -> float:
        return tau(self, iteration)


def tau(schedule: AnnealSchedule, iteration: int) -> float:
    T = schedule.total_iters
    if not (0 <= iteration <= T):
        raise LossError(f"iteration {iteration} outside [0, {T}]")
    t1 = schedule.plateau_frac * T
    t2 = 2 * schedule.plateau_frac * T
    if iteration < t1:
        return 1.0
    if iteration < t2:
        u = (iteration - t1) / (t2 - t1)
        return 1.0 + u * (schedule.mid_value - 1.0)
    if iteration == T or T == t2:
        return schedule.final_value
    u = (iteration - t2) / (T - t2)
    return schedule.mid_value + u * (schedule.final_value - schedule.mid_value)


def _check_nonempty(arr, term):
    arr = np.asarray(arr)
    if arr.size == 0:
        raise LossError(f"{term}: empty sample set")
    return arr


def manifold_loss(f_values) -> float:
    """mean |f| over the input points."""
    f = _check_nonempty(f_values, "manifold_loss")
    return float(np.mean(np.abs(f)))


def non_manifold_loss(f_values, alpha: float = 100.0) -> float:
    """mean exp(-alpha |f|) over the far query set."""
    f = _check_nonempty(f_values, "non_manifold_loss")
    if alpha <= 0:
        raise LossError("alpha must be positive")
    return float(np.mean(np.exp(-alpha * np.abs(f))))


def eikonal_loss(grads, mode: str = "relaxed_on_P", sigma_min: float = 0.8) -> float:
    """Relaxed mode: mean max(0, sigma_min - |grad|); exact: mean ||grad| - 1|."""
    g = _check_nonempty(grads, "eikonal_loss")
    norms = np.linalg.norm(np.atleast_2d(g), axis=1)
    if mode == "relaxed_on_P":
        return float(np.mean(np.maximum(0.0, sigma_min - norms)))
    if mode in ("exact_on_P", "exact_on_all"):
        return float(np.mean(np.abs(norms - 1.0)))
    raise LossError(f"unknown eikonal mode {mode!r}")


def singular_hessian_loss(hessians) -> float:
    """mean |det H| over the near query set."""
    H = _check_nonempty(hessians, "singular_hessian_loss")
    H = H.reshape(-1, H.shape[-2], H.shape[-1])
    from .autodiff import det_batch
    return float(np.mean(np.abs(det_batch(H))))


def smooth_energy_loss(grads=None, hessians=None, kind: str = "dirichlet",
                       laplacian_squared: bool = False) -> float:
    """Ablation regularizers over P union Q_far."""
    if kind == "dirichlet":
        g = _check_nonempty(grads, "smooth_energy_loss")
        return float(np.mean(0.5 * np.sum(np.atleast_2d(g) ** 2, axis=1)))
    H = _check_nonempty(hessians, "smooth_energy_loss")
    H = H.reshape(-1, H.shape[-2], H.shape[-1])
    if kind == "hessian_l2":
        return float(np.mean(np.sum(H ** 2, axis=(1, 2))))
    if kind == "hessian_l1":
        return float(np.mean(np.sum(np.abs(H), axis=(1, 2))))
    if kind == "laplacian":
        trace = np.trace(H, axis1=1, axis2=2)
        return float(np.mean(trace ** 2 if laplacian_squared else np.abs(trace)))
    raise LossError(f"unknown smooth energy kind {kind!r}")


def neumann_loss(grads, normals) -> float:
    """mean (1 - cos(grad, n)) over oriented input points.

    The published form 1 - <grad, n> assumes unit gradients; the raw inner
    product is unbounded below, so the cosine (normalized) form is used.
    """
    g = np.atleast_2d(_check_nonempty(grads, "neumann_loss"))
    if normals is None:
        raise LossError("neumann_loss requires normals")
    n = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    if n.shape != g.shape:
        raise LossError(f"normals shape {n.shape} does not match grads {g.shape}")
    gnorm = np.linalg.norm(g, axis=1)
    safe = np.where(gnorm > 0, gnorm, 1.0)
    cos = np.where(gnorm > 0, np.sum(g * n, axis=1) / safe, 0.0)
    return float(np.mean(1.0 - cos))


def total_loss(terms: dict, config: LossConfig, tau_value: float) -> float:
    """Weighted sum; the regularizer slot is scaled by the annealing factor."""
    total = 0.0
    total += config.lambda_manifold * terms.get("manifold", 0.0)
    total += config.lambda_non_manifold * terms.get("non_manifold", 0.0)
    total += config.lambda_eikonal_relax * terms.get("eikonal", 0.0)
    if config.regularizer != "none":
        total += config.lambda_singular_hessian * tau_value * terms.get("regularizer", 0.0)
    if config.neumann_weight > 0:
        total += config.neumann_weight * terms.get("neumann", 0.0)
    return float(total)
