"""Adam optimization loop fitting the implicit field to a point cloud."""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import ParamGradient, loss_and_grad
from .geometry import PointCloud, normalize
from .losses import AnnealSchedule, LossConfig, total_loss
from .network import SineNetwork, save_model
from .sampler import compute_sigmas, draw_batch
from .spatial import KdTree

__all__ = ["TrainConfig", "AdamState", "LossHistory", "adam_step", "fit"]


@dataclass
class TrainConfig:
    iters: int = 10000
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 15000
    k_neighbors: int = 50
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    log_every: int = 100
    checkpoint_every: int = 0    # 0 = only the final checkpoint
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.iters <= 0:
            raise ValueError("iters must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(total_iters=self.iters)


class AdamState:
    """First/second moment arrays mirroring the parameters, plus the step count."""

    def __init__(self, net: SineNetwork):
        self.m = ParamGradient.zeros_like(net)
        self.v = ParamGradient.zeros_like(net)
        self.step = 0


def adam_step(net: SineNetwork, grad: ParamGradient, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    params = list(zip(net.weights + net.biases,
                      state.m.weights + state.m.biases,
                      state.v.weights + state.v.biases,
                      grad.weights + grad.biases))
    for p, m, v, g in params:
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


@dataclass
class LossHistory:
    iterations: list = field(default_factory=list)
    totals: list = field(default_factory=list)
    terms: dict = field(default_factory=dict)      # name -> list of values
    taus: list = field(default_factory=list)

    def record(self, iteration, total, terms, tau_value):
        self.iterations.append(int(iteration))
        self.totals.append(float(total))
        self.taus.append(float(tau_value))
        for k, v in terms.items():
            self.terms.setdefault(k, []).append(float(v))

    def to_dict(self):
        return {"iterations": self.iterations, "totals": self.totals,
                "terms": self.terms, "taus": self.taus}


def _config_hash(config: TrainConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fit(cloud: PointCloud, net: SineNetwork, config: TrainConfig,
        callback=None, already_normalized: bool = False):
    """Train the network on a point cloud; returns (net, LossHistory).

    The cloud is normalized to [-1, 1]^d internally (unless
    already_normalized) and the transform is stored on the network. A fixed
    seed gives identical histories and final parameters across runs.
    """
    if already_normalized:
        norm_cloud = cloud
    else:
        norm_cloud, tf = normalize(cloud)
        net.transform = tf
    if norm_cloud.dim != net.input_dim:
        raise ValueError(f"cloud dim {norm_cloud.dim} != network dim {net.input_dim}")

    tree = KdTree(norm_cloud.points)
    sigmas = compute_sigmas(norm_cloud, k=config.k_neighbors, tree=tree)
    schedule = config.schedule()
    rng = np.random.default_rng(config.seed)
    state = AdamState(net)
    history = LossHistory()

    for it in range(config.iters):
        batch = draw_batch(norm_cloud, sigmas, batch_size=config.batch_size, rng=rng)
        tau_value = schedule(it)
        try:
            total, grad, terms = loss_and_grad(net, batch, config.loss, tau_value)
        except Exception as exc:
            raise RuntimeError(f"iteration {it}: {exc}") from exc
        adam_step(net, grad, state, config.learning_rate,
                  config.beta1, config.beta2, config.eps)
        if it % config.log_every == 0 or it == config.iters - 1:
            history.record(it, total, terms, tau_value)
            if callback is not None:
                callback(it, total, terms)
        if (config.checkpoint_every and config.checkpoint_path
                and (it + 1) % config.checkpoint_every == 0):
            _write_checkpoint(net, config, history, it + 1)

    if config.checkpoint_path:
        _write_checkpoint(net, config, history, config.iters)
    return net, history


def _write_checkpoint(net, config, history, iteration):
    save_model(net, config.checkpoint_path)
    sidecar = {
        "iteration": iteration,
        "config_hash": _config_hash(config),
        "history": history.to_dict(),
    }
    with open(str(config.checkpoint_path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1)
