"""Sinusoidal MLP representing the implicit field, with exact derivatives.

The network is evaluated as a jet: value, spatial gradient, and spatial
Hessian are propagated together layer by layer, so first and second
derivatives are analytic (no finite differencing, no autodiff framework).

Layer rule for the jet (v, g, H) of the running activation:
  linear   (v, g, H) -> (W v + b, W g, W H)
  pointwise s        -> (s(v), s'(v) g, s'(v) H + s''(v) g g^T)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import NormalizationTransform

__all__ = ["Jet", "SineNetwork", "ForwardTrace", "ModelFormatError",
           "init_network", "save_model", "load_model"]

_MAGIC = b"NSH1"
_VERSION = 1
_ACT_TAGS = {"sine": 0, "softplus": 1}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Jet:
    """Field value plus exact spatial gradient and Hessian at one point."""
    value: float
    grad: np.ndarray    # (d,)
    hess: np.ndarray    # (d, d), symmetric


@dataclass
class ForwardTrace:
    """Per-layer intermediates cached for the reverse pass."""
    x: np.ndarray
    order: int
    a: list = field(default_factory=list)      # activation values per hidden layer
    ga: list = field(default_factory=list)     # their gradients (n, d, w)
    Ha: list = field(default_factory=list)     # their Hessians (n, d, d, w)
    gz: list = field(default_factory=list)     # pre-activation gradients
    Hz: list = field(default_factory=list)     # pre-activation Hessians
    s1: list = field(default_factory=list)     # activation derivatives at z
    s2: list = field(default_factory=list)
    s3: list = field(default_factory=list)


def _sine_derivs(z, omega0, order):
    wz = omega0 * z
    s = np.sin(wz)
    c = np.cos(wz, out=wz)      # wz no longer needed
    s2 = -(omega0 ** 2) * s if order >= 1 else None
    s3 = -(omega0 ** 3) * c if order >= 2 else None
    s1 = np.multiply(c, omega0, out=c)
    return s, s1, s2, s3


def _softplus_derivs(z, beta, order):
    bz = beta * z
    # stable softplus: log(1 + e^bz) = max(bz, 0) + log1p(e^{-|bz|})
    s = (np.maximum(bz, 0.0) + np.log1p(np.exp(-np.abs(bz)))) / beta
    sig = 1.0 / (1.0 + np.exp(-bz))
    s1 = sig
    s2 = beta * sig * (1.0 - sig) if order >= 1 else None
    s3 = beta * beta * sig * (1.0 - sig) * (1.0 - 2.0 * sig) if order >= 2 else None
    return s, s1, s2, s3


class SineNetwork:
    """Plain MLP f: R^d -> R with sine (SIREN) or softplus activations.

    Parameters are float64 throughout; second-order terms are too noisy in
    float32. `transform` maps world coordinates into the normalized cube
    the network was trained in; evaluation here is always in normalized
    coordinates.
    """

    def __init__(self, input_dim, hidden_layers, width, activation="sine",
                 omega0=30.0, beta=100.0, weights=None, biases=None,
                 transform: NormalizationTransform | None = None):
        if input_dim not in (2, 3):
            raise ValueError(f"input_dim must be 2 or 3, got {input_dim}")
        if hidden_layers < 1 or width < 1:
            raise ValueError("need at least one hidden layer and positive width")
        if activation not in _ACT_TAGS:
            raise ValueError(f"unknown activation {activation!r}")
        if activation == "sine" and omega0 <= 0:
            raise ValueError("omega0 must be positive")
        self.input_dim = int(input_dim)
        self.hidden_layers = int(hidden_layers)
        self.width = int(width)
        self.activation = activation
        self.omega0 = float(omega0)
        self.beta = float(beta)
        self.transform = transform
        if weights is None:
            shapes = self.layer_shapes()
            weights = [np.zeros(s) for s, _ in shapes]
            biases = [np.zeros(s) for _, s in shapes]
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for (ws, bs), w, b in zip(self.layer_shapes(), self.weights, self.biases):
            if w.shape != ws or b.shape != bs:
                raise ValueError(f"layer shape mismatch: {w.shape} vs {ws}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite parameters")

    def layer_shapes(self):
        """[(weight shape, bias shape)] for hidden layers then the output layer."""
        shapes = [((self.width, self.input_dim), (self.width,))]
        for _ in range(self.hidden_layers - 1):
            shapes.append(((self.width, self.width), (self.width,)))
        shapes.append(((1, self.width), (1,)))
        return shapes

    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _act(self, z, order):
        if self.activation == "sine":
            return _sine_derivs(z, self.omega0, order)
        return _softplus_derivs(z, self.beta, order)

    # -- forward -----------------------------------------------------------

    def forward(self, xs, order=2, trace=False):
        """Batched jet evaluation.

        xs: (n, d). Returns (f (n,), g (n, d) or None, H (n, d, d) or None)
        and, with trace=True, the ForwardTrace needed by the reverse pass.
        order 0 = value only, 1 = value+gradient, 2 = full jet.
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if xs.shape[1] != self.input_dim:
            raise ValueError(f"expected points of dim {self.input_dim}, got {xs.shape}")
        if not np.isfinite(xs).all():
            raise ValueError("non-finite input point")
        n, d = xs.shape
        tr = ForwardTrace(x=xs, order=order)

        a = xs
        ga = None   # identity at the input; handled specially in layer 0
        Ha = None
        for li in range(self.hidden_layers):
            W, b = self.weights[li], self.biases[li]
            z = a @ W.T + b
            gz = Hz = None
            w_out = W.shape[0]
            if order >= 1:
                if li == 0:
                    gz = np.broadcast_to(W.T[None, :, :], (n, d, w_out)).copy()
                else:
                    gz = (ga.reshape(n * d, -1) @ W.T).reshape(n, d, w_out)
            if order >= 2:
                if li == 0:
                    Hz = np.zeros((n, d, d, w_out))
                else:
                    Hz = (Ha.reshape(n * d * d, -1) @ W.T).reshape(n, d, d, w_out)
            s, s1, s2, s3 = self._act(z, order)
            if trace:
                tr.a.append(a)
                tr.ga.append(ga)
                tr.Ha.append(Ha)
                tr.gz.append(gz)
                tr.Hz.append(Hz)
                tr.s1.append(s1)
                tr.s2.append(s2)
                tr.s3.append(s3)
            a = s
            if order >= 1:
                ga = s1[:, None, :] * gz
            if order >= 2:
                Ha = gz[:, :, None, :] * gz[:, None, :, :]
                Ha *= s2[:, None, None, :]
                Ha += s1[:, None, None, :] * Hz

        Wo, bo = self.weights[-1], self.biases[-1]
        f = (a @ Wo.T + bo)[:, 0]
        g = H = None
        if order >= 1:
            g = (ga.reshape(n * d, -1) @ Wo[0]).reshape(n, d)
        if order >= 2:
            H = (Ha.reshape(n * d * d, -1) @ Wo[0]).reshape(n, d, d)
        if trace:
            tr.a.append(a)
            tr.ga.append(ga)
            tr.Ha.append(Ha)
            return f, g, H, tr
        return f, g, H

    def forward_jet(self, x) -> Jet:
        """Full jet at a single point."""
        f, g, H = self.forward(np.asarray(x, dtype=np.float64)[None, :], order=2)
        return Jet(value=float(f[0]), grad=g[0], hess=H[0])

    def forward_batch(self, xs, need="jet"):
        """need in {'value', 'grad', 'jet'}; unneeded fields come back None."""
        order = {"value": 0, "grad": 1, "jet": 2}[need]
        return self.forward(xs, order=order)

    def __call__(self, xs):
        return self.forward(xs, order=0)[0]


def init_network(input_dim, hidden_layers=4, width=256, activation="sine",
                 omega0=30.0, beta=100.0, seed=0, bias_init="uniform",
                 transform: NormalizationTransform | None = None) -> SineNetwork:
    """SIREN initialization: first layer U[-1/fan_in, 1/fan_in], later layers
    U[-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0].

    bias_init: "uniform" (default) draws biases from U[-1/sqrt(fan_in),
    1/sqrt(fan_in)] as in the reference SIREN implementation; "zero" sets
    them to zero. Zero biases make a sine network an exactly odd function
    of its input, which structurally pins a spurious zero set through the
    origin when fitting centered shapes -- avoid unless reproducing that
    failure mode deliberately.

    Softplus networks use plain U[-sqrt(6/fan_in), sqrt(6/fan_in)] on every
    layer (no omega0 division, no sphere initialization).
    """
    if bias_init not in ("uniform", "zero"):
        raise ValueError(f"unknown bias_init {bias_init!r}")
    net = SineNetwork(input_dim, hidden_layers, width, activation=activation,
                      omega0=omega0, beta=beta, transform=transform)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for li, (wshape, bshape) in enumerate(net.layer_shapes()):
        fan_in = wshape[1]
        if activation == "sine":
            bound = 1.0 / fan_in if li == 0 else np.sqrt(6.0 / fan_in) / omega0
        else:
            bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=wshape))
        if bias_init == "uniform":
            bbound = 1.0 / np.sqrt(fan_in)
            biases.append(rng.uniform(-bbound, bbound, size=bshape))
        else:
            biases.append(np.zeros(bshape))
    return SineNetwork(input_dim, hidden_layers, width, activation=activation,
                       omega0=omega0, beta=beta, weights=weights, biases=biases,
                       transform=transform)


# ---------------------------------------------------------------------------
# checkpoint format: magic "NSH1", little-endian u32 version, u32 input_dim,
# u32 hidden_layers, u32 width, u32 activation tag, f64 omega0 (or beta),
# f64 center[d], f64 scale, then per-layer row-major f64 weights then biases.


def save_model(net: SineNetwork, path) -> None:
    d = net.input_dim
    tf = net.transform
    center = tf.center if tf is not None else np.zeros(d)
    scale = tf.scale if tf is not None else 1.0
    actparam = net.omega0 if net.activation == "sine" else net.beta
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIII", _VERSION, net.input_dim, net.hidden_layers,
                             net.width, _ACT_TAGS[net.activation]))
        fh.write(struct.pack("<d", actparam))
        fh.write(np.asarray(center, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", scale))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> SineNetwork:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ModelFormatError(f"{path}: bad magic {data[:4]!r}")
    off = 4
    version, input_dim, hidden_layers, width, act_tag = struct.unpack_from("<IIIII", data, off)
    off += 20
    if version != _VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    if act_tag not in _ACT_NAMES:
        raise ModelFormatError(f"{path}: unknown activation tag {act_tag}")
    (actparam,) = struct.unpack_from("<d", data, off)
    off += 8
    center = np.frombuffer(data, dtype="<f8", count=input_dim, offset=off).copy()
    off += 8 * input_dim
    (scale,) = struct.unpack_from("<d", data, off)
    off += 8
    activation = _ACT_NAMES[act_tag]
    kwargs = {"omega0": actparam} if activation == "sine" else {"beta": actparam}
    probe = SineNetwork(input_dim, hidden_layers, width, activation=activation, **kwargs)
    weights, biases = [], []
    for wshape, bshape in probe.layer_shapes():
        nw = int(np.prod(wshape))
        nb = int(np.prod(bshape))
        if off + 8 * (nw + nb) > len(data):
            raise ModelFormatError(f"{path}: truncated at byte {off}")
        weights.append(np.frombuffer(data, dtype="<f8", count=nw, offset=off)
                       .reshape(wshape).copy())
        off += 8 * nw
        biases.append(np.frombuffer(data, dtype="<f8", count=nb, offset=off)
                      .reshape(bshape).copy())
        off += 8 * nb
    transform = None
    if scale != 1.0 or np.any(center != 0.0):
        transform = NormalizationTransform(center=center, scale=scale)
    return SineNetwork(input_dim, hidden_layers, width, activation=activation,
                       weights=weights, biases=biases, transform=transform, **kwargs)
