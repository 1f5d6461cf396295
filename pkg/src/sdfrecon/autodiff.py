"""Exact parameter gradients of losses that depend on f, grad f, and the
Hessian of f at sampled points.

The forward pass (network.SineNetwork.forward with trace=True) propagates
jets (value, gradient, Hessian) through the layers; this module runs the
matching reverse pass, carrying adjoints for all three jet components.
Determinant derivatives go through the adjugate, which stays finite at
singular matrices. L1-style terms use sign(.) with sign(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossConfig, LossError, SMOOTH_KINDS
from .network import SineNetwork

__all__ = ["ParamGradient", "det_batch", "adjugate_batch", "det_and_derivative",
           "backward", "loss_and_grad"]


class ParamGradient:
    """Per-layer gradient arrays mirroring SineNetwork parameter shapes."""

    def __init__(self, weights, biases):
        self.weights = weights
        self.biases = biases

    @classmethod
    def zeros_like(cls, net: SineNetwork):
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def add_(self, other, scale=1.0):
        for w, ow in zip(self.weights, other.weights):
            w += scale * ow
        for b, ob in zip(self.biases, other.biases):
            b += scale * ob
        return self

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.weights + self.biases)


# ---------------------------------------------------------------------------
# determinants


def det_batch(H: np.ndarray) -> np.ndarray:
    """Determinants of a (n, d, d) stack by cofactor expansion, d <= 3."""
    d = H.shape[-1]
    if d == 1:
        return H[:, 0, 0].copy()
    if d == 2:
        return H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
    if d == 3:
        return (H[:, 0, 0] * (H[:, 1, 1] * H[:, 2, 2] - H[:, 1, 2] * H[:, 2, 1])
                - H[:, 0, 1] * (H[:, 1, 0] * H[:, 2, 2] - H[:, 1, 2] * H[:, 2, 0])
                + H[:, 0, 2] * (H[:, 1, 0] * H[:, 2, 1] - H[:, 1, 1] * H[:, 2, 0]))
    raise ValueError(f"det_batch supports d <= 3, got {d}")


def adjugate_batch(H: np.ndarray) -> np.ndarray:
    """d(det)/dH for a (n, d, d) stack: the cofactor matrix (adjugate
    transposed), well defined even when H is singular."""
    n, d, _ = H.shape
    C = np.empty_like(H)
    if d == 1:
        C[:] = 1.0
        return C
    if d == 2:
        C[:, 0, 0] = H[:, 1, 1]
        C[:, 0, 1] = -H[:, 1, 0]
        C[:, 1, 0] = -H[:, 0, 1]
        C[:, 1, 1] = H[:, 0, 0]
        return C
    if d == 3:
        for i in range(3):
            for j in range(3):
                r = [a for a in range(3) if a != i]
                c = [a for a in range(3) if a != j]
                minor = (H[:, r[0], c[0]] * H[:, r[1], c[1]]
                         - H[:, r[0], c[1]] * H[:, r[1], c[0]])
                C[:, i, j] = ((-1.0) ** (i + j)) * minor
        return C
    raise ValueError(f"adjugate_batch supports d <= 3, got {d}")


def det_and_derivative(H: np.ndarray):
    """(det H, d det / dH) for one d x d matrix, d <= 3."""
    H = np.asarray(H, dtype=np.float64)
    if not np.isfinite(H).all():
        raise ValueError("non-finite Hessian entries")
    Hb = H[None, :, :]
    return float(det_batch(Hb)[0]), adjugate_batch(Hb)[0]


# ---------------------------------------------------------------------------
# reverse pass


def backward(net: SineNetwork, trace, fbar=None, gbar=None, Hbar=None) -> ParamGradient:
    """Accumulate d(sum_n fbar_n f_n + <gbar, g> + <Hbar, H>)/d(parameters).

    fbar: (n,), gbar: (n, d), Hbar: (n, d, d); any may be None (treated as
    zero). The trace must come from a forward pass of high enough order.
    """
    n, d = trace.x.shape
    order = trace.order
    grad = ParamGradient.zeros_like(net)

    a_out = trace.a[-1]
    ga_out = trace.ga[-1]
    Ha_out = trace.Ha[-1]
    Wo = net.weights[-1]

    # output layer f = a Wo^T + bo
    if fbar is not None:
        grad.weights[-1][0] += fbar @ a_out
        grad.biases[-1][0] += fbar.sum()
    if gbar is not None:
        if order < 1:
            raise ValueError("gradient adjoint needs a trace of order >= 1")
        grad.weights[-1][0] += gbar.reshape(n * d) @ ga_out.reshape(n * d, -1)
    if Hbar is not None:
        if order < 2:
            raise ValueError("Hessian adjoint needs a trace of order >= 2")
        grad.weights[-1][0] += Hbar.reshape(n * d * d) @ Ha_out.reshape(n * d * d, -1)

    # adjoints of the last hidden activation jets
    abar = fbar[:, None] * Wo[0][None, :] if fbar is not None else None
    gabar = gbar[:, :, None] * Wo[0][None, None, :] if gbar is not None else None
    Habar = Hbar[:, :, :, None] * Wo[0][None, None, None, :] if Hbar is not None else None

    for li in range(net.hidden_layers - 1, -1, -1):
        W = net.weights[li]
        a_in = trace.a[li]
        ga_in = trace.ga[li]
        Ha_in = trace.Ha[li]
        gz = trace.gz[li]
        Hz = trace.Hz[li]
        s1 = trace.s1[li]
        s2 = trace.s2[li]
        s3 = trace.s3[li]

        # activation backward: outputs were
        #   a' = s(z), ga' = s1 gz, Ha' = s1 Hz + s2 gz gz^T
        w_out = s1.shape[1]
        zbar = np.zeros_like(s1)
        gzbar = None
        Hzbar = None
        if abar is not None:
            zbar += abar * s1
        if gabar is not None:
            zbar += s2 * (gabar * gz).sum(axis=1)
            gzbar = s1[:, None, :] * gabar
        if Habar is not None:
            zbar += s2 * (Habar * Hz).reshape(n, d * d, w_out).sum(axis=1)
            tmp = (Habar * gz[:, :, None, :]).sum(axis=1)     # (n, q, w)
            zbar += s3 * (tmp * gz).sum(axis=1)
            sym = Habar + np.swapaxes(Habar, 1, 2)
            extra = s2[:, None, :] * (sym * gz[:, None, :, :]).sum(axis=2)
            gzbar = extra if gzbar is None else gzbar + extra
            Hzbar = s1[:, None, None, :] * Habar

        # linear backward: z = a_in W^T + b
        grad.biases[li] += zbar.sum(axis=0)
        grad.weights[li] += zbar.T @ a_in
        if gzbar is not None:
            if li == 0:
                # ga at the input is the identity: gz = W^T broadcast
                grad.weights[li] += gzbar.sum(axis=0).T
            else:
                grad.weights[li] += gzbar.reshape(n * d, w_out).T @ ga_in.reshape(n * d, -1)
        if Hzbar is not None and li > 0:
            grad.weights[li] += (Hzbar.reshape(n * d * d, w_out).T
                                 @ Ha_in.reshape(n * d * d, -1))

        if li == 0:
            break
        abar = zbar @ W
        gabar = ((gzbar.reshape(n * d, w_out) @ W).reshape(n, d, -1)
                 if gzbar is not None else None)
        Habar = ((Hzbar.reshape(n * d * d, w_out) @ W).reshape(n, d, d, -1)
                 if Hzbar is not None else None)

    return grad


# ---------------------------------------------------------------------------
# loss adjoints


def _sign0(x):
    return np.sign(x)


def _term_orders(config: LossConfig, has_normals: bool):
    """Required jet order per sample set for the active terms."""
    p_order, near_order, far_order = 0, 0, 0
    if config.eikonal_mode in ("relaxed_on_P", "exact_on_P"):
        p_order = max(p_order, 1)
    else:  # exact_on_all over P union Q_far
        p_order = max(p_order, 1)
        far_order = max(far_order, 1)
    if config.neumann_weight > 0 and has_normals:
        p_order = max(p_order, 1)
    if config.regularizer == "singular_hessian":
        near_order = 2
    elif config.regularizer == "dirichlet":
        p_order = max(p_order, 1)
        far_order = max(far_order, 1)
    elif config.regularizer in ("hessian_l2", "hessian_l1", "laplacian"):
        p_order = 2
        far_order = 2
    return p_order, near_order, far_order


def loss_and_grad(net: SineNetwork, batch, config: LossConfig, tau_value: float):
    """Total loss, exact parameter gradient, and per-term breakdown.

    batch: sampler.SampleBatch. Returns (loss, ParamGradient, terms) where
    terms maps name -> unweighted value; the weighted sum (with tau on the
    regularizer slot) equals the returned loss.
    """
    if not (0 < tau_value <= 1):
        raise LossError(f"tau must lie in (0, 1], got {tau_value}")
    P = batch.surface_points
    near = batch.near_points
    far = batch.far_points
    if len(P) == 0 or len(far) == 0:
        raise LossError("batch must contain surface and far points")
    if config.regularizer == "singular_hessian" and len(near) == 0:
        raise LossError("singular-Hessian term needs near points")
    has_normals = batch.surface_normals is not None and config.neumann_weight > 0

    p_order, near_order, far_order = _term_orders(config, has_normals)
    n_p, n_far = len(P), len(far)

    fP, gP, HP, trP = net.forward(P, order=p_order, trace=True)
    ffar, gfar, Hfar, trfar = net.forward(far, order=far_order, trace=True)
    fnear = gnear = Hnear = trnear = None
    if config.regularizer == "singular_hessian":
        fnear, gnear, Hnear, trnear = net.forward(near, order=2, trace=True)

    terms = {}
    fbarP = np.zeros(n_p)
    gbarP = np.zeros_like(gP) if gP is not None else None
    HbarP = np.zeros_like(HP) if HP is not None else None
    fbarF = np.zeros(n_far)
    gbarF = np.zeros_like(gfar) if gfar is not None else None
    HbarF = np.zeros_like(Hfar) if Hfar is not None else None
    HbarN = np.zeros_like(Hnear) if Hnear is not None else None

    # manifold: mean |f| over P
    terms["manifold"] = float(np.mean(np.abs(fP)))
    fbarP += config.lambda_manifold * _sign0(fP) / n_p

    # non-manifold: mean exp(-alpha |f|) over Q_far
    e = np.exp(-config.alpha * np.abs(ffar))
    terms["non_manifold"] = float(np.mean(e))
    fbarF += config.lambda_non_manifold * (-config.alpha) * _sign0(ffar) * e / n_far

    # Eikonal term
    w_eik = config.lambda_eikonal_relax
    if config.eikonal_mode == "relaxed_on_P":
        norms = np.linalg.norm(gP, axis=1)
        active = (config.sigma_min - norms) > 0
        terms["eikonal"] = float(np.mean(np.maximum(0.0, config.sigma_min - norms)))
        safe = np.where(norms > 0, norms, 1.0)
        gbarP += w_eik * (-(active / safe))[:, None] * gP / n_p
    elif config.eikonal_mode == "exact_on_P":
        norms = np.linalg.norm(gP, axis=1)
        terms["eikonal"] = float(np.mean(np.abs(norms - 1.0)))
        safe = np.where(norms > 0, norms, 1.0)
        coef = np.where(norms > 0, _sign0(norms - 1.0) / safe, 0.0)
        gbarP += w_eik * coef[:, None] * gP / n_p
    else:  # exact_on_all: mean over P union Q_far
        n_all = n_p + n_far
        normsP = np.linalg.norm(gP, axis=1)
        normsF = np.linalg.norm(gfar, axis=1)
        terms["eikonal"] = float((np.sum(np.abs(normsP - 1.0))
                                  + np.sum(np.abs(normsF - 1.0))) / n_all)
        safeP = np.where(normsP > 0, normsP, 1.0)
        safeF = np.where(normsF > 0, normsF, 1.0)
        gbarP += w_eik * np.where(normsP > 0, _sign0(normsP - 1.0) / safeP, 0.0)[:, None] * gP / n_all
        gbarF += w_eik * np.where(normsF > 0, _sign0(normsF - 1.0) / safeF, 0.0)[:, None] * gfar / n_all

    # regularizer slot (scaled by tau)
    w_reg = config.lambda_singular_hessian * tau_value
    if config.regularizer == "singular_hessian":
        dets = det_batch(Hnear)
        terms["regularizer"] = float(np.mean(np.abs(dets)))
        HbarN += w_reg * _sign0(dets)[:, None, None] * adjugate_batch(Hnear) / len(near)
    elif config.regularizer == "dirichlet":
        sqP = 0.5 * np.sum(gP ** 2, axis=1)
        sqF = 0.5 * np.sum(gfar ** 2, axis=1)
        n_all = n_p + n_far
        terms["regularizer"] = float((sqP.sum() + sqF.sum()) / n_all)
        gbarP += w_reg * gP / n_all
        gbarF += w_reg * gfar / n_all
    elif config.regularizer == "hessian_l2":
        n_all = n_p + n_far
        terms["regularizer"] = float((np.sum(HP ** 2) + np.sum(Hfar ** 2)) / n_all)
        HbarP += w_reg * 2.0 * HP / n_all
        HbarF += w_reg * 2.0 * Hfar / n_all
    elif config.regularizer == "hessian_l1":
        n_all = n_p + n_far
        terms["regularizer"] = float((np.sum(np.abs(HP)) + np.sum(np.abs(Hfar))) / n_all)
        HbarP += w_reg * _sign0(HP) / n_all
        HbarF += w_reg * _sign0(Hfar) / n_all
    elif config.regularizer == "laplacian":
        n_all = n_p + n_far
        trP_v = np.trace(HP, axis1=1, axis2=2)
        trF_v = np.trace(Hfar, axis1=1, axis2=2)
        d = P.shape[1]
        eye = np.eye(d)
        if config.laplacian_squared:
            terms["regularizer"] = float((np.sum(trP_v ** 2) + np.sum(trF_v ** 2)) / n_all)
            HbarP += w_reg * 2.0 * trP_v[:, None, None] * eye / n_all
            HbarF += w_reg * 2.0 * trF_v[:, None, None] * eye / n_all
        else:
            terms["regularizer"] = float((np.sum(np.abs(trP_v)) + np.sum(np.abs(trF_v))) / n_all)
            HbarP += w_reg * _sign0(trP_v)[:, None, None] * eye / n_all
            HbarF += w_reg * _sign0(trF_v)[:, None, None] * eye / n_all

    # Neumann (oriented clouds only): 1 - cos(grad, n). The raw inner
    # product is unbounded below, so the normalized form is used.
    if has_normals:
        nrm = batch.surface_normals
        gnorm = np.linalg.norm(gP, axis=1)
        safe = np.where(gnorm > 0, gnorm, 1.0)
        dot = np.sum(gP * nrm, axis=1)
        cos = np.where(gnorm > 0, dot / safe, 0.0)
        terms["neumann"] = float(np.mean(1.0 - cos))
        dcos = (nrm * safe[:, None] ** 2 - dot[:, None] * gP) / safe[:, None] ** 3
        gbarP += config.neumann_weight * (-np.where(gnorm[:, None] > 0, dcos, 0.0)) / n_p

    grad = backward(net, trP, fbar=fbarP, gbar=gbarP, Hbar=HbarP)
    grad.add_(backward(net, trfar, fbar=fbarF, gbar=gbarF, Hbar=HbarF))
    if HbarN is not None:
        grad.add_(backward(net, trnear, fbar=None, gbar=None, Hbar=HbarN))

    from .losses import total_loss
    total = total_loss(terms, config, tau_value)
    if not np.isfinite(total):
        bad = [k for k, v in terms.items() if not np.isfinite(v)]
        raise LossError(f"non-finite loss; offending terms: {bad or ['total']}")
    if not grad.is_finite():
        raise LossError("non-finite parameter gradient")
    return total, grad, terms
