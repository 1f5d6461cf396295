"""Built-in analytic fields with exact jets, used as training-free oracles."""

from __future__ import annotations

import numpy as np

from .network import Jet

__all__ = ["SphereField", "CircleField", "TorusField", "builtin_field"]


class AnalyticField:
    input_dim = 3
    transform = None

    def forward(self, xs, order=2, trace=False):
        raise NotImplementedError

    def forward_jet(self, x) -> Jet:
        f, g, H = self.forward(np.asarray(x, dtype=np.float64)[None, :], order=2)
        return Jet(value=float(f[0]), grad=g[0], hess=H[0])

    def __call__(self, xs):
        return self.forward(xs, order=0)[0]


class SphereField(AnalyticField):
    """f(x) = |x - c| - r, the exact SDF of a sphere (or circle for d=2)."""

    def __init__(self, radius=0.5, center=None, dim=3):
        self.input_dim = dim
        self.radius = float(radius)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=np.float64)

    def forward(self, xs, order=2, trace=False):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        rel = xs - self.center
        r = np.linalg.norm(rel, axis=1)
        f = r - self.radius
        g = H = None
        if order >= 1:
            safe = np.where(r > 0, r, 1.0)
            g = rel / safe[:, None]
        if order >= 2:
            d = xs.shape[1]
            # H = (I - g g^T) / r; eigenvalue 0 along the gradient
            outer = g[:, :, None] * g[:, None, :]
            H = (np.eye(d)[None, :, :] - outer) / np.where(r > 0, r, 1.0)[:, None, None]
        return f, g, H


class CircleField(SphereField):
    def __init__(self, radius=0.5, center=None):
        super().__init__(radius=radius, center=center, dim=2)


class TorusField(AnalyticField):
    """Exact SDF of a torus around the z axis: major radius R, tube radius r."""

    def __init__(self, major=0.6, minor=0.25):
        self.major = float(major)
        self.minor = float(minor)

    def forward(self, xs, order=2, trace=False):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        x, y, z = xs[:, 0], xs[:, 1], xs[:, 2]
        rho = np.sqrt(x * x + y * y)
        q = np.stack([rho - self.major, z], axis=1)
        qn = np.linalg.norm(q, axis=1)
        f = qn - self.minor
        g = H = None
        if order >= 1 or order >= 2:
            eps = 1e-300
            rho_s = np.maximum(rho, eps)
            qn_s = np.maximum(qn, eps)
            a = (rho - self.major) / qn_s        # df/drho
            g = np.stack([a * x / rho_s, a * y / rho_s, z / qn_s], axis=1)
        if order >= 2:
            # assembled from d(rho)/dx and second derivatives of the 2D
            # profile sqrt((rho-R)^2 + z^2)
            n = len(xs)
            H = np.zeros((n, 3, 3))
            u = x / rho_s
            v = y / rho_s
            b = z / qn_s
            drho = np.stack([u, v, np.zeros_like(u)], axis=1)
            dz = np.array([0.0, 0.0, 1.0])
            # profile derivatives: p = qn, dp/drho = a, dp/dz = b
            p_rr = b * b / qn_s
            p_rz = -a * b / qn_s
            p_zz = a * a / qn_s
            # Hessian of rho in xy
            Hrho = np.zeros((n, 3, 3))
            Hrho[:, 0, 0] = v * v / rho_s
            Hrho[:, 1, 1] = u * u / rho_s
            Hrho[:, 0, 1] = Hrho[:, 1, 0] = -u * v / rho_s
            H += p_rr[:, None, None] * drho[:, :, None] * drho[:, None, :]
            H += p_rz[:, None, None] * (drho[:, :, None] * dz[None, None, :]
                                        + dz[None, :, None] * drho[:, None, :])
            H += p_zz[:, None, None] * dz[None, :, None] * dz[None, None, :]
            H += a[:, None, None] * Hrho
        return f, g, H


def builtin_field(name: str, dim: int = 3) -> AnalyticField:
    name = name.lower()
    if name == "sphere":
        return SphereField(radius=0.5, dim=3)
    if name == "circle":
        return CircleField(radius=0.5)
    if name == "torus":
        return TorusField()
    raise ValueError(f"unknown builtin field {name!r} (sphere, circle, torus)")
