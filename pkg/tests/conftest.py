"""Shared fixtures and numeric helpers for the test suite."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_diff_grad(fn, x, h=1e-4):
    """Central finite-difference gradient of a scalar function at x (1D array)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def central_diff_jacobian(fn, x, h=1e-4):
    """Central finite-difference Jacobian of a vector function at x."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def circle_points(n, radius=1.0, center=(0.0, 0.0), rng=None):
    if rng is None:
        rng = np.random.default_rng(0)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1) * radius
    return pts + np.asarray(center)


def sphere_points(n, radius=1.0, rng=None):
    if rng is None:
        rng = np.random.default_rng(0)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius
