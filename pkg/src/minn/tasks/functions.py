"""Continuous test functions with analytic gradients."""

from __future__ import annotations

import numpy as np


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("test functions need a non-empty vector")
    return x


def levy(x) -> np.ndarray:
    """Levy-type function; global minimum 0 at ``x = (1, ..., 1)``.

    Works on the last axis, so ``x`` may be a batch of points.
    """
    x = _as_points(x)
    first = np.sin(np.pi * x[..., 0]) ** 2
    head = x[..., :-1]
    mid = ((head - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * head + 1.0) ** 2)).sum(axis=-1)
    last = x[..., -1]
    tail = (last - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * last) ** 2)
    return first + mid + tail


def levy_grad(x) -> np.ndarray:
    x = _as_points(x)
    g = np.zeros_like(x)
    g[..., 0] += np.pi * np.sin(2.0 * np.pi * x[..., 0])
    head = x[..., :-1]
    g[..., :-1] += 2.0 * (head - 1.0) * (1.0 + 10.0 * np.sin(np.pi * head + 1.0) ** 2)
    g[..., :-1] += (head - 1.0) ** 2 * 10.0 * np.pi * np.sin(2.0 * (np.pi * head + 1.0))
    last = x[..., -1]
    g[..., -1] += 2.0 * (last - 1.0) * (1.0 + np.sin(2.0 * np.pi * last) ** 2)
    g[..., -1] += (last - 1.0) ** 2 * 2.0 * np.pi * np.sin(4.0 * np.pi * last)
    return g


def ackley(x) -> np.ndarray:
    """Ackley function; global minimum 0 at the origin."""
    x = _as_points(x)
    n = x.shape[-1]
    r = np.sqrt((x**2).sum(axis=-1) / n)
    m = np.cos(2.0 * np.pi * x).sum(axis=-1) / n
    return -20.0 * np.exp(-0.2 * r) - np.exp(m) + 20.0 + np.e


def ackley_grad(x) -> np.ndarray:
    """Gradient of :func:`ackley` (the zero subgradient at the origin)."""
    x = _as_points(x)
    n = x.shape[-1]
    r = np.sqrt((x**2).sum(axis=-1, keepdims=True) / n)
    m = np.cos(2.0 * np.pi * x).sum(axis=-1, keepdims=True) / n
    safe_r = np.where(r > 0, r, 1.0)
    radial = np.where(r > 0, 4.0 * np.exp(-0.2 * r) * x / (n * safe_r), 0.0)
    return radial + 2.0 * np.pi * np.exp(m) * np.sin(2.0 * np.pi * x) / n


FUNCTIONS = {
    "levy": (levy, levy_grad),
    "ackley": (ackley, ackley_grad),
}
