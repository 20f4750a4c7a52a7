"""Gauss-Legendre quadrature for the rectangular radiating surface.

Nodes and weights on [-1, 1] are found by Newton iteration on the Legendre
polynomial; the tensor product over both axes turns every surface integral in
the package into a weighted dot product over grid samples.
"""

from __future__ import annotations

import numpy as np

NEWTON_TOL = 1e-14
_MAX_NEWTON_STEPS = 100


def legendre_nodes_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the `order`-point Gauss-Legendre rule on [-1, 1].

    Roots are computed for one half of the axis and mirrored exactly, so node
    pairs are bitwise negations of each other and weights of a pair are equal.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    n = order
    nodes = np.empty(n)
    weights = np.empty(n)
    for k in range((n + 1) // 2):
        # Tricomi-style initial guess for the k-th root (descending order).
        x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
        for _ in range(_MAX_NEWTON_STEPS):
            p, dp = _legendre_and_derivative(n, x)
            dx = p / dp
            x -= dx
            if abs(dx) <= NEWTON_TOL:
                break
        else:
            raise RuntimeError(f"Newton iteration stalled for order-{n} rule")
        _, dp = _legendre_and_derivative(n, x)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
        nodes[k] = -x
        nodes[n - 1 - k] = x
        weights[k] = w
        weights[n - 1 - k] = w
    if n % 2 == 1:
        nodes[n // 2] = 0.0
    return nodes, weights


def _legendre_and_derivative(n: int, x: float) -> tuple[float, float]:
    """Evaluate P_n(x) and P_n'(x) via the three-term recurrence."""
    p_prev, p = 1.0, x
    for m in range(2, n + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def interval_rule(order: int, half_length: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule mapped to [-half_length, half_length]."""
    x, w = legendre_nodes_weights(order)
    return x * half_length, w * half_length
