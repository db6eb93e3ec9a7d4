"""Central finite differences with Richardson extrapolation."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "DerivativeConvergenceError",
    "bell_ratios",
    "central_derivative",
    "log_derivatives",
    "richardson",
]


class DerivativeConvergenceError(ArithmeticError):
    """Richardson extrapolation did not settle within tolerance."""


@lru_cache(maxsize=None)
def _central_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the narrowest second-order central stencil."""
    m = (order + 1) // 2
    offsets = np.arange(-m, m + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(2 * m + 1)
    rhs[order] = math.factorial(order)
    return offsets, np.linalg.solve(vander, rhs)


def central_derivative(f: Callable[[np.ndarray], np.ndarray], x0: float, order: int,
                       step: float, levels: int = 4, rtol: float = 1e-6,
                       atol: float = 0.0) -> tuple[complex, float]:
    """``order``-th derivative of f at x0.

    The stencil is applied with steps step, step/2, ..., step/2**(levels-1) and
    Richardson-extrapolated.  Raises :class:`DerivativeConvergenceError` when
    the last two extrapolants differ by more than rtol*|value| + atol.
    """
    offsets, weights = _central_weights(order)
    estimates = []
    for level in range(levels):
        h = step / 2 ** level
        values = np.asarray(f(x0 + offsets * h))
        estimates.append(np.dot(weights, values) / h ** order)
    value, err = richardson(estimates)
    if err > 0.0 and not err <= rtol * abs(value) + atol:
        raise DerivativeConvergenceError(
            f"order-{order} derivative at {x0:.6g} did not converge "
            f"(estimate {value:.6g}, change {err:.3g}, step {step:.3g})")
    return value, err


def richardson(estimates) -> tuple[complex, float]:
    """Eliminate h**2, h**4, ... from central-difference estimates at steps h, h/2, h/4, ...

    Returns the extrapolated value and the change from the previous diagonal
    entry, used as the error estimate.
    """
    table = [complex(v) for v in estimates]
    diag = [table[-1]]
    level = 0
    while len(table) > 1:
        level += 1
        factor = 4.0 ** level
        table = [(factor * table[i + 1] - table[i]) / (factor - 1.0)
                 for i in range(len(table) - 1)]
        diag.append(table[-1])
    err = abs(diag[-1] - diag[-2]) if len(diag) > 1 else float("inf")
    return diag[-1], err


def log_derivatives(log_f: Callable[[np.ndarray], np.ndarray], x0: float, max_order: int,
                    base_step: float, levels: int = 4, rtol: float = 1e-6
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives 1..max_order of a complex log-function at x0.

    The imaginary part of ``log_f`` is made continuous across each stencil
    before differencing.  Orders above one try steps base_step * 2**k,
    k = 0..2(order-1), and keep the one whose Richardson table settles best
    against rtol*|value| plus a round-off floor: round-off grows like
    step**-order, so fixed steps fail for high orders.
    """
    center = complex(np.asarray(log_f(np.array([x0])))[0])

    def unwrapped(xs):
        vals = np.asarray(log_f(xs), dtype=complex)
        jumps = np.round((vals.imag - center.imag) / (2.0 * np.pi))
        return vals - 2j * np.pi * jumps

    derivs = np.zeros(max_order, dtype=complex)
    errors = np.zeros(max_order)
    for order in range(1, max_order + 1):
        best = None
        for k in range(2 * order - 1):
            step = base_step * 2.0 ** k
            value, err = central_derivative(unwrapped, x0, order, step,
                                            levels=levels, rtol=np.inf)
            # round-off floor: ~1e-13 relative noise in log f, amplified by step**-order
            atol = 1e-13 * (abs(center) + 1.0) / step ** order
            score = err / (rtol * abs(value) + atol) if err > 0.0 else 0.0
            if best is None or score < best[2]:
                best = (value, err, score, step)
        value, err, score, step = best
        if not score <= 1.0:
            raise DerivativeConvergenceError(
                f"order-{order} derivative of log f at {x0:.6g} did not converge "
                f"(estimate {value:.6g}, change {err:.3g}, best step {step:.3g})")
        derivs[order - 1], errors[order - 1] = value, err
    return derivs, errors


def bell_ratios(log_derivs) -> np.ndarray:
    """f^(n)/f for n = 0..K from the derivatives of log f (complete Bell polynomials)."""
    g = np.asarray(log_derivs, dtype=complex)
    K = len(g)
    y = np.zeros(K + 1, dtype=complex)
    y[0] = 1.0
    for n in range(K):
        y[n + 1] = sum(math.comb(n, k) * y[n - k] * g[k] for k in range(n + 1))
    return y
