from __future__ import annotations

import math

import numpy as np
import pytest

from tunnelshift.derivatives import (
    DerivativeConvergenceError,
    bell_ratios,
    central_derivative,
    log_derivatives,
    richardson,
)
from tunnelshift.grids import MomentumGrid, SampledComplexFunction, UniformGrid


def test_uniform_grid():
    g = UniformGrid.from_bounds(-1.0, 1.0, 5)
    assert g.step == 0.5 and g.stop == 1.0
    assert np.allclose(g.points, [-1, -0.5, 0, 0.5, 1])
    a = UniformGrid.around(2.0, 1.0, 0.3)
    assert a.n % 2 == 1 and a.points[a.n // 2] == pytest.approx(2.0)
    for bad in [(0.0, 1.0, 1), (0.0, 0.0, 3), (0.0, -1.0, 3)]:
        with pytest.raises(ValueError):
            UniformGrid(*bad)
    with pytest.raises(ValueError):
        UniformGrid.from_bounds(1.0, 0.0, 3)


def test_momentum_grid_and_reciprocal():
    g = MomentumGrid.symmetric(10.0, 1025)
    assert g.is_symmetric and g.p_min == -10.0 and g.p_max == pytest.approx(10.0)
    assert g.step * (g.n - 1) == pytest.approx(g.p_max - g.p_min)
    x = g.reciprocal()
    assert x.n == g.n
    assert x.step == pytest.approx(2 * math.pi / (g.n * g.step))
    assert x.points[g.n // 2] == 0.0
    assert not MomentumGrid(-1.0, 0.1, 11).is_symmetric


def test_sampled_function_shape_check():
    g = UniformGrid(0.0, 1.0, 4)
    f = SampledComplexFunction(g, [1, 2, 3, 4])
    assert f.values.dtype == complex and np.allclose(f.x, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        SampledComplexFunction(g, [1, 2, 3])


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
def test_central_derivative_of_exponential(order):
    f = lambda x: np.exp(0.7 * x)
    step = {1: 0.05, 2: 0.1, 3: 0.2, 4: 0.4, 5: 0.6, 6: 0.8}[order]
    value, err = central_derivative(f, 0.3, order, step)
    assert value == pytest.approx(0.7 ** order * math.exp(0.21), rel=1e-8)
    assert err >= 0


def test_richardson_removes_h2():
    est = [1 + 0.5 * h ** 2 + 0.1 * h ** 4 for h in (0.1, 0.05, 0.025)]
    value, err = richardson(est)
    assert value == pytest.approx(1.0, abs=1e-12)


def test_convergence_failure_reported():
    f = lambda x: np.sin(1e4 * x)
    with pytest.raises(DerivativeConvergenceError):
        central_derivative(f, 0.1, 1, 0.5, rtol=1e-10)


def test_log_derivatives_unwraps_phase():
    # log f = 3i x, whose imaginary part wraps near x = pi/3
    log_f = lambda x: 1j * np.angle(np.exp(3j * np.asarray(x)))
    d, _ = log_derivatives(log_f, math.pi / 3, 2, 1e-3)
    assert d[0] == pytest.approx(3j, rel=1e-9)
    assert abs(d[1]) < 1e-6


def test_bell_ratios_exponential_and_polynomial():
    # f = exp(a x): f^(n)/f = a^n
    a = 0.3 - 0.2j
    y = bell_ratios([a, 0, 0, 0])
    assert np.allclose(y, a ** np.arange(5))
    # f = x**3 at x = 2: log-derivatives 3/x, -3/x**2, 6/x**3
    x = 2.0
    y = bell_ratios([3 / x, -3 / x ** 2, 6 / x ** 3])
    assert np.allclose(y, [1, 3 / x, 6 / x ** 2, 6 / x ** 3])
