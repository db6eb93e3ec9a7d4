from __future__ import annotations

import math

import numpy as np
import pytest

from tunnelshift.barrier import Barrier, ShiftEstimate, TransmissionUnderflow
from tunnelshift.dad import barrier_dad, default_x_guard
from tunnelshift.grids import UniformGrid
from tunnelshift.packet import GaussianPacket, free_envelope, free_envelope_dx
from tunnelshift.transmit import (
    QuadratureDecayError,
    convolution_reconstruct,
    convolve_dad,
    envelope_from_wavefunction,
    high_barrier_pulse,
    momentum_window,
    pde_oracle,
    spread_width,
    transmitted_envelope,
    wide_barrier_pulse,
)


def _grid_around(centre, half, n=801):
    return UniformGrid.from_bounds(centre - half, centre + half, n)


def test_spread_width():
    pk = GaussianPacket(2.0, 1.0)
    assert spread_width(pk, 0.0) == pytest.approx(2.0)
    assert spread_width(pk, 3.0) == pytest.approx(math.sqrt((16 + 36) / 4))


@pytest.mark.parametrize("mode", ["absolute", "ratio"])
def test_empty_barrier_gives_free_envelope(mode):
    pk = GaussianPacket(3.0, 1.2)
    t = 15.0
    g = _grid_around(pk.p0 * t, 6 * spread_width(pk, t))
    pulse = transmitted_envelope(Barrier(0.0, 1.0), pk, t, g, mode=mode)
    assert np.max(np.abs(pulse.values - free_envelope(g.points, t, pk))) < 1e-8


@pytest.mark.parametrize("t", [10.0, 40.0])
def test_complex_shift_commutes_with_propagation(t):
    """T = exp(-i alpha p) with complex alpha moves G0 to the complex point x - alpha."""
    alpha = 3.0 + 1.5j
    pk = GaussianPacket(4.0, 0.8)
    g = _grid_around(pk.p0 * t + alpha.real, 5 * spread_width(pk, t))
    pulse = transmitted_envelope(lambda p: -1j * alpha * p, pk, t, g, mode="ratio")
    exact = free_envelope(g.points - alpha, t, pk)
    assert np.max(np.abs(pulse.values - exact)) < 1e-9 * np.max(np.abs(exact))
    shifted = wide_barrier_pulse(ShiftEstimate(alpha, 0j), pk, t, g, mode="ratio")
    assert np.allclose(shifted.values, exact, rtol=0, atol=1e-14)


def test_real_shift_is_a_translated_copy():
    pk = GaussianPacket(2.0, 1.0)
    g = _grid_around(10.0, 10.0)
    a = wide_barrier_pulse(ShiftEstimate(2.5 + 0j, 0j), pk, 5.0, g, mode="absolute")
    # the envelope picks up the carrier phase exp(-i p0 alpha)
    expect = np.exp(-2.5j * pk.p0) * free_envelope(g.points - 2.5, 5.0, pk)
    assert np.allclose(a.values, expect, atol=1e-15)


def test_high_barrier_pulse_form():
    b = Barrier(50.0, 1.0)
    pk = GaussianPacket(5.0, 2.0)
    t = 20.0
    g = _grid_around(pk.p0 * t, 30.0)
    r = high_barrier_pulse(b, pk, t, g, mode="ratio")
    z = g.points - b.width
    expect = free_envelope(z, t, pk) - 1j * free_envelope_dx(z, t, pk) / pk.p0
    assert np.allclose(r.values, expect, atol=1e-15)
    a = high_barrier_pulse(b, pk, t, g, mode="absolute")
    assert np.allclose(a.values, r.values * np.exp(r.log_reference), atol=1e-300)
    with pytest.raises(ValueError):
        high_barrier_pulse(b, GaussianPacket(5.0, 0.0), t, g)
    with pytest.raises(TransmissionUnderflow):
        high_barrier_pulse(Barrier(2e6, 1.0), pk, t, g, mode="absolute")


def test_mode_and_decay_errors():
    b = Barrier.from_beta(20)
    pk = GaussianPacket(5.0, 0.4 * b.threshold)
    g = _grid_around(20.0, 5.0, 11)
    with pytest.raises(ValueError, match="mode"):
        transmitted_envelope(b, pk, 10.0, g, mode="relative")
    with pytest.raises(QuadratureDecayError):
        transmitted_envelope(b, pk, 10.0, g, q_range=(-0.01, 0.01))
    opaque = Barrier.from_beta(2000, width=1.0)
    with pytest.raises(TransmissionUnderflow):
        transmitted_envelope(opaque, GaussianPacket(5.0, 0.4 * opaque.threshold), 10.0, g,
                             mode="absolute")


def test_momentum_window_contains_peak():
    b = Barrier.from_beta(20)
    pk = GaussianPacket(5.0, 0.4 * b.threshold)
    lo, hi = momentum_window(b, pk)
    assert lo < 0 < hi
    # filtering pushes the transmitted distribution to higher momenta
    assert hi > -lo


def test_routes_agree_beta20():
    b = Barrier.from_beta(20)
    p0 = 1.1 * b.threshold
    pk = GaussianPacket(5.0, p0)
    t = 60.0 / p0
    g = _grid_around(p0 * t, 4 * spread_width(pk, t), 201)
    m = transmitted_envelope(b, pk, t, g, mode="ratio")
    dad = barrier_dad(b, p0)
    c = convolution_reconstruct(dad, pk, t, g, mode="ratio")
    assert np.max(np.abs(m.values - c.values)) < 1e-6
    with pytest.raises(ValueError):
        convolution_reconstruct(dad, GaussianPacket(5.0, 1.0), t, g)


def test_workers_do_not_change_output():
    b = Barrier.from_beta(20)
    pk = GaussianPacket(5.0, 0.4 * b.threshold)
    t = 100.0
    g = _grid_around(pk.p0 * t, 40.0, 3001)
    one = transmitted_envelope(b, pk, t, g, workers=1).values
    four = transmitted_envelope(b, pk, t, g, workers=4).values
    assert np.array_equal(one, four)


def _bump(y, lo, hi):
    s = (2 * y - lo - hi) / (hi - lo)
    return np.where(np.abs(s) < 1, (1 - s * s) ** 4, 0.0).astype(complex)


def test_output_ignores_input_behind_the_front():
    """Changing G only for arguments below x0 leaves the output for x > x0 unchanged."""
    b = Barrier.from_beta(20)
    p0 = 1.1 * b.threshold
    dad = barrier_dad(b, p0)
    guard = default_x_guard(dad.kernel)
    x0 = 5.0
    pk = GaussianPacket(2.0, p0)
    g0 = lambda z: free_envelope(z, 0.0, pk)
    g1 = lambda z: g0(z) + _bump(z, x0 - 4.0, x0 - 0.5)
    g = UniformGrid.from_bounds(-2.0, 12.0, 281)
    diff = np.abs(convolve_dad(dad, g1, g) - convolve_dad(dad, g0, g))
    behind = diff[g.points < x0 - 1.0].max()
    ahead = diff[g.points > x0 + guard].max()
    assert behind > 0.1
    assert ahead < 1e-3 * behind


def test_envelope_from_wavefunction_strips_carrier():
    from tunnelshift.grids import SampledComplexFunction
    pk = GaussianPacket(1.0, 3.0)
    g = UniformGrid.from_bounds(-5, 25, 301)
    t = 4.0
    env = free_envelope(g.points, t, pk)
    psi = env * np.exp(1j * pk.p0 * g.points - 0.5j * pk.p0 ** 2 * t)
    back = envelope_from_wavefunction(SampledComplexFunction(g, psi), pk.p0, t)
    assert np.allclose(back.values, env, atol=1e-14)


def test_grid_oracle_free_packet():
    pk = GaussianPacket(1.0, 2.0)
    b = Barrier(0.0, 1.0, offset=4.0)
    t = 3.0
    psi = pde_oracle(b, pk, t, dx=0.01, dt=0.002)
    env = envelope_from_wavefunction(psi, pk.p0, t)
    exact = free_envelope(psi.x, t, pk)
    assert np.max(np.abs(env.values - exact)) < 1e-4
    assert abs(psi.meta["norm_final"] - psi.meta["norm_initial"]) < 1e-10
    assert psi.meta["norm_initial"] == pytest.approx(1.0, abs=1e-10)


def test_grid_oracle_rejects_close_barrier():
    with pytest.raises(ValueError):
        pde_oracle(Barrier(1.0, 1.0, offset=1.0), GaussianPacket(1.0, 1.0), 1.0)


def test_dad_acts_as_a_complex_shift_as_d_grows():
    """Convolving eta with G0 approaches G0(x - alpha) at fixed sigma/d."""
    from tunnelshift.analysis import shape_error
    from tunnelshift.barrier import wide_barrier_params
    errs = []
    for beta in (12.0, 16.0, 20.0, 24.0):
        b = Barrier.from_beta(beta, height=0.5)
        pk = GaussianPacket(b.width, 0.5)
        shift = wide_barrier_params(pk.p0, b)
        t = (18 * pk.sigma + b.width) / pk.p0
        w = spread_width(pk, t)
        c = pk.p0 * t + b.width + 2 * t * shift.alpha.imag / pk.sigma ** 2
        g = UniformGrid.from_bounds(c - 4 * w, c + 4 * w, 401)
        conv = convolution_reconstruct(barrier_dad(b, pk.p0), pk, t, g)
        errs.append(shape_error(conv, wide_barrier_pulse(shift, pk, t, g)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
