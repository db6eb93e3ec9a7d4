"""Property-based checks of the invariants of T(p) and the free packet."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tunnelshift.barrier import Barrier, transmission, transmission_series, wavenumber
from tunnelshift.packet import GaussianPacket, free_envelope, free_envelope_dx

from oracles import gaussian_norm_quad, transfer_matrix_T

heights = st.floats(0.05, 20.0)
widths = st.floats(0.1, 5.0)
momenta = st.floats(-8.0, 8.0).filter(lambda p: abs(p) > 1e-3)


@settings(max_examples=150, deadline=None)
@given(p=momenta, W=heights, d=widths, k_sign=st.sampled_from([1, -1]))
def test_either_root_of_k_gives_the_same_T(p, W, d, k_sign):
    assume(math.sqrt(2 * W) * d < 12)
    assume(abs(p * p - 2 * W) > 1e-6)
    ref = transfer_matrix_T(p, W, d, k_sign)
    assert abs(transmission(p, Barrier(W, d)) - ref) <= 1e-9 * abs(ref)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-3, 50.0), W=st.floats(0.0, 500.0), d=st.floats(0.01, 50.0))
def test_reflection_symmetry(p, W, d):
    b = Barrier(W, d)
    assume(math.sqrt(2 * W) * d < 600)
    a, c = transmission(p, b), transmission(-p, b)
    assert abs(c - a.conjugate()) <= 1e-14 * max(abs(a), 1e-300)


@settings(max_examples=300, deadline=None)
@given(p=st.floats(-100.0, 100.0), W=st.floats(0.0, 1e4), d=st.floats(1e-3, 100.0))
def test_transmission_never_exceeds_one(p, W, d):
    t = transmission(p, Barrier(W, d), allow_underflow=True)
    assert abs(t) <= 1 + 1e-12


@settings(max_examples=150, deadline=None)
@given(p=st.floats(0.05, 8.0), W=heights, d=widths)
def test_multiple_reflection_series_sums_to_T(p, W, d):
    k = wavenumber(p, W)
    ratio = abs(((p - k) / (p + k)) ** 2 * np.exp(2j * k * d))
    assume(ratio < 0.95)
    b = Barrier(W, d)
    exact = transmission(p, b, allow_underflow=True)
    assume(abs(exact) > 1e-250)
    series = transmission_series(p, b, 1500)
    assert abs(series - exact) <= 1e-10 * abs(exact)


def _numerator(z, W, d):
    # p/T(p) exp(-ipd) = p cos kd - i (p**2 - W) sin(kd)/k, entire and even in k
    k = np.sqrt(z * z - 2 * W + 0j)
    kd = k * d
    sinc = np.where(np.abs(kd) > 1e-12, np.sin(kd) / np.where(kd == 0, 1, kd), 1.0)
    return z * np.cos(kd) - 1j * (z * z - W) * d * sinc


@settings(max_examples=40, deadline=None)
@given(W=st.floats(0.1, 5.0), d=st.floats(0.2, 3.0), a=st.floats(-6.0, -0.1),
       b=st.floats(0.1, 6.0), h=st.floats(0.5, 4.0))
def test_no_poles_in_upper_half_plane(W, d, a, b, h):
    """The winding number of p/T(p) around a box above the real axis is zero."""
    eps = 0.05
    n = 4000
    s = np.linspace(0, 1, n, endpoint=False)
    path = np.concatenate([
        a + (b - a) * s + 1j * eps,
        b + 1j * (eps + (h - eps) * s),
        b - (b - a) * s + 1j * h,
        a + 1j * (h - (h - eps) * s),
    ])
    f = _numerator(path, W, d)
    assert np.min(np.abs(f)) > 0
    turns = np.sum(np.angle(np.roll(f, -1) / f)) / (2 * math.pi)
    assert round(turns) == 0


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-10, 10), y=st.floats(-3, 3), t=st.floats(0, 20),
       sigma=st.floats(0.5, 5), p0=st.floats(-3, 3))
def test_free_envelope_is_holomorphic(x, y, t, sigma, p0):
    pk = GaussianPacket(sigma, p0)
    z = complex(x, y)
    h = 1e-5
    ddx = (free_envelope(z + h, t, pk) - free_envelope(z - h, t, pk)) / (2 * h)
    ddy = (free_envelope(z + 1j * h, t, pk) - free_envelope(z - 1j * h, t, pk)) / (2 * h)
    exact = free_envelope_dx(z, t, pk)
    scale = max(abs(exact), abs(free_envelope(z, t, pk)) / sigma, 1e-200)
    assert abs(ddx - exact) <= 1e-6 * scale
    assert abs(ddy - 1j * exact) <= 1e-6 * scale


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 50), sigma=st.floats(0.5, 5), p0=st.floats(-3, 3))
def test_free_norm_is_conserved(t, sigma, p0):
    pk = GaussianPacket(sigma, p0)
    w = math.sqrt((sigma ** 4 + 4 * t * t) / sigma ** 2)
    c = p0 * t
    norm = gaussian_norm_quad(lambda x: free_envelope(x, t, pk), c - 10 * w, c + 10 * w)
    assert abs(norm - 1) < 1e-10
