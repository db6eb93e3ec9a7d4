"""Transmission amplitude of a rectangular barrier.

Units throughout are hbar = mu = 1, so momenta are inverse lengths and an
energy W corresponds to the threshold momentum sqrt(2W).

The exact amplitude is evaluated in the branch-free form

    T(p) = exp(-ipd) / [cos(kd) - i (p**2 - W)/p * sin(kd)/k],

which only depends on k**2 = p**2 - 2W.  Below the barrier top the cosine
and sine become cosh/sinh of kappa*d and are factored as exp(kappa*d) times an
O(1) bracket, so the log-magnitude stays finite for arbitrarily opaque
barriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Barrier",
    "SeriesDivergence",
    "ShiftEstimate",
    "TransmissionUnderflow",
    "high_barrier_approx",
    "high_barrier_approx_log",
    "log_transmission",
    "log_transmission_over_p",
    "transmission",
    "transmission_log",
    "transmission_series",
    "wavenumber",
    "wide_barrier_approx_log",
    "wide_barrier_params",
]

# exp() of anything below this underflows to zero in double precision.
_P_TINY = 1e-150
_LOG_TINY = -745.0


class TransmissionUnderflow(ArithmeticError):
    """|T| is not representable as a double; use the log-domain routines."""


class SeriesDivergence(ArithmeticError):
    """The multiple-reflection series fails the ratio test."""


@dataclass(frozen=True)
class Barrier:
    """Rectangular barrier of height ``height`` on [offset, offset + width].

    The offset never enters T(p); only the grid PDE oracle needs it.
    """

    height: float
    width: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.height >= 0.0:
            raise ValueError(f"barrier height must be >= 0, got {self.height}")
        if not self.width > 0.0:
            raise ValueError(f"barrier width must be > 0, got {self.width}")
        if not self.offset >= 0.0:
            raise ValueError(f"barrier offset must be >= 0, got {self.offset}")

    @property
    def beta(self) -> float:
        """Opacity sqrt(2W) * d."""
        return math.sqrt(2.0 * self.height) * self.width

    @property
    def threshold(self) -> float:
        """Momentum of the barrier top, sqrt(2W)."""
        return math.sqrt(2.0 * self.height)

    @classmethod
    def from_beta(cls, beta: float, *, height: float | None = None,
                  width: float | None = None, offset: float = 0.0) -> "Barrier":
        """Build a barrier of opacity ``beta`` with exactly one of height/width fixed.

        With neither given the width defaults to 1.
        """
        if height is not None and width is not None:
            raise ValueError("from_beta takes at most one of height and width")
        if not beta > 0.0:
            raise ValueError(f"beta must be > 0, got {beta}")
        if height is not None:
            return cls(height, beta / math.sqrt(2.0 * height), offset)
        if width is None:
            width = 1.0
        return cls(0.5 * (beta / width) ** 2, width, offset)


@dataclass(frozen=True)
class ShiftEstimate:
    """Complex shift and prefactor of the wide-barrier form T(p) ~ B exp(-i alpha p).

    ``log_prefactor`` is kept because |B| underflows for very wide barriers.
    """

    alpha: complex
    log_prefactor: complex

    @property
    def prefactor_B(self) -> complex:
        return complex(np.exp(self.log_prefactor))


def wavenumber(p, W):
    """Principal-branch k = (p**2 - 2W)**(1/2); purely imaginary with Im k > 0 below the top."""
    k2 = np.asarray(p, dtype=float) ** 2 - 2.0 * W
    # +0j keeps the imaginary zero positive, so sqrt picks +i*kappa
    k = np.sqrt(k2 + 0j)
    return complex(k) if np.ndim(k) == 0 else k


def _log_denominator(p, W, d, a, c):
    """log of a*cos(kd) - i*c*sin(kd)/k, with k**2 = p**2 - 2W, without overflow."""
    k2 = p * p - 2.0 * W
    above = k2 >= 0.0
    kd = np.sqrt(np.abs(k2)) * d
    out = np.empty(p.shape, dtype=complex)

    ka = kd[above]
    out[above] = np.log(a[above] * np.cos(ka)
                        - 1j * c[above] * d * np.sinc(ka / np.pi))

    below = ~above
    kb = kd[below]
    # cosh and sinh/x both carry exp(kb); sinh(x)/x * exp(-x) = -expm1(-2x)/(2x)
    with np.errstate(invalid="ignore", divide="ignore"):
        shx = np.where(kb > 0.0, -np.expm1(-2.0 * kb) / (2.0 * kb), 1.0)
    bracket = a[below] * 0.5 * (1.0 + np.exp(-2.0 * kb)) - 1j * c[below] * d * shx
    out[below] = kb + np.log(bracket)
    return out


def log_transmission(p, b: Barrier):
    """Complex log T(p); the imaginary part is -p d plus a principal angle.

    Returns -inf + 0j at p = 0 for a nonzero barrier.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    W, d = float(b.height), float(b.width)
    if W == 0.0:
        out = np.zeros(p_arr.shape, dtype=complex)
    else:
        out = np.full(p_arr.shape, -np.inf + 0j)
        nz = p_arr != 0.0
        # (p**2 - W)/p overflows for tiny p; there log T = log p + log(T/p)
        tiny = nz & (np.abs(p_arr) < _P_TINY)
        nz &= ~tiny
        pn = p_arr[nz]
        out[nz] = -1j * pn * d - _log_denominator(
            pn, W, d, np.ones_like(pn), (pn * pn - W) / pn)
        if np.any(tiny):
            out[tiny] = np.log(p_arr[tiny] + 0j) + log_transmission_over_p(p_arr[tiny], b)
    return out[0] if np.ndim(p) == 0 else out


def log_transmission_over_p(p, b: Barrier):
    """Complex log of T(p)/p, which stays regular at p = 0."""
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    W, d = float(b.height), float(b.width)
    if W == 0.0:
        with np.errstate(divide="ignore"):
            out = -np.log(p_arr + 0j)
    else:
        out = -1j * p_arr * d - _log_denominator(p_arr, W, d, p_arr, p_arr ** 2 - W)
    return out[0] if np.ndim(p) == 0 else out


def transmission(p, b: Barrier, *, allow_underflow: bool = False):
    """Exact transmission amplitude T(p) of the rectangular barrier.

    Parameters
    ----------
    p : float or array_like
        Real momentum.
    b : Barrier
    allow_underflow : bool
        If False (default) raise :class:`TransmissionUnderflow` when a nonzero
        |T| is too small for a double.  Callers that only need T - 1, or that
        multiply by something equally tiny, may pass True.
    """
    logt = np.asarray(log_transmission(p, b))
    if not allow_underflow:
        p_arr = np.asarray(p, dtype=float)
        bad = (logt.real < _LOG_TINY) & (p_arr != 0.0)
        if np.any(bad):
            worst = float(np.min(logt.real[bad]))
            raise TransmissionUnderflow(
                f"|T| = exp({worst:.1f}) underflows; use transmission_log")
    with np.errstate(under="ignore"):
        t = np.exp(logt)
    return complex(t) if np.ndim(p) == 0 else t


def transmission_log(p, b: Barrier):
    """(log|T|, arg T) with the arg continuous in p away from branch wraps.

    The phase is -p d plus a principal angle in (-pi, pi]; see
    :func:`tunnelshift.analysis.unwrapped_phase` for a grid-continuous version.
    """
    logt = log_transmission(p, b)
    return np.real(logt), np.imag(logt)


def transmission_series(p, b: Barrier, n_terms: int):
    """Partial sum of the multiple-reflection expansion of T(p).

    Factoring (k+p)**2 exp(-ikd) out of the closed-form denominator gives

        T = 4pk exp(-i(p-k)d)/(p+k)**2 * sum_n [((p-k)/(p+k))**2 exp(2ikd)]**n,

    with the principal branch of k.  Raises :class:`SeriesDivergence` where the
    ratio has modulus >= 1 (for instance p < -sqrt(2W)).
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    W, d = float(b.height), float(b.width)
    if W == 0.0:
        out = np.ones(p_arr.shape, dtype=complex)
        return out[0] if np.ndim(p) == 0 else out
    k = np.atleast_1d(wavenumber(p_arr, W))
    ratio = ((p_arr - k) / (p_arr + k)) ** 2 * np.exp(2j * k * d)
    bad = np.abs(ratio) >= 1.0
    if np.any(bad):
        raise SeriesDivergence(
            f"ratio test fails (|ratio| = {np.max(np.abs(ratio[bad])):.6g}) "
            f"at p = {p_arr[bad][0]:.6g}")
    first = 4.0 * p_arr * k * np.exp(-1j * (p_arr - k) * d) / (p_arr + k) ** 2
    total = np.zeros(p_arr.shape, dtype=complex)
    term = first.copy()
    for _ in range(n_terms):
        total += term
        term = term * ratio
    return total[0] if np.ndim(p) == 0 else total


def high_barrier_approx_log(p, b: Barrier):
    """Complex log of the high-barrier form B(W) p exp(-ipd), B(W) = -4i exp(-sqrt(2W) d)/sqrt(2W)."""
    p_arr = np.asarray(p, dtype=float)
    s = b.threshold
    with np.errstate(divide="ignore"):
        log_abs = math.log(4.0 / s) - s * b.width + np.log(np.abs(p_arr))
    phase = -0.5 * np.pi + np.where(p_arr < 0.0, np.pi, 0.0) - p_arr * b.width
    return log_abs + 1j * phase


def high_barrier_approx(p, b: Barrier):
    """B(W) p exp(-ipd); underflows quietly to 0 for very opaque barriers."""
    with np.errstate(under="ignore"):
        out = np.exp(high_barrier_approx_log(p, b))
    out = np.where(np.asarray(p) == 0.0, 0.0, out)
    return complex(out) if np.ndim(p) == 0 else out


def wide_barrier_params(p0: float, b: Barrier) -> ShiftEstimate:
    """Complex shift alpha and prefactor B of the wide-barrier approximation.

    Expanding the single-traversal exponent -i(p - k)d to first order around
    p0 gives alpha = d (1 - p0/k0) = d + i p0 d / sqrt(2W - p0**2), and

        B = 4 p0 k0 / (p0 + k0)**2 * exp(-i d (p0 - k0) + i alpha p0).
    """
    W, d = float(b.height), float(b.width)
    if not 0.0 < p0 * p0 < 2.0 * W:
        raise ValueError(
            f"wide-barrier parameters need 0 < p0**2 < 2W (p0={p0}, 2W={2 * W})")
    kappa0 = math.sqrt(2.0 * W - p0 * p0)
    k0 = 1j * kappa0
    alpha = complex(d, p0 * d / kappa0)
    # -i d (p0 - k0) + i alpha p0 collapses to a real number
    exponent = -d * (kappa0 + p0 * p0 / kappa0)
    log_b = np.log(4.0 * p0 * k0 / (p0 + k0) ** 2) + exponent
    return ShiftEstimate(alpha=alpha, log_prefactor=complex(log_b))


def wide_barrier_approx_log(p, p0: float, b: Barrier):
    """Complex log of B(p0, W) exp(-i alpha p)."""
    est = wide_barrier_params(p0, b)
    return est.log_prefactor - 1j * est.alpha * np.asarray(p, dtype=float)
