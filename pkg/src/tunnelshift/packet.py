"""Gaussian initial pulses.

Momentum integrals follow the unnormalized convention
Psi(x, t) = int A(p - p0) exp(ipx - ip**2 t/2) dp, so the position-space
norm of the packet equals 2*pi * int |A|**2 dp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianPacket",
    "complex_width",
    "free_density",
    "free_envelope",
    "free_envelope_dx",
    "momentum_amplitude",
]


@dataclass(frozen=True)
class GaussianPacket:
    """Gaussian of spatial width ``sigma`` and mean momentum ``p0``, centred at x = 0, t = 0."""

    sigma: float
    p0: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not math.isfinite(self.p0):
            raise ValueError(f"p0 must be finite, got {self.p0}")

    @property
    def momentum_width(self) -> float:
        """2/sigma, the 1/e half-width of A(p - p0)."""
        return 2.0 / self.sigma


def complex_width(t, pk: GaussianPacket):
    """sigma_t**2 = sigma**2 + 2it."""
    return pk.sigma ** 2 + 2j * np.asarray(t, dtype=float)


def momentum_amplitude(p, pk: GaussianPacket):
    """A(p - p0) = sigma**(1/2) (2 pi)**(-3/4) exp(-(p - p0)**2 sigma**2 / 4)."""
    q = np.asarray(p, dtype=float) - pk.p0
    return math.sqrt(pk.sigma) / (2.0 * math.pi) ** 0.75 * np.exp(-0.25 * (q * pk.sigma) ** 2)


def _prefactor(st2):
    # (2 sigma**2 / (pi sigma_t**4))**(1/4) on the branch continuous from t = 0
    return (2.0 / math.pi) ** 0.25 / np.sqrt(st2)


def free_envelope(z, t, pk: GaussianPacket):
    """Freely propagated envelope G0(z, t) = [2 sigma**2/(pi sigma_t**4)]**(1/4) exp(-(z - p0 t)**2/sigma_t**2).

    ``z`` may be complex; the expression is entire in z.
    """
    st2 = complex_width(t, pk)
    u = np.asarray(z) - pk.p0 * np.asarray(t, dtype=float)
    return math.sqrt(pk.sigma) * _prefactor(st2) * np.exp(-(u * u) / st2)


def free_envelope_dx(z, t, pk: GaussianPacket):
    """Analytic derivative dG0/dz."""
    st2 = complex_width(t, pk)
    u = np.asarray(z) - pk.p0 * np.asarray(t, dtype=float)
    return -2.0 * u / st2 * free_envelope(z, t, pk)


def free_density(x, t, pk: GaussianPacket):
    """|G0(x, t)|**2 for real x.

    Gaussian in x with exp(-2 (x - p0 t)**2 / w**2), w**2 = (sigma**4 + 4 t**2) / sigma**2.
    """
    g = free_envelope(np.asarray(x, dtype=float), t, pk)
    return g.real ** 2 + g.imag ** 2
