"""Observables of transmitted pulses: momentum filtering, peak trajectory, delay times."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .barrier import (
    Barrier,
    high_barrier_approx_log,
    log_transmission,
    log_transmission_over_p,
    wide_barrier_approx_log,
)
from .derivatives import central_derivative, log_derivatives
from .packet import GaussianPacket, momentum_amplitude
from .transmit import TransmittedPulse, momentum_window

__all__ = [
    "DelayTimes",
    "MultimodalPeakWarning",
    "TrajectoryFit",
    "delay_times",
    "delta_p0",
    "peak_position",
    "peak_trajectory",
    "shape_error",
    "superosc_band",
    "transmitted_mean_momentum",
    "unwrapped_phase",
]


class MultimodalPeakWarning(RuntimeWarning):
    """|G|**2 has more than one significant maximum."""


@dataclass(frozen=True)
class TrajectoryFit:
    """Least-squares line x_peak(t) = slope * t + intercept.

    ``residual`` is the RMS misfit; the standard errors follow from it.
    """

    slope: float
    intercept: float
    residual: float
    slope_stderr: float
    intercept_stderr: float
    times: np.ndarray = field(repr=False)
    peaks: np.ndarray = field(repr=False)
    multimodal: tuple[bool, ...] = ()


@dataclass(frozen=True)
class DelayTimes:
    """Complex delay tau = d/p0 - i d(ln T)/dp / p0 and its real part, the phase time."""

    tau: complex
    tau_phase: float
    phase_Phi: float


def delta_p0(b: Barrier, pk: GaussianPacket) -> float:
    """Momentum-filtering shift 2 p0 d / (sigma**2 sqrt(2W - p0**2)) = 2 Im(alpha)/sigma**2."""
    p0, W, d = pk.p0, b.height, b.width
    if not p0 * p0 < 2.0 * W:
        raise ValueError(f"momentum filtering shift needs p0**2 < 2W (p0={p0}, 2W={2 * W})")
    return 2.0 * p0 * d / (pk.sigma ** 2 * math.sqrt(2.0 * W - p0 * p0))


def transmitted_mean_momentum(b: Barrier, pk: GaussianPacket, n: int = 20001) -> float:
    """<p> over the transmitted distribution |T(p) A(p - p0)|**2 by quadrature.

    Works with log|T A| throughout so opaque barriers are fine.
    """
    lo, hi = momentum_window(b, pk, log_cut=-80.0)
    q = np.linspace(lo, hi, n)
    p = pk.p0 + q
    with np.errstate(divide="ignore"):
        log_w = 2.0 * (np.real(log_transmission(p, b)) + np.log(momentum_amplitude(p, pk)))
    w = np.exp(log_w - np.max(log_w))
    # q rather than p keeps the cancellation in <p> - p0 small
    return float(pk.p0 + np.sum(q * w) / np.sum(w))


def shape_error(exact, approx) -> float:
    """max | |exact| - |approx| | / max |exact| over a common grid."""
    a = np.abs(getattr(exact, "values", exact))
    b = np.abs(getattr(approx, "values", approx))
    return float(np.max(np.abs(a - b)) / np.max(a))


def _local_maxima(rho: np.ndarray, floor: float) -> np.ndarray:
    inner = (rho[1:-1] > rho[:-2]) & (rho[1:-1] >= rho[2:]) & (rho[1:-1] > floor)
    return np.nonzero(inner)[0] + 1


def peak_position(pulse: TransmittedPulse, floor: float = 0.1) -> tuple[float, bool]:
    """Sub-grid location of the maximum of |G|**2 and a multimodality flag.

    A parabola through log|G|**2 at the three samples around the argmax
    gives the peak; for a Gaussian this is exact.  The flag is set when
    another local maximum exceeds ``floor`` times the highest one.
    """
    rho = pulse.density
    j = int(np.argmax(rho))
    x = pulse.x
    multimodal = len(_local_maxima(rho, floor * rho[j])) > 1
    if j == 0 or j == rho.size - 1:
        raise ValueError("density maximum sits on the grid edge; widen the grid")
    y0, y1, y2 = np.log(rho[j - 1:j + 2])
    curv = y0 - 2.0 * y1 + y2
    offset = 0.5 * (y0 - y2) / curv if curv < 0.0 else 0.0
    return float(x[j] + offset * (x[1] - x[0])), multimodal


def peak_trajectory(pulses: Sequence[TransmittedPulse], floor: float = 0.1) -> TrajectoryFit:
    """Fit x = slope * t + intercept to the peaks of |G^T|**2 at five or more times."""
    if len(pulses) < 5:
        raise ValueError(f"a trajectory fit needs >= 5 times, got {len(pulses)}")
    times = np.array([pl.t for pl in pulses], dtype=float)
    found = [peak_position(pl, floor) for pl in pulses]
    peaks = np.array([f[0] for f in found])
    flags = tuple(f[1] for f in found)
    if any(flags):
        warnings.warn(f"multimodal density at t = {times[list(flags)]}",
                      MultimodalPeakWarning, stacklevel=2)
    tm = times.mean()
    dt = times - tm
    sxx = float(np.sum(dt * dt))
    slope = float(np.sum(dt * (peaks - peaks.mean())) / sxx)
    intercept = float(peaks.mean() - slope * tm)
    resid = peaks - (slope * times + intercept)
    dof = max(len(times) - 2, 1)
    s2 = float(np.sum(resid * resid) / dof)
    return TrajectoryFit(
        slope=slope,
        intercept=intercept,
        residual=math.sqrt(float(np.mean(resid * resid))),
        slope_stderr=math.sqrt(s2 / sxx),
        intercept_stderr=math.sqrt(s2 * (1.0 / len(times) + tm * tm / sxx)),
        times=times,
        peaks=peaks,
        multimodal=flags,
    )


def unwrapped_phase(p, b) -> np.ndarray:
    """arg T(p) made continuous along an increasing p grid.

    ``b`` is a barrier or a function returning complex log T.  Jumps larger
    than pi between neighbours are removed; the value at the first point is
    the principal one.
    """
    p = np.asarray(p, dtype=float)
    log_t = log_transmission(p, b) if isinstance(b, Barrier) else np.asarray(b(p))
    phase = np.angle(np.exp(1j * np.imag(log_t)))
    return np.unwrap(phase)


def delay_times(b: Barrier, p0: float, step: float | None = None, rtol: float = 1e-8
                ) -> DelayTimes:
    """Complex delay and phase time at p0.

    tau comes from the derivative of log T (the engine behind the moments);
    tau_phase = d/p0 + dPhi/dp / p0 is computed separately from the unwrapped
    phase, so Re(tau) against tau_phase is a genuine cross-check.
    """
    if not p0 > 0.0:
        raise ValueError(f"delay times need p0 > 0, got {p0}")
    h = step if step is not None else 1e-3 * max(1.0, p0)
    log_t = lambda p: np.asarray(log_transmission(np.asarray(p, dtype=float), b))
    log_t0 = complex(log_t(np.array([p0]))[0])
    if not math.isfinite(log_t0.real):
        raise ValueError("T(p0) = 0")
    (dlog,), _ = log_derivatives(log_t, p0, 1, h, rtol=rtol)
    d = b.width
    tau = complex(d / p0 - 1j * dlog / p0)

    # unwrap along a path starting at p0: stencil points are within 2h of it
    def phase_path(ps):
        ps = np.asarray(ps, dtype=float)
        out = np.empty(ps.size)
        for i, pv in enumerate(ps):
            path = np.linspace(p0, pv, 9)
            out[i] = unwrapped_phase(path, b)[-1]
        return out

    dphi, _ = central_derivative(phase_path, p0, 1, h, rtol=rtol)
    tau_phase = float(d / p0 + dphi.real / p0)
    return DelayTimes(tau=tau, tau_phase=tau_phase, phase_Phi=float(np.angle(np.exp(log_t0))))


def superosc_band(b: Barrier, pk: GaussianPacket, pgrid) -> dict[str, np.ndarray]:
    """Curves showing T(p) mimicking its high- and wide-barrier forms.

    Returns arrays keyed by

    ``p``
        the momenta,
    ``re_T_over_p``
        Re[T(p)/p] / |B(W)|,
    ``sin_minus_pd``
        sin(-pd), what the previous curve tends to as W grows,
    ``abs_A``
        |A(p - p0)| scaled to unit height,
    ``T_over_T4``
        T(p) / (B(W) p exp(-ipd)),
    ``T_over_Tq4``
        T(p) / (B exp(-i alpha p)) for a tunnelling p0, otherwise NaN.
    """
    p = np.asarray(getattr(pgrid, "points", pgrid), dtype=float)
    s = b.threshold
    log_abs_B = math.log(4.0 / s) - s * b.width
    # p = 0 gives log 0 - log 0 in the high-barrier ratio; it is masked below
    with np.errstate(under="ignore", over="ignore", invalid="ignore", divide="ignore"):
        re_t = np.real(np.exp(log_transmission_over_p(p, b) - log_abs_B))
        log_t = log_transmission(p, b)
        ratio4 = np.exp(log_t - high_barrier_approx_log(p, b))
        if 0.0 < pk.p0 ** 2 < 2.0 * b.height:
            ratio_q4 = np.exp(log_t - wide_barrier_approx_log(p, pk.p0, b))
        else:
            ratio_q4 = np.full(p.shape, np.nan + 0j)
    ratio4 = np.where(p == 0.0, np.nan + 0j, ratio4)
    amp = np.exp(-0.25 * ((p - pk.p0) * pk.sigma) ** 2)
    return {
        "p": p,
        "re_T_over_p": re_t,
        "sin_minus_pd": np.sin(-p * b.width),
        "abs_A": amp,
        "T_over_T4": ratio4,
        "T_over_Tq4": ratio_q4,
    }
