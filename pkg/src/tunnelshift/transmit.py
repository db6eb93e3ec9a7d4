"""Transmitted pulses.

The transmitted envelope G^T(x, t) (carrier exp(i p0 x - i p0**2 t/2)
removed) is produced by independent routes:

* a momentum integral of T(p) A(p - p0) over q = p - p0,
* a coordinate-space convolution of the delay amplitude distribution with
  the free envelope,
* closed-form high- and wide-barrier approximations,
* a Crank-Nicolson solution of the time-dependent Schroedinger equation.

In "ratio" mode an envelope is divided by its route's own amplitude at p0,
computed in the log domain, so that opaque barriers give O(1) numbers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

from .barrier import (
    Barrier,
    ShiftEstimate,
    TransmissionUnderflow,
    high_barrier_approx_log,
    log_transmission,
    wide_barrier_params,
)
from .dad import DelayAmplitudeDistribution
from .grids import SampledComplexFunction, UniformGrid
from .packet import GaussianPacket, free_envelope, free_envelope_dx, momentum_amplitude

__all__ = [
    "MODES",
    "NormDriftError",
    "QuadratureDecayError",
    "TransmittedPulse",
    "convolution_reconstruct",
    "convolve_dad",
    "default_offset",
    "envelope_from_wavefunction",
    "high_barrier_pulse",
    "momentum_window",
    "pde_oracle",
    "spread_width",
    "transmitted_envelope",
    "wide_barrier_pulse",
]

LOGGER = logging.getLogger(__name__)

MODES = ("absolute", "ratio")
# below this log-magnitude a double is zero
_LOG_TINY = -700.0
# integrand cut, relative to its peak, when choosing the q range
_LOG_CUT = -40.0
# complex multiplies per chunk in the direct sums
_CHUNK = 1 << 22


class QuadratureDecayError(ValueError):
    """A quadrature integrand is not negligible at the ends of its grid."""


class NormDriftError(RuntimeError):
    """The time stepper lost unitarity."""


@dataclass(frozen=True)
class TransmittedPulse:
    """Envelope of a transmitted pulse on a position grid at time ``t``.

    In ratio mode ``envelope`` holds G^T / exp(log_reference); in absolute
    mode ``log_reference`` is 0.
    """

    envelope: SampledComplexFunction
    p0: float
    t: float
    normalization_mode: str
    log_reference: complex = 0j
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def x(self) -> np.ndarray:
        return self.envelope.x

    @property
    def values(self) -> np.ndarray:
        return self.envelope.values

    @property
    def density(self) -> np.ndarray:
        v = self.envelope.values
        return v.real ** 2 + v.imag ** 2


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _run_chunks(fill: Callable[[int, int], None], n: int, rows: int, workers: int) -> None:
    """Call fill(start, stop) over fixed row blocks, optionally on threads.

    Blocks do not depend on ``workers`` and each writes its own slice, so
    the result is bitwise the same for any worker count.
    """
    blocks = [(s, min(s + rows, n)) for s in range(0, n, rows)]
    if workers <= 1 or len(blocks) < 2:
        for start, stop in blocks:
            fill(start, stop)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fill, a, z) for a, z in blocks]:
            fut.result()


def _as_grid(xgrid) -> UniformGrid:
    if isinstance(xgrid, UniformGrid):
        return xgrid
    x = np.asarray(xgrid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("xgrid must be a UniformGrid or a 1-D array of >= 2 points")
    step = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), step, rtol=1e-9, atol=0.0):
        raise ValueError("xgrid must be uniformly spaced")
    return UniformGrid(float(x[0]), float(step), int(x.size))


def _log_t_function(T) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(T, Barrier):
        return lambda p: np.asarray(log_transmission(np.asarray(p, dtype=float), T))
    return lambda p: np.asarray(T(np.asarray(p, dtype=float)), dtype=complex)


def spread_width(pk: GaussianPacket, t: float) -> float:
    """w(t) with |G0|**2 proportional to exp(-2 (x - p0 t)**2 / w**2)."""
    return math.sqrt((pk.sigma ** 4 + 4.0 * t * t) / pk.sigma ** 2)


def default_offset(pk: GaussianPacket) -> float:
    """Barrier offset used with the grid oracle: 8 sigma ahead of the packet centre."""
    return 8.0 * pk.sigma


def momentum_window(log_T, pk: GaussianPacket, log_cut: float = _LOG_CUT,
                    n_scan: int = 4001) -> tuple[float, float]:
    """q = p - p0 range outside which |T(p0+q) A(q)| is below exp(log_cut) of its peak.

    Since |T| <= 1, the integrand relative to its value at q = 0 is bounded by
    exp(-log|T(p0)| - q**2 sigma**2/4), which bounds the scan.
    """
    log_t = _log_t_function(log_T)
    log_t0 = float(np.real(log_t(np.array([pk.p0]))[0]))
    if not math.isfinite(log_t0):
        log_t0 = float(np.max(np.real(log_t(pk.p0 + np.linspace(-1, 1, 11) / pk.sigma))))
    bound = 2.0 * math.sqrt(max(-log_t0, 0.0) - log_cut) / pk.sigma
    q = np.linspace(-bound, bound, n_scan)
    with np.errstate(divide="ignore"):
        f = np.real(log_t(pk.p0 + q)) - 0.25 * (q * pk.sigma) ** 2
    keep = np.nonzero(f >= np.max(f) + log_cut)[0]
    dq = q[1] - q[0]
    return float(q[keep[0]] - 2 * dq), float(q[keep[-1]] + 2 * dq)


def transmitted_envelope(b, pk: GaussianPacket, t: float, xgrid, mode: str = "ratio",
                         q_range: tuple[float, float] | None = None,
                         dq: float | None = None, decay_tol: float = 1e-14,
                         workers: int = 1) -> TransmittedPulse:
    """Transmitted envelope from the momentum integral.

    G^T(x, t) = int T(p0 + q) A(q) exp(iq(x - p0 t) - i q**2 t/2) dq,
    evaluated by the trapezoidal rule, which is spectrally accurate here.

    Parameters
    ----------
    b : Barrier or callable
        A barrier, or a function returning complex log T(p).
    pk : GaussianPacket
    t : float
        Time; the packet should have cleared the barrier.
    xgrid : UniformGrid or array_like
    mode : {"ratio", "absolute"}
        Ratio mode divides by T(p0).
    q_range, dq : optional
        Override the automatic integration range and spacing.  The default
        spacing makes the alias period 2 pi/dq four times the reach of the
        output grid from the free peak (plus d and 12 packet widths).
    decay_tol : float
        Largest allowed |integrand| at the q-grid ends, relative to its peak.
    workers : int
        Threads for the sum over x; the output does not depend on it.
    """
    _check_mode(mode)
    grid = _as_grid(xgrid)
    log_t = _log_t_function(b)
    x = grid.points
    w = spread_width(pk, t)
    if q_range is None:
        q_range = momentum_window(b, pk)
    if dq is None:
        shift = b.width if isinstance(b, Barrier) else 0.0
        reach = float(np.max(np.abs(x - pk.p0 * t))) + abs(shift) + 12.0 * w
        dq = math.pi / (2.0 * reach)
    n_q = int(math.ceil((q_range[1] - q_range[0]) / dq)) + 1
    q = q_range[0] + dq * np.arange(n_q)

    log_t0 = complex(log_t(np.array([pk.p0]))[0])
    log_ref = log_t0 if mode == "ratio" else 0j
    if mode == "ratio" and not math.isfinite(log_t0.real):
        raise ValueError("ratio mode needs T(p0) != 0")
    with np.errstate(divide="ignore", under="ignore"):
        log_f = (log_t(pk.p0 + q) - log_ref
                 + np.log(momentum_amplitude(pk.p0 + q, pk)) - 0.5j * q * q * t)
    peak = float(np.max(log_f.real))
    if mode == "absolute" and peak < _LOG_TINY:
        raise TransmissionUnderflow(
            f"transmitted amplitude ~exp({peak:.1f}) underflows; use mode='ratio'")
    edge = max(log_f[0].real, log_f[-1].real) - peak
    if edge > math.log(decay_tol):
        raise QuadratureDecayError(
            f"|T A| at the q-grid ends is exp({edge:.1f}) of its peak (> {decay_tol:g})")
    with np.errstate(under="ignore"):
        f = np.exp(log_f)

    u = x - pk.p0 * t
    out = np.empty(x.size, dtype=complex)

    def fill(start, stop):
        phase = np.exp(1j * np.multiply.outer(u[start:stop], q))
        out[start:stop] = np.sum(phase * f, axis=1) * dq

    _run_chunks(fill, x.size, max(1, _CHUNK // n_q), workers)
    meta = {"route": "momentum", "q_min": float(q[0]), "q_max": float(q[-1]),
            "dq": float(dq), "n_q": n_q}
    return TransmittedPulse(SampledComplexFunction(grid, out), float(pk.p0), float(t),
                            mode, log_ref, meta)


def convolve_dad(dad: DelayAmplitudeDistribution, envelope: Callable[[np.ndarray], np.ndarray],
                 xgrid, support: tuple[float, float] | None = None,
                 workers: int = 1) -> np.ndarray:
    """G(x) + sum_m kernel(x_m) G(x - x_m) dx = T(p0) int eta(x') G(x - x') dx'.

    ``envelope`` is any freely propagated envelope G; ``support`` bounds the
    arguments where it is non-negligible and is used to skip kernel samples.
    """
    grid = _as_grid(xgrid)
    x = grid.points
    kx = dad.kernel.x
    kv = dad.kernel.values
    dx = dad.kernel.grid.step
    out = np.asarray(envelope(x), dtype=complex).copy()
    if support is None:
        lo_idx = np.zeros(x.size, dtype=np.int64)
        hi_idx = np.full(x.size, kx.size, dtype=np.int64)
    else:
        lo_idx = np.searchsorted(kx, x - support[1], side="left")
        hi_idx = np.searchsorted(kx, x - support[0], side="right")
    width = int(np.max(hi_idx - lo_idx)) if x.size else 0

    def fill(start, stop):
        lo = int(lo_idx[start:stop].min())
        hi = int(hi_idx[start:stop].max())
        if hi <= lo:
            return
        vals = np.asarray(envelope(np.subtract.outer(x[start:stop], kx[lo:hi])),
                          dtype=complex)
        out[start:stop] += np.sum(vals * kv[lo:hi], axis=1) * dx

    if x.size:
        _run_chunks(fill, x.size, max(1, _CHUNK // max(width, 1)), workers)
    return out


def convolution_reconstruct(dad: DelayAmplitudeDistribution, pk: GaussianPacket, t: float,
                            xgrid, mode: str = "ratio", workers: int = 1) -> TransmittedPulse:
    """Transmitted envelope as the DAD acting on the free envelope.

    G^T(x) = T(p0) [singular_weight G0(x) + int smooth(x') G0(x - x') dx'].
    The free term cancels most of the convolution for tunnelling momenta, so
    ratio mode loses roughly log10(1/|T(p0)|) digits.
    """
    _check_mode(mode)
    if dad.p0 != pk.p0:
        raise ValueError(f"DAD built for p0 = {dad.p0}, packet has p0 = {pk.p0}")
    grid = _as_grid(xgrid)
    reach = 9.0 * spread_width(pk, t)
    centre = pk.p0 * t
    values = convolve_dad(dad, lambda z: free_envelope(z, t, pk), grid,
                          support=(centre - reach, centre + reach), workers=workers)
    log_ref = 0j
    if mode == "ratio":
        if dad.log_T_p0.real < _LOG_TINY:
            raise TransmissionUnderflow(
                f"|T(p0)| = exp({dad.log_T_p0.real:.1f}); the convolution route cannot "
                "resolve the transmitted pulse")
        log_ref = dad.log_T_p0
        values = values * np.exp(-log_ref)
    meta = {"route": "convolution", "kernel_dx": dad.kernel.grid.step,
            "kernel_n": dad.kernel.grid.n}
    meta.update({k: v for k, v in dad.meta.items() if k in ("window",)})
    return TransmittedPulse(SampledComplexFunction(grid, values), float(pk.p0), float(t),
                            mode, log_ref, meta)


def high_barrier_pulse(b: Barrier, pk: GaussianPacket, t: float, xgrid,
                       mode: str = "ratio") -> TransmittedPulse:
    """Pulse for T(p) ~ B(W) p exp(-ipd): the free pulse advanced by d.

    G^T = B(W) [p0 G0(x - d) - i dG0/dx(x - d)].  Ratio mode divides by the
    approximate amplitude B(W) p0, leaving G0(x - d) - i G0'(x - d)/p0.
    """
    _check_mode(mode)
    if pk.p0 == 0.0:
        raise ValueError("the high-barrier pulse needs p0 != 0")
    grid = _as_grid(xgrid)
    z = grid.points - b.width
    values = free_envelope(z, t, pk) - 1j * free_envelope_dx(z, t, pk) / pk.p0
    log_ref = complex(high_barrier_approx_log(pk.p0, b))
    if mode == "absolute":
        if log_ref.real < _LOG_TINY:
            raise TransmissionUnderflow(
                f"B(W) p0 = exp({log_ref.real:.1f}) underflows; use mode='ratio'")
        values = values * np.exp(log_ref)
        log_ref = 0j
    return TransmittedPulse(SampledComplexFunction(grid, values), float(pk.p0), float(t),
                            mode, log_ref, {"route": "high-barrier"})


def wide_barrier_pulse(shift: ShiftEstimate | Barrier, pk: GaussianPacket, t: float, xgrid,
                       mode: str = "ratio") -> TransmittedPulse:
    """Pulse for T(p) ~ B exp(-i alpha p): the free envelope at the complex point x - alpha.

    G^T = B exp(-i p0 alpha) G0(x - alpha).  The factor exp(-i p0 alpha)
    comes from removing the carrier and equals 1 only for p0 = 0.  Ratio mode
    divides by B exp(-i p0 alpha), the approximate amplitude at p0.
    """
    _check_mode(mode)
    if isinstance(shift, Barrier):
        shift = wide_barrier_params(pk.p0, shift)
    grid = _as_grid(xgrid)
    values = free_envelope(grid.points - shift.alpha, t, pk)
    log_ref = shift.log_prefactor - 1j * shift.alpha * pk.p0
    if mode == "absolute":
        if log_ref.real < _LOG_TINY:
            raise TransmissionUnderflow(
                f"|B exp(-i p0 alpha)| = exp({log_ref.real:.1f}) underflows; use mode='ratio'")
        values = values * np.exp(log_ref)
        log_ref = 0j
    return TransmittedPulse(SampledComplexFunction(grid, values), float(pk.p0), float(t),
                            mode, complex(log_ref),
                            {"route": "wide-barrier", "alpha": complex(shift.alpha)})


def envelope_from_wavefunction(psi: SampledComplexFunction, p0: float, t: float
                               ) -> SampledComplexFunction:
    """Strip the carrier: G = psi exp(-i p0 x + i p0**2 t/2)."""
    x = psi.x
    # split the phase so that p0*x and p0**2*t/2 are reduced separately
    carrier = np.exp(-1j * p0 * x) * np.exp(0.5j * p0 * p0 * t)
    return SampledComplexFunction(psi.grid, psi.values * carrier, dict(psi.meta))


def pde_oracle(b: Barrier, pk: GaussianPacket, t_final: float, dx: float = 0.0025,
               dt: float = 0.004, bounds: tuple[float, float] | None = None,
               norm_tol: float = 1e-8) -> SampledComplexFunction:
    """psi(x, t_final) from Crank-Nicolson steps of i psi_t = -psi_xx/2 + V psi.

    The Laplacian is the 5-point fourth-order stencil, so the propagator
    (1 + i dt H/2)**-1 (1 - i dt H/2) is exactly unitary and the barrier edges
    sit halfway between grid points.  H is shifted by p0**2/2, which only
    changes a global phase but slows the phase rotation the stepper must
    follow.  The wavefunction starts as the packet centred at x = 0 and the
    barrier sits at ``b.offset``.

    Raises
    ------
    ValueError
        If the barrier is less than 4 sigma from the packet.
    NormDriftError
        If the norm changes by more than ``norm_tol`` in one step.
    """
    x0, d = b.offset, b.width
    if x0 < 4.0 * pk.sigma:
        raise ValueError(f"barrier offset {x0} must be >= 4 sigma = {4 * pk.sigma}")
    if not (dx > 0.0 and dt > 0.0 and t_final > 0.0):
        raise ValueError("dx, dt and t_final must be > 0")
    w = spread_width(pk, t_final)
    if bounds is None:
        lo = min(-8.0 * pk.sigma, 2.0 * x0 - pk.p0 * t_final - 12.0 * w)
        hi = max(x0 + d + 8.0 * pk.sigma, pk.p0 * t_final + 12.0 * w)
        bounds = (lo, hi)
    # grid points at x0 + (j + 1/2) dx so that both barrier edges fall between nodes
    j_lo = int(math.floor((bounds[0] - x0) / dx))
    j_hi = int(math.ceil((bounds[1] - x0) / dx))
    n = j_hi - j_lo + 1
    grid = UniformGrid(x0 + (j_lo + 0.5) * dx, dx, n)
    x = grid.points
    V = np.where((x > x0) & (x < x0 + d), b.height, 0.0)
    e0 = 0.5 * pk.p0 ** 2

    ones = np.ones(n)
    lap = sparse.diags([-ones[:-2] / 12, 16 * ones[:-1] / 12, -30 * ones / 12,
                        16 * ones[:-1] / 12, -ones[:-2] / 12],
                       [-2, -1, 0, 1, 2]) / dx ** 2
    H = -0.5 * lap + sparse.diags(V - e0)
    n_steps = max(1, int(round(t_final / dt)))
    step = t_final / n_steps
    eye = sparse.identity(n, format="csc")
    lhs = sparse_linalg.splu((eye + 0.5j * step * H).tocsc())
    rhs = (eye - 0.5j * step * H).tocsr()

    psi = (2.0 / (math.pi * pk.sigma ** 2)) ** 0.25 * np.exp(
        -(x / pk.sigma) ** 2 + 1j * pk.p0 * x)
    norm = float(np.sum(psi.real ** 2 + psi.imag ** 2) * dx)
    norm_start = norm
    for _ in range(n_steps):
        psi = lhs.solve(rhs @ psi)
        new = float(np.sum(psi.real ** 2 + psi.imag ** 2) * dx)
        if abs(new - norm) > norm_tol * norm_start:
            raise NormDriftError(f"norm changed by {new - norm:.3e} in one step")
        norm = new
    psi = psi * np.exp(-1j * e0 * t_final)
    meta = {"dx": dx, "dt": step, "n_steps": n_steps, "x_min": float(x[0]),
            "x_max": float(x[-1]), "norm_initial": norm_start, "norm_final": norm,
            "laplacian": "5-point, 4th order", "stepper": "Crank-Nicolson"}
    return SampledComplexFunction(grid, psi, meta)
