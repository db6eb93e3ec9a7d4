"""Delay amplitude distribution (DAD) of a transmission amplitude.

The DAD eta(x, p0) = exp(-i p0 x) xi(x) / T(p0) is built from the Fourier
transform xi(x) = (2 pi)**-1 int T(p) exp(ipx) dp.  Because T(p) -> 1 for
|p| -> inf, xi carries a delta(x) that is handled analytically: only
T(p) - 1, tapered at the grid edges, is transformed numerically.

All phases exp(i p_j x_m) between grid momenta and grid positions are
reduced with integer arithmetic, so that large p*x products do not lose
digits.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barrier import Barrier, log_transmission, transmission
from .derivatives import bell_ratios, log_derivatives
from .grids import MomentumGrid, SampledComplexFunction

__all__ = [
    "DelayAmplitudeDistribution",
    "MomentSet",
    "CancellationWarning",
    "TailWarning",
    "Window",
    "barrier_dad",
    "barrier_xi",
    "causality_residual",
    "dad_from_xi",
    "default_x_guard",
    "moments_derivative",
    "moments_direct",
    "normalization_check",
    "normalization_diagnostics",
    "reference_grid",
    "xi_smooth",
]

LOGGER = logging.getLogger(__name__)

REFERENCE_N = 2 ** 16
REFERENCE_PMAX_FACTOR = 40.0
# x_guard in units of the position spacing 2*pi/p_range
X_GUARD_CELLS = 32
_TINY = 1e-300


class TailWarning(RuntimeWarning):
    """A quadrature integrand has not decayed at the edge of its grid."""


class CancellationWarning(RuntimeWarning):
    """A sum lost most of its digits to cancellation between large terms."""


@dataclass(frozen=True)
class Window:
    """Taper applied to T(p) - 1 before transforming.

    ``kind`` is "raised-cosine" or "none"; ``fraction`` is the share of each
    half of a symmetric grid covered by the taper.
    """

    kind: str = "raised-cosine"
    fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in ("raised-cosine", "none"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.kind != "none" and not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"window fraction must be in (0, 1], got {self.fraction}")

    def weights(self, grid: MomentumGrid) -> np.ndarray:
        n = grid.n
        if self.kind == "none":
            return np.ones(n)
        # distance from the nearest edge, in cells; symmetric by construction
        j = np.arange(n)
        edge = np.minimum(j, n - 1 - j).astype(float)
        taper = self.fraction * (n - 1) / 2.0
        w = np.ones(n)
        inside = edge < taper
        w[inside] = 0.5 * (1.0 - np.cos(np.pi * edge[inside] / taper))
        return w

    def describe(self) -> str:
        if self.kind == "none":
            return "none"
        return f"{self.kind}(outer {self.fraction:g} of each half-grid)"


@dataclass(frozen=True)
class DelayAmplitudeDistribution:
    """eta(x, p0) = singular_weight * delta(x) + smooth(x).

    ``kernel`` holds exp(-i p0 x) xi_smooth(x), i.e. smooth(x) * T(p0); the
    scale factor 1/T(p0) is kept as a logarithm so that opaque barriers do
    not overflow.
    """

    p0: float
    log_T_p0: complex
    kernel: SampledComplexFunction
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def T_p0(self) -> complex:
        return complex(np.exp(self.log_T_p0))

    @property
    def singular_weight(self) -> complex:
        return complex(np.exp(-self.log_T_p0))

    @property
    def smooth(self) -> SampledComplexFunction:
        return SampledComplexFunction(self.kernel.grid,
                                      self.kernel.values * self.singular_weight)


@dataclass(frozen=True)
class MomentSet:
    """Moments xbar^n = int x^n eta(x) dx for n = 0..K."""

    values: np.ndarray
    p0: float
    errors: np.ndarray
    method: str

    def __getitem__(self, n: int) -> complex:
        return complex(self.values[n])

    def __len__(self) -> int:
        return len(self.values)


def reference_grid(b: Barrier, p0: float | None = None, scale: int = 1,
                   extent: int = 1, pmax_factor: float = REFERENCE_PMAX_FACTOR
                   ) -> MomentumGrid:
    """Symmetric grid p in [-40 sqrt(2W), 40 sqrt(2W)] with 2**16 points, times ``scale``.

    ``scale`` multiplies both p_max and the point count (finer x, same x
    window); ``extent`` multiplies only the point count, widening the x window
    that the DAD tail has to decay within.  ``pmax_factor`` replaces the 40:
    x**n-weighted sums (direct moments) do better on a narrower p range with
    many more points, because T has structure of width ~1/(2 beta d) at the
    barrier top whose transform decays slowly in x.

    With ``p0`` given, p_max is nudged (by less than one spacing) so that p0
    falls on a grid node; the DAD normalization and moments then reduce to
    exact discrete transforms instead of off-node interpolation.
    """
    s = b.threshold if b.height > 0.0 else 1.0 / b.width
    p_max = pmax_factor * s * scale
    n = REFERENCE_N * scale * extent
    if p0 is not None and p0 != 0.0:
        if abs(p0) >= p_max:
            raise ValueError(f"p0 = {p0} lies outside the reference grid (p_max = {p_max})")
        j = round((p0 + p_max) * (n - 1) / (2.0 * p_max))
        p_max = p0 / (2.0 * j / (n - 1) - 1.0)
    return MomentumGrid.symmetric(p_max, n)


def _node_index(grid: MomentumGrid, p: float) -> int | None:
    j = round((p - grid.p_min) / grid.step)
    if 0 <= j < grid.n and abs(grid.p_min + j * grid.step - p) <= 1e-9 * grid.step:
        return j
    return None


def _twiddle(numerators, denominator):
    """exp(i pi * numerators / denominator) with the numerators reduced exactly."""
    reduced = np.mod(numerators, 2 * denominator).astype(float)
    return np.exp(1j * np.pi * reduced / denominator)


def _position_phase(grid: MomentumGrid, p: float) -> np.ndarray:
    """exp(i p x_m) on the reciprocal position grid, exact when p is a grid node."""
    xgrid = grid.reciprocal()
    m = np.arange(grid.n, dtype=np.int64)
    j = _node_index(grid, p)
    if grid.is_symmetric and j is not None:
        # p_j x_m = pi/n * (2j - n + 1) * (m - n//2)
        prod = (2 * j - grid.n + 1) * (m - grid.n // 2)
        return _twiddle(prod, grid.n)
    return np.exp(1j * p * xgrid.points)


def _transform(f: np.ndarray, grid: MomentumGrid) -> np.ndarray:
    """(dp / 2 pi) sum_j f_j exp(i p_j x_m) on a symmetric grid."""
    n = grid.n
    h = n // 2
    j = np.arange(n, dtype=np.int64)
    m = np.arange(n, dtype=np.int64)
    # p_j x_m = pi/n * (2j - (n-1)) (m - h) = 2pi jm/n - 2pi jh/n - pi (n-1) m/n + pi (n-1) h/n
    pre = _twiddle(-2 * j * h, n)
    post = _twiddle(-(n - 1) * m, n) * _twiddle(np.int64((n - 1) * h), n)
    return grid.step / (2.0 * math.pi) * n * post * np.fft.ifft(f * pre)


def xi_smooth(T: Callable[[np.ndarray], np.ndarray], grid: MomentumGrid,
              window: Window | None = None, decay_tol: float = 1e-6
              ) -> SampledComplexFunction:
    """Regular part of xi(x) = (2 pi)**-1 int T(p) exp(ipx) dp.

    Transforms (T(p) - 1) * window(p) and returns it on ``grid.reciprocal()``.

    Raises
    ------
    ValueError
        If the grid is not symmetric about 0, or if the tapered integrand
        |(T - 1) w| at the grid ends exceeds ``decay_tol``.
    """
    if not grid.is_symmetric:
        raise ValueError("xi_smooth needs a grid symmetric about p = 0")
    window = window or Window()
    p = grid.points
    t_minus_1 = np.asarray(T(p), dtype=complex) - 1.0
    w = window.weights(grid)
    f = t_minus_1 * w
    raw_edge = float(max(abs(t_minus_1[0]), abs(t_minus_1[-1])))
    edge = float(max(abs(f[0]), abs(f[-1])))
    if edge > decay_tol:
        raise ValueError(
            f"T(p) - 1 has not decayed at the grid edge: |T(p_max) - 1| = {raw_edge:.3e}, "
            f"after window {edge:.3e} > {decay_tol:g}")
    meta = {
        "p_grid": grid,
        "window": window.describe(),
        "edge_abs_T_minus_1": raw_edge,
    }
    return SampledComplexFunction(grid.reciprocal(), _transform(f, grid), meta)


def barrier_xi(b: Barrier, grid: MomentumGrid | None = None, window: Window | None = None,
               decay_tol: float = 1e-6) -> SampledComplexFunction:
    grid = grid or reference_grid(b)
    return xi_smooth(lambda p: transmission(p, b, allow_underflow=True), grid,
                     window, decay_tol)


def dad_from_xi(xi: SampledComplexFunction, p0: float, T_p0: complex | None = None,
                *, log_T_p0: complex | None = None) -> DelayAmplitudeDistribution:
    """eta(x, p0) from the regular part of xi.

    Give either ``T_p0`` or, for amplitudes too small for a double,
    ``log_T_p0``.
    """
    if log_T_p0 is None:
        if T_p0 is None:
            raise ValueError("dad_from_xi needs T_p0 or log_T_p0")
        if abs(T_p0) < _TINY:
            raise ValueError(
                f"|T(p0)| = {abs(T_p0):.3g} is below the underflow guard; pass log_T_p0")
        log_T_p0 = complex(np.log(complex(T_p0)))
    grid = xi.meta.get("p_grid")
    if grid is not None:
        phase = np.conj(_position_phase(grid, p0))
    else:
        phase = np.exp(-1j * p0 * xi.x)
    kernel = SampledComplexFunction(xi.grid, phase * xi.values)
    meta = dict(xi.meta)
    meta["p0_on_node"] = grid is not None and _node_index(grid, p0) is not None
    return DelayAmplitudeDistribution(float(p0), complex(log_T_p0), kernel, meta)


def barrier_dad(b: Barrier, p0: float, grid: MomentumGrid | None = None,
                window: Window | None = None) -> DelayAmplitudeDistribution:
    """DAD of a rectangular barrier on the (p0-aligned) reference grid."""
    grid = grid or reference_grid(b, p0)
    xi = barrier_xi(b, grid, window)
    return dad_from_xi(xi, p0, log_T_p0=complex(log_transmission(p0, b)))


def normalization_check(dad: DelayAmplitudeDistribution) -> complex:
    """singular_weight + int smooth dx; tends to 1 under grid refinement.

    The quadrature is the trapezoidal rule over one period of the sampled
    (periodic) kernel.
    """
    dx = dad.kernel.grid.step
    integral = np.sum(dad.kernel.values) * dx
    return complex(np.exp(-dad.log_T_p0) * (1.0 + integral))


def normalization_diagnostics(dad: DelayAmplitudeDistribution) -> dict:
    """Both candidate delta weights: 1/T(p0) (used) and the unit weight."""
    dx = dad.kernel.grid.step
    smooth_integral = np.exp(-dad.log_T_p0) * np.sum(dad.kernel.values) * dx
    return {
        "singular_weight": dad.singular_weight,
        "smooth_integral": complex(smooth_integral),
        "norm_with_weight_1_over_T": complex(dad.singular_weight + smooth_integral),
        "norm_with_unit_weight": complex(1.0 + smooth_integral),
    }


def default_x_guard(xi: SampledComplexFunction) -> float:
    return X_GUARD_CELLS * xi.grid.step


def causality_residual(xi: SampledComplexFunction, x_guard: float | None = None) -> float:
    """max |xi(x > x_guard)| / max |xi|; close to 1 for an advanced (anti-causal) kernel."""
    if x_guard is None:
        x_guard = default_x_guard(xi)
        LOGGER.debug("causality_residual: x_guard = %g", x_guard)
    mag = np.abs(xi.values)
    peak = mag.max()
    if peak == 0.0:
        return 0.0
    ahead = mag[xi.x > x_guard]
    return float(ahead.max() / peak) if ahead.size else 0.0


def moments_derivative(T: Barrier | Callable[[np.ndarray], np.ndarray], p0: float, K: int,
                       step: float | None = None, levels: int = 4,
                       rtol: float = 1e-6) -> MomentSet:
    """xbar^n = i**n T^(n)(p0)/T(p0), n = 0..K, by differentiating log T.

    ``T`` is a barrier or a callable returning log T(p) (complex).  The base
    step is 1e-3 * max(1, |p0|).
    """
    if not 0 <= K <= 6:
        raise ValueError(f"K must be in 0..6, got {K}")
    log_t = (lambda p: log_transmission(p, T)) if isinstance(T, Barrier) else T
    values = np.zeros(K + 1, dtype=complex)
    values[0] = 1.0
    errors = np.zeros(K + 1)
    if K:
        h = step if step is not None else 1e-3 * max(1.0, abs(p0))
        derivs, errs = log_derivatives(log_t, p0, K, h, levels=levels, rtol=rtol)
        ratios = bell_ratios(derivs)
        values = (1j ** np.arange(K + 1)) * ratios
        values[0] = 1.0
        errors[1:] = errs
    return MomentSet(values, float(p0), errors, "derivative")


def moments_direct(dad: DelayAmplitudeDistribution, K: int,
                   tail_tol: float = 1e-8, cancel_tol: float = 1e-2) -> MomentSet:
    """int x^n eta(x) dx for n = 0..K by quadrature over the sampled kernel.

    The delta term only contributes to n = 0.  Warns with :class:`TailWarning`
    when |x^K kernel| at the grid edges exceeds ``tail_tol`` of its maximum.

    The kernel is scaled by 1/T(p0), so for tunnelling momenta the sums cancel
    heavily.  ``errors`` holds the round-off floor eps/|T(p0)| sum |x^n kernel| dx;
    a :class:`CancellationWarning` is issued where it exceeds ``cancel_tol``
    times the moment.
    """
    x = dad.kernel.x
    dx = dad.kernel.grid.step
    kern = dad.kernel.values
    scale = np.exp(-dad.log_T_p0)
    values = np.zeros(K + 1, dtype=complex)
    floors = np.zeros(K + 1)
    values[0] = normalization_check(dad)
    abs_scale = float(np.exp(-dad.log_T_p0.real))
    eps = np.finfo(float).eps
    floors[0] = eps * (abs_scale + abs_scale * float(np.sum(np.abs(kern))) * dx)
    for n in range(1, K + 1):
        xn = x ** n
        values[n] = scale * np.sum(xn * kern) * dx
        floors[n] = eps * abs_scale * float(np.sum(np.abs(xn * kern))) * dx
    weighted = np.abs(x ** K * kern)
    edge = max(weighted[: dad.kernel.grid.n // 100 + 1].max(),
               weighted[-(dad.kernel.grid.n // 100 + 1):].max())
    if weighted.max() > 0 and edge > tail_tol * weighted.max():
        warnings.warn(
            f"DAD tail not decayed at the grid edge (|x^{K} eta| edge/max = "
            f"{edge / weighted.max():.2e}); moments may be aliased", TailWarning,
            stacklevel=2)
    bad = [n for n in range(K + 1) if floors[n] > cancel_tol * abs(values[n])]
    if bad:
        warnings.warn(
            f"direct moments n = {bad} are below the round-off floor set by "
            f"1/|T(p0)| = {abs_scale:.2e}; use the derivative moments",
            CancellationWarning, stacklevel=2)
    return MomentSet(values, dad.p0, floors, "direct")
