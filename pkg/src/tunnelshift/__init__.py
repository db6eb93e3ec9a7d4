"""Wavepacket tunnelling through a rectangular barrier.

Transmission amplitudes, the delay amplitude distribution, transmitted
pulses by independent routes, and the diagnostics built on them.
Units are hbar = mu = 1.
"""

from __future__ import annotations

from .analysis import (
    DelayTimes,
    TrajectoryFit,
    delay_times,
    delta_p0,
    peak_position,
    peak_trajectory,
    shape_error,
    superosc_band,
    transmitted_mean_momentum,
    unwrapped_phase,
)
from .barrier import (
    Barrier,
    SeriesDivergence,
    ShiftEstimate,
    TransmissionUnderflow,
    high_barrier_approx,
    log_transmission,
    transmission,
    transmission_log,
    transmission_series,
    wavenumber,
    wide_barrier_params,
)
from .dad import (
    DelayAmplitudeDistribution,
    MomentSet,
    Window,
    barrier_dad,
    causality_residual,
    dad_from_xi,
    moments_derivative,
    moments_direct,
    normalization_check,
    reference_grid,
    xi_smooth,
)
from .grids import MomentumGrid, SampledComplexFunction, UniformGrid
from .packet import GaussianPacket, free_density, free_envelope, momentum_amplitude
from .transmit import (
    TransmittedPulse,
    convolution_reconstruct,
    high_barrier_pulse,
    pde_oracle,
    transmitted_envelope,
    wide_barrier_pulse,
)

__version__ = "0.1.0"

__all__ = [
    "Barrier",
    "DelayAmplitudeDistribution",
    "DelayTimes",
    "GaussianPacket",
    "MomentSet",
    "MomentumGrid",
    "SampledComplexFunction",
    "SeriesDivergence",
    "ShiftEstimate",
    "TrajectoryFit",
    "TransmissionUnderflow",
    "TransmittedPulse",
    "UniformGrid",
    "Window",
    "barrier_dad",
    "causality_residual",
    "convolution_reconstruct",
    "dad_from_xi",
    "delay_times",
    "delta_p0",
    "free_density",
    "free_envelope",
    "high_barrier_approx",
    "high_barrier_pulse",
    "log_transmission",
    "moments_derivative",
    "moments_direct",
    "momentum_amplitude",
    "normalization_check",
    "pde_oracle",
    "peak_position",
    "peak_trajectory",
    "reference_grid",
    "shape_error",
    "superosc_band",
    "transmission",
    "transmission_log",
    "transmission_series",
    "transmitted_envelope",
    "transmitted_mean_momentum",
    "unwrapped_phase",
    "wavenumber",
    "wide_barrier_params",
    "wide_barrier_pulse",
    "xi_smooth",
]
