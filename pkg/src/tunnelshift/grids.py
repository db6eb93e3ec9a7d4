"""Uniform grids and sampled complex functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MomentumGrid", "SampledComplexFunction", "UniformGrid"]


@dataclass(frozen=True)
class UniformGrid:
    """``n`` points ``start + j*step``."""

    start: float
    step: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs n >= 2, got {self.n}")
        if not self.step > 0.0:
            raise ValueError(f"grid step must be > 0, got {self.step}")

    @classmethod
    def from_bounds(cls, lo: float, hi: float, n: int) -> "UniformGrid":
        if not hi > lo:
            raise ValueError(f"need hi > lo, got [{lo}, {hi}]")
        return cls(float(lo), (hi - lo) / (n - 1), int(n))

    @classmethod
    def around(cls, center: float, half_width: float, step: float) -> "UniformGrid":
        m = int(np.ceil(half_width / step))
        return cls(float(center - m * step), float(step), 2 * m + 1)

    @property
    def stop(self) -> float:
        return self.start + (self.n - 1) * self.step

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n)


@dataclass(frozen=True)
class MomentumGrid(UniformGrid):
    """Uniform momentum grid on [p_min, p_max] (both ends included)."""

    @classmethod
    def symmetric(cls, p_max: float, n: int) -> "MomentumGrid":
        return cls(-float(p_max), 2.0 * p_max / (n - 1), int(n))

    @property
    def p_min(self) -> float:
        return self.start

    @property
    def p_max(self) -> float:
        return self.stop

    @property
    def is_symmetric(self) -> bool:
        return abs(self.p_min + self.p_max) <= 1e-12 * self.p_max

    def reciprocal(self) -> UniformGrid:
        """Position grid paired with this grid by the discrete Fourier transform.

        Spacing 2*pi/(n*dp); index n//2 sits at x = 0.
        """
        dx = 2.0 * np.pi / (self.n * self.step)
        return UniformGrid(-(self.n // 2) * dx, dx, self.n)


@dataclass(frozen=True)
class SampledComplexFunction:
    grid: UniformGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} samples, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points
