"""Finite trigonometric expansions on one-dimensional periodic grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GraphField, PeriodicGrid

__all__ = ["TrigPoly", "random_trig_poly"]


@dataclass(frozen=True)
class TrigPoly:
    """Expansion sum_k cos_coeffs[k] cos(w_k x) + sin_coeffs[k] sin(w_k x).

    Index k is the integer harmonic; the angular wavenumber w_k = 2 pi k / L
    is fixed only once a period is supplied.
    """

    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        if len(self.cos_coeffs) != len(self.sin_coeffs):
            raise ValueError("coefficient arrays must have equal length")

    @property
    def degree(self) -> int:
        return len(self.cos_coeffs) - 1

    def values_at(self, x: np.ndarray, period: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs)):
            w = 2.0 * np.pi * k / period
            out += a * np.cos(w * x) + b * np.sin(w * x)
        return out

    def slope_at(self, x: np.ndarray, period: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs)):
            w = 2.0 * np.pi * k / period
            out += -a * w * np.sin(w * x) + b * w * np.cos(w * x)
        return out

    def heat_decayed(self, t: float, period: float) -> "TrigPoly":
        """Coefficients after time t of the linear heat equation (mode-wise decay)."""
        factors = [np.exp(-((2.0 * np.pi * k / period) ** 2) * t) for k in range(self.degree + 1)]
        return TrigPoly(
            tuple(a * f for a, f in zip(self.cos_coeffs, factors)),
            tuple(b * f for b, f in zip(self.sin_coeffs, factors)),
        )

    def sample(self, grid: PeriodicGrid) -> GraphField:
        if grid.dim != 1:
            raise ValueError("TrigPoly samples onto 1-d grids only")
        return GraphField(grid, self.values_at(grid.axis(0), grid.period[0]))

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(
            tuple(a * factor for a in self.cos_coeffs),
            tuple(b * factor for b in self.sin_coeffs),
        )


def random_trig_poly(
    rng: np.random.Generator,
    degree: int = 5,
    amplitude: float = 1.0,
    max_slope: float = 0.8,
    period: float = 2.0 * np.pi,
) -> TrigPoly:
    """Seeded random expansion rescaled to honor amplitude and slope caps.

    The slope cap keeps the tilt weight positive for the modestly slanted
    directions used in property sweeps.
    """
    cos = np.concatenate([[0.0], rng.standard_normal(degree)])
    sin = np.concatenate([[0.0], rng.standard_normal(degree)])
    poly = TrigPoly(tuple(cos), tuple(sin))
    x = np.linspace(0.0, period, 4096, endpoint=False)
    sup = float(np.max(np.abs(poly.values_at(x, period))))
    sup_slope = float(np.max(np.abs(poly.slope_at(x, period))))
    scale = min(
        amplitude / sup if sup > 0 else np.inf,
        max_slope / sup_slope if sup_slope > 0 else np.inf,
    )
    if not np.isfinite(scale):
        scale = 0.0
    return poly.scaled(scale)
