"""Initial-condition catalog for experiment runs."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .geometry import GraphField, PeriodicGrid
from .trigpoly import random_trig_poly

__all__ = ["INITIAL_KINDS", "build_initial"]

INITIAL_KINDS = ("sine", "product_sine", "trig_random", "affine", "constant")

RANDOM_DEGREE = 5
RANDOM_SLOPE_CAP = 0.8


def _wavenumber_angular(grid: PeriodicGrid, wavenumbers) -> list[float]:
    if len(wavenumbers) != grid.dim:
        raise ValidationError(
            f"initial.wavenumbers needs {grid.dim} entries, got {len(wavenumbers)}"
        )
    return [2.0 * np.pi * k / L for k, L in zip(wavenumbers, grid.period)]


def _random_2d(grid: PeriodicGrid, rng, amplitude: float) -> np.ndarray:
    xs = grid.coords()
    fine = PeriodicGrid(grid.period, tuple(4 * n for n in grid.points))
    fx = fine.coords()

    def synth(coords):
        total = np.zeros_like(coords[0])
        gx = np.zeros_like(coords[0])
        gy = np.zeros_like(coords[0])
        for k1 in range(RANDOM_DEGREE + 1):
            for k2 in range(RANDOM_DEGREE + 1):
                if k1 == 0 and k2 == 0:
                    continue
                a, b = coeffs[(k1, k2)]
                w1 = 2.0 * np.pi * k1 / grid.period[0]
                w2 = 2.0 * np.pi * k2 / grid.period[1]
                phase = w1 * coords[0] + w2 * coords[1]
                c, s = np.cos(phase), np.sin(phase)
                total += a * c + b * s
                gx += (-a * s + b * c) * w1
                gy += (-a * s + b * c) * w2
        return total, gx, gy

    coeffs = {
        (k1, k2): (rng.standard_normal(), rng.standard_normal())
        for k1 in range(RANDOM_DEGREE + 1)
        for k2 in range(RANDOM_DEGREE + 1)
        if (k1, k2) != (0, 0)
    }
    vals_fine, gx, gy = synth(fx)
    sup = float(np.max(np.abs(vals_fine)))
    sup_slope = float(np.max(np.sqrt(gx * gx + gy * gy)))
    scale = min(
        amplitude / sup if sup > 0 else np.inf,
        RANDOM_SLOPE_CAP / sup_slope if sup_slope > 0 else np.inf,
    )
    if not np.isfinite(scale):
        scale = 0.0
    vals, _, _ = synth(xs)
    return vals * scale


def build_initial(
    grid: PeriodicGrid,
    kind: str,
    amplitude: float = 1.0,
    wavenumbers=(1,),
    seed: int = 0,
    constant: float = 0.0,
    slope=(0.0,),
) -> GraphField:
    """Sample one catalog initial condition on the grid.

    ``trig_random`` draws seeded coefficients of degree up to 5, rescaled so
    the amplitude cap holds and the slope never exceeds 0.8 (which keeps the
    tilt weight positive for every catalog direction).  ``affine`` stores the
    linear function as sampled, so its values jump at the periodic wrap.
    """
    coords = grid.coords()
    if kind == "sine":
        ws = _wavenumber_angular(grid, wavenumbers)
        phase = sum(w * x for w, x in zip(ws, coords))
        return GraphField(grid, amplitude * np.sin(phase))
    if kind == "product_sine":
        ws = _wavenumber_angular(grid, wavenumbers)
        vals = amplitude * np.ones_like(coords[0])
        for w, x in zip(ws, coords):
            vals = vals * np.sin(w * x)
        return GraphField(grid, vals)
    if kind == "trig_random":
        rng = np.random.default_rng(seed)
        if grid.dim == 1:
            poly = random_trig_poly(
                rng, degree=RANDOM_DEGREE, amplitude=amplitude,
                max_slope=RANDOM_SLOPE_CAP, period=grid.period[0],
            )
            return poly.sample(grid)
        return GraphField(grid, _random_2d(grid, rng, amplitude))
    if kind == "affine":
        slopes = tuple(float(s) for s in np.atleast_1d(slope))
        if len(slopes) != grid.dim:
            raise ValidationError(f"initial.slope needs {grid.dim} entries, got {len(slopes)}")
        vals = constant + sum(s * x for s, x in zip(slopes, coords))
        return GraphField(grid, np.asarray(vals, dtype=float))
    if kind == "constant":
        return GraphField(grid, np.full(grid.shape, float(constant)))
    raise ValidationError(f"unknown initial kind '{kind}'")
