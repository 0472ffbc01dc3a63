"""Independent oracles for the limiting flow.

An explicit finite-difference integrator for the quasilinear curvature-flow
equation, and the exact mode-wise solution of its one-dimensional vertical
reduction (the linear heat equation).  Both exist to cross-check the
diffusion-and-recovery scheme, so they stay deliberately simple and auditable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BlowUp, DegenerateDirection
from .evolution import Trajectory
from .geometry import Direction, GraphField, PeriodicGrid, flow_parts
from .trigpoly import TrigPoly

__all__ = ["PdeParams", "pde_solve", "exact_heat_d1"]

BLOWUP_LIMIT = 1e6


@dataclass(frozen=True)
class PdeParams:
    """Explicit-Euler run controls.

    ``safety`` scales the stability-limited time step; snapshots are taken at
    ``snapshot_count`` evenly spaced target times (nearest completed step).
    """

    t_total: float
    snapshot_count: int = 2
    safety: float = 0.2

    def __post_init__(self):
        if self.t_total <= 0:
            raise ValueError("t_total must be positive")
        if self.snapshot_count < 2:
            raise ValueError("snapshot_count must be at least 2")
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety must lie in (0, 1]")


def pde_solve(f0: GraphField, r: Direction, pp: PdeParams) -> Trajectory:
    """Forward-Euler integration of the curvature-flow equation.

    The step obeys dt = safety * min_k h_k^2 / (2 d * max coefficient),
    recomputed every step because the coefficient grows with the gradient;
    the diffusion matrix itself has spectral radius at most 1.

    Raises:
        DegenerateDirection: tilt weight nonpositive mid-run (time attached).
        BlowUp: a sample left the trusted range (time attached).
    """
    grid = f0.grid
    d = grid.dim
    hmin2 = min(grid.spacing) ** 2
    targets = np.linspace(0.0, pp.t_total, pp.snapshot_count)

    snaps = [f0]
    times = [0.0]
    next_target = 1
    vals = f0.values.copy()
    time = 0.0
    steps_taken = 0

    while time < pp.t_total:
        cur = GraphField(grid, vals)
        if float(np.max(np.abs(vals))) > BLOWUP_LIMIT:
            raise BlowUp(f"sample exceeded {BLOWUP_LIMIT:g} at t={time:.6g}", time_reached=time)
        try:
            coeff, trace = flow_parts(cur, r)
        except DegenerateDirection as err:
            wrapped = DegenerateDirection(f"{err} (reached t={time:.6g})", node=err.node)
            wrapped.time_reached = time
            raise wrapped from err
        dt = pp.safety * hmin2 / (2.0 * d * float(np.max(coeff)))
        dt = min(dt, pp.t_total - time)
        prev_time = time
        prev_vals = vals
        vals = vals + dt * coeff * trace
        time = prev_time + dt
        steps_taken += 1

        while next_target < len(targets) and targets[next_target] <= time:
            tau = targets[next_target]
            if abs(prev_time - tau) < abs(time - tau):
                pick_t, pick_v = prev_time, prev_vals
            else:
                pick_t, pick_v = time, vals
            if pick_t <= times[-1]:
                raise ValueError(
                    "snapshot targets are denser than the stable time step"
                )
            times.append(pick_t)
            snaps.append(GraphField(grid, pick_v.copy()))
            next_target += 1

    meta = {
        "direction": tuple(r.components),
        "params": asdict(pp),
        "steps_taken": steps_taken,
    }
    return Trajectory(np.array(times), snaps, meta)


def exact_heat_d1(poly: TrigPoly, t: float, grid: PeriodicGrid) -> GraphField:
    """Exact heat-equation solution for a 1-d trigonometric initial field.

    Mode k decays by exp(-(2 pi k / L)^2 t); at t=0 this reproduces the
    initial samples bit for bit.
    """
    if grid.dim != 1:
        raise ValueError("exact_heat_d1 needs a 1-d grid")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return poly.heat_decayed(t, grid.period[0]).sample(grid)
