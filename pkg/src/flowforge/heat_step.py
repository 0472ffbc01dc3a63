"""One diffusion-and-recovery step for periodic graph surfaces.

The step operator spreads a heat kernel from every sample of the current
graph, weighted by the cosine between the surface normal and a fixed upward
direction r, and recovers the new graph as, above each base point, the unique
height where a directional derivative of the diffused field vanishes with
negative vertical second derivative.

The surface integral reduces to a flat quadrature: the area Jacobian
sqrt(1+|grad f|^2) cancels against the cosine weight, leaving the plain
per-node weight w(x') = r_n - <r', grad f(x')> (identically 1 for the
vertical direction).  The quadrature is a trapezoidal sum over grid nodes
within a truncation ball of radius trunc_mult * sqrt(4 tau), folding periodic
images of the kernel when that radius exceeds half a period.

Recovery detail: a fixed-direction derivative zero drifts away from the
limiting quasilinear flow at first order in the step time, because the
surface's own tilt couples into the kernel moments (an effect that a
small-slope expansion misses).  The solver therefore takes, above base point
s', the derivative along the surface normal at s' and diffuses for the
node-scaled time tau(s') = coeff(s') * t, where coeff is the quasilinear
flow's prefactor r_n (1+|grad f|^2) / w.  With that pairing the one-step
displacement is t * coeff * sum_ij a_ij f_ij + O(t^(3/2)), the right-hand
side of the limiting flow, uniformly in the tilt.  `eval_probe` still
evaluates the diffused field along any requested direction, which is how the
solver's choices are cross-checked in the tests.

Root finding per base point: bracket the height between the window extrema
padded by a margin, verify the sign change (positive below, negative above),
scan 32 points for multiplicity, bisect to width 1e-3 sqrt(t), then polish
with Newton using the analytic vertical second derivative.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    EmptyStencil,
    KernelResolutionWarning,
    MultipleRootsWarning,
    NoBracket,
)
from .geometry import Direction, GraphField, PeriodicGrid, gradient

__all__ = [
    "HeatStepParams",
    "FieldProbe",
    "StepDiagnostics",
    "effective_root_tol",
    "density_weight",
    "density_weight_field",
    "eval_probe",
    "solve_surface_point",
    "apply_heat_step",
]

SCAN_POINTS = 32


@dataclass(frozen=True)
class HeatStepParams:
    """Numerical controls for one step (the step time is always passed explicitly).

    Attributes:
        trunc_mult: kernel truncated at radius trunc_mult * sqrt(4 tau); must
            be at least 4 so the discarded tail mass stays below e^-16.
        root_tol: absolute tolerance on recovered heights.  None means
            1e-10 * max(1, sup|f|) of the field being stepped.
        max_bisect: total bisection budget per solve.
        max_newton: Newton polish iteration budget per solve.
        bracket_margin: vertical padding added to the window extrema when
            bracketing.  None means 3 * sqrt(4 tau) per node.
    """

    trunc_mult: float = 8.0
    root_tol: float | None = None
    max_bisect: int = 200
    max_newton: int = 20
    bracket_margin: float | None = None

    def __post_init__(self):
        if self.trunc_mult < 4.0:
            raise ValueError(f"trunc_mult must be >= 4, got {self.trunc_mult}")
        if self.root_tol is not None and self.root_tol <= 0:
            raise ValueError("root_tol must be positive")
        if self.max_bisect < 1 or self.max_newton < 0:
            raise ValueError("iteration budgets must be positive")
        if self.bracket_margin is not None and self.bracket_margin <= 0:
            raise ValueError("bracket_margin must be positive")


@dataclass(frozen=True)
class FieldProbe:
    """Point values of the diffused field and its derivatives.

    ``value`` is the field itself, ``slope`` its derivative along the probe
    direction, and ``slope_dz`` the vertical derivative of ``slope``.  For
    the vertical direction these are the field, its vertical derivative, and
    its vertical second derivative.
    """

    value: float
    slope: float
    slope_dz: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.slope) and math.isfinite(self.slope_dz)):
            raise ValueError("probe values must be finite")


@dataclass
class StepDiagnostics:
    """Per-step solver record, merged associatively across node batches."""

    nodes: int = 0
    bracket_verified: int = 0
    multiple_roots: int = 0
    concave_at_root: int = 0
    newton_iters_max: int = 0
    bisect_iters_max: int = 0

    def merge(self, other: "StepDiagnostics") -> "StepDiagnostics":
        return StepDiagnostics(
            nodes=self.nodes + other.nodes,
            bracket_verified=self.bracket_verified + other.bracket_verified,
            multiple_roots=self.multiple_roots + other.multiple_roots,
            concave_at_root=self.concave_at_root + other.concave_at_root,
            newton_iters_max=max(self.newton_iters_max, other.newton_iters_max),
            bisect_iters_max=max(self.bisect_iters_max, other.bisect_iters_max),
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _kernel_constant(t: float, n: int) -> float:
    """Normalization of the diffused field; any positive value leaves roots alone."""
    return (4.0 * math.pi * t) ** (-n / 2.0)


def effective_root_tol(f: GraphField, params: HeatStepParams) -> float:
    """Resolve the height tolerance, defaulting to 1e-10 * max(1, sup|f|)."""
    if params.root_tol is not None:
        return params.root_tol
    return 1e-10 * max(1.0, float(np.max(np.abs(f.values))))


def _weights(f: GraphField, r: Direction, grad: np.ndarray | None = None) -> np.ndarray:
    """Tilt weight r_n - <r', grad f> at every node (not sign-checked)."""
    if r.is_vertical():
        return np.ones(f.grid.shape)
    if grad is None:
        grad = gradient(f)
    return r.upward - np.tensordot(r.horizontal, grad, axes=1)


def density_weight_field(f: GraphField, r: Direction) -> np.ndarray:
    """Tilt weight at every node; raises DegenerateDirection if any is <= 0."""
    w = _weights(f, r)
    if np.min(w) <= 0.0:
        node = np.unravel_index(int(np.argmin(w)), f.grid.shape)
        raise DegenerateDirection(
            f"nonpositive surface weight {np.min(w):.3e} at node {node}", node=node
        )
    return w


def density_weight(f: GraphField, r: Direction, node: tuple[int, ...] | int) -> float:
    """Surface-measure weight at one node.

    Equals the normal/direction cosine times the area element, which for the
    vertical direction is exactly 1 at every node.
    """
    if isinstance(node, (int, np.integer)):
        node = (int(node),)
    w = _weights(f, r)
    idx = tuple(int(i) % n for i, n in zip(node, f.grid.points))
    val = float(w[idx])
    if val <= 0.0:
        raise DegenerateDirection(f"nonpositive surface weight {val:.3e} at node {idx}", node=idx)
    return val


def _check_resolution(grid: PeriodicGrid, t: float) -> None:
    width = math.sqrt(4.0 * t)
    hmax = max(grid.spacing)
    if width < 2.0 * hmax:
        warnings.warn(
            f"kernel width sqrt(4t)={width:.3g} under-resolved by spacing {hmax:.3g}; "
            "the quadrature cannot see curvature at this step time",
            KernelResolutionWarning,
            stacklevel=3,
        )


@lru_cache(maxsize=16)
def _grid_offsets(grid: PeriodicGrid, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Lattice displacements within the truncation ball around any grid node.

    Returns integer index offsets of shape (P, d) and the matching real
    displacements (P, d).  Offsets larger than a point count represent folded
    periodic images of the kernel; the modular gather downstream makes those
    hit the right samples automatically.
    """
    h = grid.spacing
    axes_idx = []
    for k in range(grid.dim):
        pmax = int(math.ceil(radius / h[k]))
        axes_idx.append(np.arange(-pmax, pmax + 1))
    mesh = np.meshgrid(*axes_idx, indexing="ij")
    idx = np.stack([m.ravel() for m in mesh], axis=1)
    displ = idx * np.array(h)
    mask = np.sum(displ * displ, axis=1) <= radius * radius
    return idx[mask], displ[mask]


def _point_window(
    grid: PeriodicGrid, point: Sequence[float], radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """Window for an arbitrary base point: flat node indices and displacements.

    Each entry is one periodic image of one grid node whose displacement from
    ``point`` lies within the truncation ball.
    """
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.shape != (grid.dim,):
        raise ValueError(f"point must have {grid.dim} coordinates")
    h = grid.spacing
    per_axis: list[tuple[np.ndarray, np.ndarray]] = []
    for k in range(grid.dim):
        L, n = grid.period[k], grid.points[k]
        base = (np.arange(n) * h[k] - pt[k] + 0.5 * L) % L - 0.5 * L
        images = int(math.ceil(radius / L)) + 1
        js, ds = [], []
        for m in range(-images, images + 1):
            shifted = base + m * L
            keep = np.abs(shifted) <= radius
            js.append(np.nonzero(keep)[0])
            ds.append(shifted[keep])
        per_axis.append((np.concatenate(js), np.concatenate(ds)))
    if grid.dim == 1:
        j, d = per_axis[0]
        return j, d[:, None]
    (j1, d1), (j2, d2) = per_axis
    flat = (j1[:, None] * grid.points[1] + j2[None, :]).ravel()
    displ = np.stack(
        [np.broadcast_to(d1[:, None], (d1.size, d2.size)).ravel(),
         np.broadcast_to(d2[None, :], (d1.size, d2.size)).ravel()],
        axis=1,
    )
    mask = np.sum(displ * displ, axis=1) <= radius * radius
    return flat[mask], displ[mask]


def _probe_sums(win_vals, win_gw, a, upward, tau, const, q,
                want_value=False, want_dz=False):
    """Quadrature sums (value, slope, slope_dz) at heights ``q``.

    ``win_vals``/``win_gw`` carry the window samples in the last axis;
    ``a`` is the horizontal kernel moment per window member; ``upward``,
    ``tau`` and ``const`` broadcast against ``q``.
    """
    z = win_vals - q[..., None]
    tcol = np.asarray(tau)[..., None] if np.ndim(tau) else tau
    e = np.exp(z * z * (-0.25 / tcol)) * win_gw
    lin = a + np.asarray(upward)[..., None] * z if np.ndim(upward) else a + upward * z
    slope = (const / (2.0 * tau)) * np.sum(e * lin, axis=-1)
    value = const * np.sum(e, axis=-1) if want_value else None
    dz = None
    if want_dz:
        up_b = np.asarray(upward)[..., None] if np.ndim(upward) else upward
        dz = (const / (2.0 * tau)) * np.sum(e * (lin * z * (0.5 / tcol) - up_b), axis=-1)
    return value, slope, dz


def _solve_heights(
    win_vals: np.ndarray,
    win_gw: np.ndarray,
    a: np.ndarray,
    upward: np.ndarray,
    tau: np.ndarray,
    const: np.ndarray,
    ref_heights: np.ndarray,
    root_tol: float,
    margin: np.ndarray,
    width_target: float,
    params: HeatStepParams,
    node_of_row,
) -> tuple[np.ndarray, StepDiagnostics]:
    """Vertical root solve for a batch of base points.

    All row arrays are per-base-point; every update below is guarded per
    row, so a row's trajectory depends only on its own data and results are
    bitwise independent of how rows are batched.
    """

    def slope_at(q, want_dz=False):
        _, s, dz = _probe_sums(win_vals, win_gw, a, upward, tau, const, q, want_dz=want_dz)
        return (s, dz) if want_dz else s

    m = win_vals.shape[0]
    lo = win_vals.min(axis=1) - margin
    hi = win_vals.max(axis=1) + margin

    s_lo = slope_at(lo)
    s_hi = slope_at(hi)
    bad = (s_lo <= 0.0) | (s_hi >= 0.0)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise NoBracket(
            f"no sign change of the recovery derivative on the vertical bracket "
            f"at node {node_of_row(row)} (slope {s_lo[row]:.3e} at bottom, "
            f"{s_hi[row]:.3e} at top)",
            node=node_of_row(row),
        )

    # Multiplicity scan: SCAN_POINTS heights across the bracket, endpoints
    # reused.  Interior columns are chunked to bound temporary storage.
    frac = np.linspace(0.0, 1.0, SCAN_POINTS)
    span = hi - lo
    pos = np.empty((m, SCAN_POINTS), dtype=bool)
    pos[:, 0] = True
    pos[:, -1] = False
    cols = SCAN_POINTS - 2
    chunk = max(1, int(4_000_000 // max(1, m * win_vals.shape[-1])))
    for c0 in range(0, cols, chunk):
        c1 = min(cols, c0 + chunk)
        qcols = lo[:, None] + span[:, None] * frac[1 + c0:1 + c1][None, :]
        _, s_int, _ = _probe_sums(
            win_vals[:, None, :], win_gw[:, None, :], a[:, None, :],
            upward[:, None], tau[:, None], const[:, None], qcols,
        )
        pos[:, 1 + c0:1 + c1] = s_int > 0.0

    down = pos[:, :-1] & ~pos[:, 1:]
    n_down = down.sum(axis=1)
    multiple = n_down > 1
    mids = lo[:, None] + span[:, None] * ((frac[:-1] + frac[1:]) * 0.5)[None, :]
    dist = np.where(down, np.abs(mids - ref_heights[:, None]), np.inf)
    kbest = np.argmin(dist, axis=1)
    lo = lo + span * frac[kbest]
    hi = lo + span / (SCAN_POINTS - 1)

    # Bisection down to the Newton basin.  A midpoint with exactly zero slope
    # is the root itself; the bracket collapses onto it.
    bisect_iters = 0
    active = (hi - lo) > width_target
    while np.any(active) and bisect_iters < params.max_bisect:
        mid = 0.5 * (lo + hi)
        s_mid = slope_at(mid)
        exact = active & (s_mid == 0.0)
        go_up = active & (s_mid > 0.0)
        go_dn = active & (s_mid < 0.0)
        lo = np.where(go_up | exact, mid, lo)
        hi = np.where(go_dn | exact, mid, hi)
        bisect_iters += 1
        active = (hi - lo) > width_target

    # Newton polish with the bracket as a safeguard.  Candidates may overshoot
    # the bracket by up to root_tol (which happens when an endpoint is the
    # root) and are clamped back inside; each row's trajectory stays a
    # function of its own data only, so batching cannot change results.
    q = 0.5 * (lo + hi)
    pending = np.ones(m, dtype=bool)
    newton_iters = 0
    for _ in range(params.max_newton):
        rows = np.nonzero(pending)[0]
        if rows.size == 0:
            break
        qr = q[rows]
        sr, dzr = _probe_sums(
            win_vals[rows], win_gw[rows], a[rows], upward[rows], tau[rows],
            const[rows], qr, want_dz=True,
        )[1:]
        lor, hir = lo[rows], hi[rows]
        lor = np.where(sr > 0.0, qr, lor)
        hir = np.where(sr < 0.0, qr, hir)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = qr - sr / dzr
        ok = (dzr < 0.0) & np.isfinite(cand) & (cand >= lor - root_tol) & (cand <= hir + root_tol)
        nxt = np.clip(np.where(ok, cand, 0.5 * (lor + hir)), lor, hir)
        step = np.abs(nxt - qr)
        lo[rows] = lor
        hi[rows] = hir
        q[rows] = nxt
        newton_iters += 1
        pending[rows] = step > root_tol

    # Fall back to pure bisection for any row Newton left unresolved.
    while np.any(pending) and bisect_iters < params.max_bisect:
        rows = np.nonzero(pending)[0]
        qr = q[rows]
        sr = _probe_sums(
            win_vals[rows], win_gw[rows], a[rows], upward[rows], tau[rows],
            const[rows], qr,
        )[1]
        lor = np.where(sr > 0.0, qr, lo[rows])
        hir = np.where(sr < 0.0, qr, hi[rows])
        lo[rows] = lor
        hi[rows] = hir
        q[rows] = 0.5 * (lor + hir)
        bisect_iters += 1
        pending[rows] = (hir - lor) > root_tol

    _, _, dz_final = _probe_sums(win_vals, win_gw, a, upward, tau, const, q, want_dz=True)

    diag = StepDiagnostics(
        nodes=m,
        bracket_verified=m,
        multiple_roots=int(np.count_nonzero(multiple)),
        concave_at_root=int(np.count_nonzero(dz_final < 0.0)),
        newton_iters_max=newton_iters,
        bisect_iters_max=bisect_iters,
    )
    return q, diag


class _RecoveryData:
    """Per-node recovery ingredients derived from the field and direction.

    ``coeff`` is the quasilinear flow prefactor r_n (1+|grad|^2) / w, used to
    scale each node's kernel time; ``nu_prime``/``nu_up`` are the surface
    normal components per node; ``weights`` the (positive) tilt weights.
    """

    def __init__(self, f: GraphField, r: Direction):
        grad = gradient(f)
        d = f.grid.dim
        n = f.grid.size
        self.grad = grad.reshape(d, n).T
        gsq = np.sum(self.grad * self.grad, axis=1)
        if r.is_vertical():
            w = np.ones(n)
        else:
            w = r.upward - self.grad @ r.horizontal
        if np.min(w) <= 0.0:
            node = np.unravel_index(int(np.argmin(w)), f.grid.shape)
            raise DegenerateDirection(
                f"nonpositive surface weight {np.min(w):.3e} at node {node}",
                node=node,
            )
        self.weights = w
        self.one_plus_gsq = 1.0 + gsq
        self.coeff = r.upward * self.one_plus_gsq / w
        big_w = np.sqrt(self.one_plus_gsq)
        self.nu_prime = -self.grad / big_w[:, None]
        self.nu_up = 1.0 / big_w


def _warn_multiple(diag: StepDiagnostics) -> None:
    if diag.multiple_roots:
        warnings.warn(
            f"multiple vertical roots at {diag.multiple_roots} node(s); "
            "picked the root nearest the previous height (surface may be "
            "leaving the graph regime)",
            MultipleRootsWarning,
            stacklevel=3,
        )


def worker_count() -> int:
    """Number of solver workers from FLOWFORGE_THREADS (unset/1 serial, 0 auto)."""
    raw = os.environ.get("FLOWFORGE_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 0:
        raise ValueError("FLOWFORGE_THREADS must be >= 0")
    if n == 0:
        return os.cpu_count() or 1
    return n


def eval_probe(
    f: GraphField,
    r: Direction,
    point: Sequence[float] | float,
    height: float,
    t: float,
    params: HeatStepParams = HeatStepParams(),
) -> FieldProbe:
    """Evaluate the diffused field and its derivatives at one space-height point.

    The probe diffuses the tilt-weighted surface measure of ``f`` for time
    ``t`` and differentiates along ``r``:

        value    = c sum w(x') exp(-(|x'-s'|^2 + (f(x')-q)^2) / 4t) h^d
        slope    = c sum w(x') [<x'-s', r'> + (f(x')-q) r_n] / (2t) exp(...) h^d
        slope_dz = the analytic vertical derivative of ``slope``

    with c = (4 pi t)^(-(d+1)/2).  ``point`` is a base coordinate (scalar for
    d=1), not necessarily a grid node.  Raises EmptyStencil when the
    truncation ball around ``point`` contains no grid node.
    """
    if t <= 0:
        raise ValueError("step time t must be positive")
    if isinstance(point, (int, float, np.floating, np.integer)):
        point = (float(point),)
    grid = f.grid
    _check_resolution(grid, t)
    radius = params.trunc_mult * math.sqrt(4.0 * t)
    flat_idx, displ = _point_window(grid, point, radius)
    if flat_idx.size == 0:
        raise EmptyStencil(
            f"no grid node within radius {radius:.3g} of point {tuple(point)}"
        )
    vals = f.values.ravel()[flat_idx]
    gauss = np.exp(-np.sum(displ * displ, axis=1) / (4.0 * t))
    gw = _weights(f, r).ravel()[flat_idx] * gauss
    a = displ @ r.horizontal
    const = _kernel_constant(t, grid.dim + 1) * float(np.prod(grid.spacing))
    value, slope, dz = _probe_sums(
        vals[None, :], gw[None, :], a, r.upward, t, const,
        np.array([float(height)]), want_value=True, want_dz=True,
    )
    return FieldProbe(float(value[0]), float(slope[0]), float(dz[0]))


def solve_surface_point(
    f: GraphField,
    r: Direction,
    point: Sequence[float] | float,
    t: float,
    params: HeatStepParams = HeatStepParams(),
) -> float:
    """Height of the recovered surface above one (possibly off-grid) base point.

    The recovery direction and kernel-time scale are frozen from the grid
    node nearest ``point``.
    """
    if t <= 0:
        raise ValueError("step time t must be positive")
    if isinstance(point, (int, float, np.floating, np.integer)):
        point = (float(point),)
    grid = f.grid
    _check_resolution(grid, t)
    rec = _RecoveryData(f, r)
    nearest_idx = tuple(
        int(round(point[k] / grid.spacing[k])) % grid.points[k] for k in range(grid.dim)
    )
    flat_nearest = int(np.ravel_multi_index(nearest_idx, grid.shape))
    tau = float(rec.coeff[flat_nearest]) * t
    radius = params.trunc_mult * math.sqrt(4.0 * tau)
    flat_idx, displ = _point_window(grid, point, radius)
    if flat_idx.size == 0:
        raise EmptyStencil(
            f"no grid node within radius {radius:.3g} of point {tuple(point)}"
        )
    vals = f.values.ravel()[flat_idx]
    gauss = np.exp(-np.sum(displ * displ, axis=1) / (4.0 * tau))
    gw = rec.weights[flat_idx] * gauss
    a = displ @ rec.nu_prime[flat_nearest]
    const = _kernel_constant(tau, grid.dim + 1) * float(np.prod(grid.spacing))
    margin = params.bracket_margin
    if margin is None:
        margin = 3.0 * math.sqrt(4.0 * tau)
    ref = np.array([f.values.ravel()[flat_nearest]])
    q, diag = _solve_heights(
        vals[None, :], gw[None, :], a[None, :],
        np.array([rec.nu_up[flat_nearest]]), np.array([tau]), np.array([const]),
        ref, effective_root_tol(f, params), np.array([margin]),
        1e-3 * math.sqrt(t), params,
        node_of_row=lambda _row: tuple(point),
    )
    _warn_multiple(diag)
    return float(q[0])


def apply_heat_step(
    f: GraphField,
    r: Direction,
    t: float,
    params: HeatStepParams = HeatStepParams(),
) -> GraphField:
    """One full step: recovered heights above every grid node.

    Returns a field on the same grid with a :class:`StepDiagnostics` record
    attached as ``.diagnostics``.  Per-node solves are independent; when
    FLOWFORGE_THREADS asks for more than one worker the node batch is split
    into contiguous chunks solved concurrently, with bitwise-identical
    results.

    Raises:
        DegenerateDirection: the tilt weight is nonpositive somewhere.
        NoBracket: a node's vertical bracket shows no sign change.
    """
    if t <= 0:
        raise ValueError("step time t must be positive")
    grid = f.grid
    _check_resolution(grid, t)
    rec = _RecoveryData(f, r)
    tau = rec.coeff * t
    radius = params.trunc_mult * math.sqrt(4.0 * float(np.max(tau)))
    idx_off, displ = _grid_offsets(grid, radius)

    flat_vals = f.values.ravel()
    if grid.dim == 1:
        n = grid.points[0]
        nodes = np.arange(n)
        gather = (nodes[:, None] + idx_off[:, 0][None, :]) % n
    else:
        n1, n2 = grid.points
        i1, i2 = np.divmod(np.arange(n1 * n2), n2)
        gather = ((i1[:, None] + idx_off[:, 0][None, :]) % n1) * n2 + (
            (i2[:, None] + idx_off[:, 1][None, :]) % n2
        )
    win_vals = flat_vals[gather]
    dist_sq = np.sum(displ * displ, axis=1)
    gauss = np.exp(dist_sq[None, :] / (-4.0 * tau[:, None]))
    if r.is_vertical():
        win_gw = gauss
    else:
        win_gw = rec.weights[gather] * gauss
    a = rec.nu_prime @ displ.T
    const = _kernel_constant(1.0, grid.dim + 1) * (
        tau ** (-(grid.dim + 1) / 2.0)
    ) * float(np.prod(grid.spacing))

    root_tol = effective_root_tol(f, params)
    if params.bracket_margin is not None:
        margin = np.full(grid.size, params.bracket_margin)
    else:
        margin = 3.0 * np.sqrt(4.0 * tau)
    width_target = 1e-3 * math.sqrt(t)
    shape = grid.shape

    def node_of_row(base):
        return lambda row: tuple(np.unravel_index(base + row, shape))

    n = win_vals.shape[0]
    workers = min(worker_count(), n)
    if workers <= 1:
        q, diag = _solve_heights(
            win_vals, win_gw, a, rec.nu_up, tau, const, flat_vals,
            root_tol, margin, width_target, params, node_of_row(0),
        )
    else:
        bounds = np.linspace(0, n, workers + 1, dtype=int)
        chunks = [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)]

        def solve_chunk(span):
            s0, s1 = span
            return _solve_heights(
                win_vals[s0:s1], win_gw[s0:s1], a[s0:s1], rec.nu_up[s0:s1],
                tau[s0:s1], const[s0:s1], flat_vals[s0:s1],
                root_tol, margin[s0:s1], width_target, params, node_of_row(s0),
            )
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_chunk, chunks))
        q = np.concatenate([res[0] for res in results])
        diag = results[0][1]
        for _, d in results[1:]:
            diag = diag.merge(d)

    _warn_multiple(diag)
    out = GraphField(grid, q.reshape(shape))
    out.diagnostics = diag
    return out
