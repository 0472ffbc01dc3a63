"""Strict JSON experiment configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .geometry import Direction, PeriodicGrid
from .heat_step import HeatStepParams
from .initial import INITIAL_KINDS, build_initial

__all__ = ["MODES", "ExperimentConfig", "load_config"]

MODES = ("evolve", "reference", "compare", "speed", "props", "resolvent")

_GRID_KEYS = {"dim", "period", "points"}
_INITIAL_KEYS = {"kind", "amplitude", "wavenumbers", "seed", "constant", "slope"}
_HEAT_KEYS = {"trunc_mult", "root_tol", "max_bisect", "max_newton", "bracket_margin"}
_PDE_KEYS = {"safety", "snapshot_count"}
_RESOLVENT_KEYS = {"lambda", "fp_tol", "max_iters"}
_TOP_KEYS = {
    "mode", "grid", "initial", "direction", "t_total", "steps",
    "heat", "pde", "resolvent", "out_dir",
}


def _reject_unknown(obj: dict, allowed: set[str], context: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"unknown key '{key}' in {context}")


def _as_number(obj: dict, key: str, context: str, positive: bool = False) -> float:
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{context}.{key} must be a number")
    if positive and val <= 0:
        raise ValidationError(f"{context}.{key} must be positive")
    return float(val)


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``steps`` doubles as the iteration count (evolve/compare), the number of
    step-time samples (speed mode, times t_total * 4^-k), and the pair count
    (props mode); ``t_total`` is the single step time in props and resolvent
    modes.
    """

    mode: str
    grid: PeriodicGrid
    initial: dict
    direction: Direction
    t_total: float
    steps: int
    heat: HeatStepParams
    pde_safety: float
    pde_snapshot_count: int | None
    resolvent: dict
    out_dir: str
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    def build_grid(self) -> PeriodicGrid:
        return self.grid

    def build_initial(self, seed: int | None = None):
        kwargs = dict(self.initial)
        if seed is not None:
            kwargs["seed"] = seed
        return build_initial(self.grid, **kwargs)


def _parse_grid(obj) -> PeriodicGrid:
    if not isinstance(obj, dict):
        raise ValidationError("grid must be an object")
    _reject_unknown(obj, _GRID_KEYS, "grid")
    for key in ("dim", "period", "points"):
        if key not in obj:
            raise ValidationError(f"grid.{key} is required")
    dim = obj["dim"]
    if dim not in (1, 2):
        raise ValidationError("grid.dim must be 1 or 2")
    period, points = obj["period"], obj["points"]
    if not isinstance(period, list) or len(period) != dim:
        raise ValidationError(f"grid.period must be a list of {dim} numbers")
    if not isinstance(points, list) or len(points) != dim:
        raise ValidationError(f"grid.points must be a list of {dim} integers")
    try:
        return PeriodicGrid(tuple(period), tuple(points))
    except ValueError as err:
        raise ValidationError(f"grid: {err}") from err


def _parse_initial(obj, dim: int) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError("initial must be an object")
    _reject_unknown(obj, _INITIAL_KEYS, "initial")
    if "kind" not in obj:
        raise ValidationError("initial.kind is required")
    kind = obj["kind"]
    if kind not in INITIAL_KINDS:
        raise ValidationError(
            f"initial.kind must be one of {INITIAL_KINDS}, got '{kind}'"
        )
    out: dict = {"kind": kind}
    if kind in ("sine", "product_sine"):
        out["amplitude"] = _as_number(obj, "amplitude", "initial") if "amplitude" in obj else 1.0
        wn = obj.get("wavenumbers", [1] * dim)
        if not isinstance(wn, list) or len(wn) != dim:
            raise ValidationError(f"initial.wavenumbers must be a list of {dim} integers")
        out["wavenumbers"] = tuple(int(k) for k in wn)
    elif kind == "trig_random":
        out["amplitude"] = _as_number(obj, "amplitude", "initial") if "amplitude" in obj else 1.0
        out["seed"] = int(obj.get("seed", 0))
    elif kind == "affine":
        slope = obj.get("slope", [0.0] * dim)
        if not isinstance(slope, list) or len(slope) != dim:
            raise ValidationError(f"initial.slope must be a list of {dim} numbers")
        out["slope"] = tuple(float(s) for s in slope)
        out["constant"] = float(obj.get("constant", 0.0))
    elif kind == "constant":
        if "constant" not in obj:
            raise ValidationError("initial.constant is required for kind 'constant'")
        out["constant"] = _as_number(obj, "constant", "initial")
    return out


def _parse_heat(obj) -> HeatStepParams:
    if not isinstance(obj, dict):
        raise ValidationError("heat must be an object")
    _reject_unknown(obj, _HEAT_KEYS, "heat")
    try:
        return HeatStepParams(
            trunc_mult=float(obj.get("trunc_mult", 8.0)),
            root_tol=(float(obj["root_tol"]) if "root_tol" in obj else None),
            max_bisect=int(obj.get("max_bisect", 200)),
            max_newton=int(obj.get("max_newton", 20)),
            bracket_margin=(
                float(obj["bracket_margin"]) if "bracket_margin" in obj else None
            ),
        )
    except ValueError as err:
        raise ValidationError(f"heat: {err}") from err


def load_config(path) -> ExperimentConfig:
    """Load, validate, and normalize a JSON experiment config.

    Raises:
        ParseError: malformed JSON, with line and column.
        ValidationError: schema violation, naming the offending field.
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(
            f"config is not valid JSON: {err.msg} (line {err.lineno}, column {err.colno})"
        ) from err
    if not isinstance(raw, dict):
        raise ValidationError("top-level config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    for key in ("mode", "grid", "initial", "t_total"):
        if key not in raw:
            raise ValidationError(f"config.{key} is required")
    mode = raw["mode"]
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got '{mode}'")

    grid = _parse_grid(raw["grid"])
    initial = _parse_initial(raw["initial"], grid.dim)

    if "direction" in raw:
        vec = raw["direction"]
        if not isinstance(vec, list) or len(vec) != grid.dim + 1:
            raise ValidationError(
                f"direction must be a list of {grid.dim + 1} numbers"
            )
        try:
            direction = Direction.of([float(c) for c in vec])
        except ValueError as err:
            raise ValidationError(f"direction: {err}") from err
    else:
        direction = Direction.vertical(grid.dim)

    t_total = _as_number(raw, "t_total", "config", positive=True)
    steps = raw.get("steps", 16)
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ValidationError("steps must be a positive integer")

    heat = _parse_heat(raw.get("heat", {}))

    pde_obj = raw.get("pde", {})
    if not isinstance(pde_obj, dict):
        raise ValidationError("pde must be an object")
    _reject_unknown(pde_obj, _PDE_KEYS, "pde")
    pde_safety = float(pde_obj.get("safety", 0.2))
    if not (0.0 < pde_safety <= 1.0):
        raise ValidationError("pde.safety must lie in (0, 1]")
    snapshot_count = pde_obj.get("snapshot_count")
    if snapshot_count is not None:
        if isinstance(snapshot_count, bool) or not isinstance(snapshot_count, int) or snapshot_count < 2:
            raise ValidationError("pde.snapshot_count must be an integer >= 2")

    res_obj = raw.get("resolvent", {})
    if not isinstance(res_obj, dict):
        raise ValidationError("resolvent must be an object")
    _reject_unknown(res_obj, _RESOLVENT_KEYS, "resolvent")
    resolvent = {
        "lam": float(res_obj.get("lambda", 1.0)),
        "fp_tol": float(res_obj.get("fp_tol", 1e-9)),
        "max_iters": int(res_obj.get("max_iters", 10000)),
    }
    if resolvent["lam"] <= 0:
        raise ValidationError("resolvent.lambda must be positive")

    out_dir = raw.get("out_dir", "flowforge-out")
    if not isinstance(out_dir, str):
        raise ValidationError("out_dir must be a string")

    return ExperimentConfig(
        mode=mode,
        grid=grid,
        initial=initial,
        direction=direction,
        t_total=t_total,
        steps=steps,
        heat=heat,
        pde_safety=pde_safety,
        pde_snapshot_count=snapshot_count,
        resolvent=resolvent,
        out_dir=out_dir,
        seed=initial.get("seed", 0),
        raw=raw,
    )
