"""Command-line front end: run experiments from a JSON config.

Usage: flowforge <mode> --config <path> [--out <dir>] [--seed <u64>]

Exit codes: 0 success, 1 config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time as _time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, ExperimentConfig, load_config
from .errors import (
    ConfigError,
    KernelResolutionWarning,
    MultipleRootsWarning,
    NumericalError,
    ValidationError,
)
from .evolution import (
    ResolventParams,
    check_step_properties,
    empirical_vertical_speed,
    iterate_steps,
    resolvent_approx,
)
from .geometry import GraphField, flow_rhs, sup_dist
from .pde import PdeParams, pde_solve
from .serialize import write_manifest, write_rows_csv, write_snapshot_csv
from .trigpoly import random_trig_poly

__all__ = ["run", "main"]


def _write_trajectory(out_dir: Path, prefix: str, traj) -> None:
    for k, (t, snap) in enumerate(zip(traj.times, traj.snapshots)):
        write_snapshot_csv(out_dir / f"{prefix}_{k:04d}.csv", snap, float(t))


def _diag_dict(diag) -> dict:
    return diag.to_dict() if diag is not None else {}


def _run_evolve(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    f0 = cfg.build_initial(seed)
    traj = iterate_steps(f0, cfg.direction, cfg.t_total, cfg.steps, cfg.heat)
    _write_trajectory(out_dir, "snapshot", traj)
    return {
        "diagnostics": _diag_dict(traj.meta["diagnostics"]),
        "metrics": {"final_sup": float(np.max(np.abs(traj.final.values)))},
    }


def _run_reference(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    f0 = cfg.build_initial(seed)
    count = cfg.pde_snapshot_count or (cfg.steps + 1)
    traj = pde_solve(f0, cfg.direction, PdeParams(cfg.t_total, count, cfg.pde_safety))
    _write_trajectory(out_dir, "reference", traj)
    return {
        "diagnostics": {"pde_steps": traj.meta["steps_taken"]},
        "metrics": {"final_sup": float(np.max(np.abs(traj.final.values)))},
    }


def _run_compare(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    f0 = cfg.build_initial(seed)
    scheme = iterate_steps(f0, cfg.direction, cfg.t_total, cfg.steps, cfg.heat)
    oracle = pde_solve(
        f0, cfg.direction, PdeParams(cfg.t_total, cfg.steps + 1, cfg.pde_safety)
    )
    _write_trajectory(out_dir, "snapshot", scheme)
    _write_trajectory(out_dir, "reference", oracle)
    rows = []
    for k in range(len(scheme.times)):
        rows.append([
            float(scheme.times[k]),
            sup_dist(scheme.snapshots[k], oracle.snapshots[k]),
        ])
    write_rows_csv(out_dir / "metrics.csv", ["time", "sup_error"], rows)
    return {
        "diagnostics": _diag_dict(scheme.meta["diagnostics"]),
        "metrics": {"final_sup_error": rows[-1][1]},
    }


def _run_speed(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    f0 = cfg.build_initial(seed)
    target = flow_rhs(f0, cfg.direction)
    ts = [cfg.t_total * 4.0 ** (-k) for k in range(cfg.steps)]
    rows = []
    diag = None
    for t in ts:
        speed = empirical_vertical_speed(f0, cfg.direction, t, cfg.heat)
        diag = speed.diagnostics if diag is None else diag.merge(speed.diagnostics)
        rows.append([t, sup_dist(speed, target)])
    write_rows_csv(out_dir / "speed.csv", ["t", "max_deviation"], rows)
    slope = float(np.polyfit(
        np.log([row[0] for row in rows]), np.log([row[1] for row in rows]), 1
    )[0]) if len(rows) >= 2 else float("nan")
    return {
        "diagnostics": _diag_dict(diag),
        "metrics": {"fitted_slope": slope,
                    "deviations": [row[1] for row in rows]},
    }


def _run_props(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    if cfg.grid.dim != 1:
        raise ValidationError("props mode requires a 1-d grid")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(cfg.steps):
        pa = random_trig_poly(rng, period=cfg.grid.period[0])
        pb = random_trig_poly(rng, period=cfg.grid.period[0])
        pairs.append((pa.sample(cfg.grid), pb.sample(cfg.grid)))
    report = check_step_properties(pairs, cfg.direction, cfg.t_total, cfg.heat)
    rows = [
        [res.index, res.shift_violation, res.monotone_violation, res.contraction_violation]
        for res in report.results
    ]
    write_rows_csv(
        out_dir / "props.csv",
        ["pair", "shift_violation", "monotone_violation", "contraction_violation"],
        rows,
    )
    failures = report.failures()
    return {
        "diagnostics": _diag_dict(report.diagnostics),
        "metrics": {
            "pairs": len(pairs),
            "violations": len(failures),
            "worst_shift": report.max_violation("shift"),
            "worst_monotone": report.max_violation("monotone"),
            "worst_contraction": report.max_violation("contraction"),
        },
    }


def _run_resolvent(cfg: ExperimentConfig, out_dir: Path, seed: int) -> dict:
    f = cfg.build_initial(seed)
    rp = ResolventParams(
        lam=cfg.resolvent["lam"],
        t=cfg.t_total,
        fp_tol=cfg.resolvent["fp_tol"],
        max_iters=cfg.resolvent["max_iters"],
    )
    out = resolvent_approx(f, cfg.direction, rp, cfg.heat)
    write_snapshot_csv(out_dir / "resolvent.csv", out, rp.t)
    from .heat_step import apply_heat_step

    ratio = rp.lam / rp.t
    stepped = apply_heat_step(out, cfg.direction, rp.t, cfg.heat)
    residual = float(np.max(np.abs(
        out.values + ratio * (out.values - stepped.values) - f.values
    )))
    return {
        "diagnostics": _diag_dict(out.diagnostics.step),
        "metrics": {
            "iterations": out.diagnostics.iterations,
            "residual": residual,
        },
    }


_MODE_RUNNERS = {
    "evolve": _run_evolve,
    "reference": _run_reference,
    "compare": _run_compare,
    "speed": _run_speed,
    "props": _run_props,
    "resolvent": _run_resolvent,
}


def run(cfg: ExperimentConfig, out_dir=None, seed: int | None = None) -> dict:
    """Execute one experiment, write artifacts, and return the manifest."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    used_seed = cfg.seed if seed is None else int(seed)

    started = _time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = _MODE_RUNNERS[cfg.mode](cfg, out, used_seed)
    elapsed = _time.perf_counter() - started

    warn_counts = {
        "multiple_roots": sum(
            1 for w in caught if issubclass(w.category, MultipleRootsWarning)
        ),
        "kernel_resolution": sum(
            1 for w in caught if issubclass(w.category, KernelResolutionWarning)
        ),
        "other": sum(
            1 for w in caught
            if not issubclass(w.category, (MultipleRootsWarning, KernelResolutionWarning))
        ),
    }
    manifest = {
        "version": __version__,
        "mode": cfg.mode,
        "config": cfg.raw,
        "seed": used_seed,
        "diagnostics": result.get("diagnostics", {}),
        "metrics": result.get("metrics", {}),
        "warnings": warn_counts,
        "wall_clock_seconds": elapsed,
    }
    write_manifest(out / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flowforge",
        description="Diffusion-driven curvature flow of periodic graph surfaces.",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if cfg.mode != args.mode:
            raise ValidationError(
                f"config mode '{cfg.mode}' does not match CLI mode '{args.mode}'"
            )
        run(cfg, out_dir=args.out, seed=args.seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
