"""Diffusion-driven curvature flow of periodic graph surfaces."""

__version__ = "0.1.0"

from .errors import (
    BlowUp,
    ConfigError,
    DegenerateDirection,
    EmptyStencil,
    FlowforgeError,
    GridMismatch,
    KernelResolutionWarning,
    MaxItersExceeded,
    MultipleRootsWarning,
    NoBracket,
    NumericalError,
    ParseError,
    ValidationError,
)
from .geometry import (
    Direction,
    GraphField,
    PeriodicGrid,
    curvature,
    flow_rhs,
    gradient,
    hessian,
    normal_field,
    normal_vector,
    sup_dist,
)
from .heat_step import (
    FieldProbe,
    HeatStepParams,
    StepDiagnostics,
    apply_heat_step,
    density_weight,
    density_weight_field,
    effective_root_tol,
    eval_probe,
    solve_surface_point,
)
from .evolution import (
    PropertyReport,
    ResolventParams,
    Trajectory,
    check_step_properties,
    empirical_vertical_speed,
    iterate_steps,
    resolvent_approx,
)
from .pde import PdeParams, exact_heat_d1, pde_solve
from .trigpoly import TrigPoly, random_trig_poly
from .config import ExperimentConfig, load_config
from .cli import main, run

__all__ = [
    "__version__",
    "BlowUp", "ConfigError", "DegenerateDirection", "EmptyStencil",
    "FlowforgeError", "GridMismatch", "KernelResolutionWarning",
    "MaxItersExceeded", "MultipleRootsWarning", "NoBracket",
    "NumericalError", "ParseError", "ValidationError",
    "Direction", "GraphField", "PeriodicGrid",
    "curvature", "flow_rhs", "gradient", "hessian",
    "normal_field", "normal_vector", "sup_dist",
    "FieldProbe", "HeatStepParams", "StepDiagnostics",
    "apply_heat_step", "density_weight", "density_weight_field",
    "effective_root_tol", "eval_probe", "solve_surface_point",
    "PropertyReport", "ResolventParams", "Trajectory",
    "check_step_properties", "empirical_vertical_speed",
    "iterate_steps", "resolvent_approx",
    "PdeParams", "exact_heat_d1", "pde_solve",
    "TrigPoly", "random_trig_poly",
    "ExperimentConfig", "load_config", "main", "run",
]
