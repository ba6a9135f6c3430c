"""Connectivity-maintaining optimization-based control for multi-robot
networks, with a closed-loop simulator and trajectory reporting."""

from .constraints import (
    BarrierParams,
    ConstraintEval,
    PriorityTask,
    eval_agg,
    eval_cm,
    eval_nominal,
    eval_str,
    strict_feasibility_probe,
)
from .controllers import (
    ControllerKind,
    MissionState,
    advance_mission,
    control,
    cost_eval,
    nominal_field,
)
from .graph import (
    GraphError,
    GraphEval,
    NetworkState,
    ProximityConfig,
    edge_weight,
    edge_weight_derivative,
    evaluate_graph,
)
from .sim import (
    Scenario,
    ScenarioError,
    TrajectoryLog,
    export_csv,
    load_scenario,
    run,
    step,
)
from .solver import SaddleParams, SolveResult, SolverDivergence, kkt_residual, saddle_solve
from .spectrum import (
    MergedBasis,
    MergedBoundEval,
    SpectralWorkspace,
    Spectrum,
    SpectrumError,
    algebraic_connectivity,
    lie_min_rate,
    merged_basis,
    merged_lower_bound,
    oracle_convex_hull_min,
    spectral_decompose,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierParams",
    "ConstraintEval",
    "ControllerKind",
    "GraphError",
    "GraphEval",
    "MergedBasis",
    "MergedBoundEval",
    "MissionState",
    "NetworkState",
    "PriorityTask",
    "ProximityConfig",
    "SaddleParams",
    "Scenario",
    "ScenarioError",
    "SolveResult",
    "SolverDivergence",
    "SpectralWorkspace",
    "Spectrum",
    "SpectrumError",
    "TrajectoryLog",
    "advance_mission",
    "algebraic_connectivity",
    "control",
    "cost_eval",
    "edge_weight",
    "edge_weight_derivative",
    "eval_agg",
    "eval_cm",
    "eval_nominal",
    "eval_str",
    "evaluate_graph",
    "export_csv",
    "kkt_residual",
    "lie_min_rate",
    "load_scenario",
    "merged_basis",
    "merged_lower_bound",
    "nominal_field",
    "oracle_convex_hull_min",
    "run",
    "saddle_solve",
    "spectral_decompose",
    "step",
    "strict_feasibility_probe",
]
