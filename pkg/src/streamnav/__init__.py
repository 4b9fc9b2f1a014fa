"""Streamline navigation for multi-agent fleets with failed-agent exclusion zones.

Healthy agents are routed around failed ones along streamlines of a planar
ideal flow whose singularities sit at the failure positions. The package
bundles the field math, the real-time navigation loop, pre-flight and
runtime safety checks, a deterministic fleet simulator, and a CLI.
"""

from .errors import (
    AgentInsideExclusion,
    ConfigInvalid,
    EmptyDomain,
    NonFinite,
    NotApplicable,
    SingularJacobian,
    SingularityEvaluation,
    SolverError,
    StreamNavError,
)
from .flow_field import (
    FieldGrid,
    FieldPoint,
    FlowField,
    Jacobian2x2,
    Obstacle,
    eval_field,
    eval_jacobian,
    max_gain,
    sample_grid,
)
from .streamline_solver import SolveResult, SolverConfig, invert_batch, invert_point
from .navigator import (
    AgentNavState,
    Command,
    Navigator,
    NavigatorConfig,
    StepOutput,
)
from .safety_analysis import (
    SafetyMargins,
    SafetyReport,
    SeparationSeries,
    check_multi_obstacle_condition,
    check_single_obstacle_condition,
    monitor_separations,
)
from .fleet_simulator import (
    AgentSpec,
    FailureEvent,
    KSweepEntry,
    Scenario,
    VehicleModel,
    default_six_agent_scenario,
    peak_commanded_speed,
    run_scenario,
    sweep_k,
)
from .telemetry import AgentRecord, ScenarioLog, StepRecord
from .io_formats import (
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_field_grid_csv,
    write_steps_jsonl,
    write_summary_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AgentInsideExclusion",
    "AgentNavState",
    "AgentRecord",
    "AgentSpec",
    "Command",
    "ConfigInvalid",
    "EmptyDomain",
    "FailureEvent",
    "FieldGrid",
    "FieldPoint",
    "FlowField",
    "Jacobian2x2",
    "KSweepEntry",
    "Navigator",
    "NavigatorConfig",
    "NonFinite",
    "NotApplicable",
    "Obstacle",
    "Scenario",
    "ScenarioLog",
    "SafetyMargins",
    "SafetyReport",
    "SeparationSeries",
    "SingularJacobian",
    "SingularityEvaluation",
    "SolveResult",
    "SolverConfig",
    "SolverError",
    "StepOutput",
    "StepRecord",
    "StreamNavError",
    "VehicleModel",
    "check_multi_obstacle_condition",
    "check_single_obstacle_condition",
    "default_six_agent_scenario",
    "eval_field",
    "eval_jacobian",
    "invert_batch",
    "invert_point",
    "load_scenario",
    "max_gain",
    "monitor_separations",
    "peak_commanded_speed",
    "run_scenario",
    "sample_grid",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "sweep_k",
    "write_field_grid_csv",
    "write_steps_jsonl",
    "write_summary_csv",
]
