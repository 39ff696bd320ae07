"""Repeated routing games against a public belief over an unknown state.

Travelers repeatedly play the Wardrop equilibrium of the current public
belief; an information system observes loads and noisy costs on the used
edges and keeps the belief updated by Bayes' rule. The package simulates
these dynamics, verifies and enumerates their rest points, and checks the
structural conditions under which learning recovers the known-state
equilibrium.
"""

from .analysis import (
    ConditionReport,
    AverageCostComparison,
    RestPointCheck,
    RestPointFamily,
    RestPointReport,
    average_cost,
    check_complete_learning_conditions,
    compare_average_costs,
    check_rest_point,
    distinguishable_states,
    enumerate_rest_points,
)
from .belief import Observation, bayes_update, log_gaussian_density, log_likelihoods, replay_posterior
from .costs import (
    SlopeBoundReport,
    Belief,
    CostFunction,
    CostModel,
    StateSpace,
    beckmann_integral,
    edge_cost,
    expected_edge_cost,
    expected_route_cost,
    validate_slope_bound,
)
from .dynamics import (
    CONVERGED,
    MAX_STAGES,
    BatchSummary,
    NoiseSampler,
    StageRecord,
    Trajectory,
    TrajectorySummary,
    monte_carlo,
    realize_costs,
    run,
    step,
    summarize,
    write_trajectory_csv,
)
from .equilibrium import (
    EquilibriumResult,
    WardropCertificate,
    complete_info_equilibrium,
    solve_wardrop,
    solve_wardrop_batch,
    verify_equilibrium,
)
from .errors import (
    BeliefError,
    CostError,
    NetworkError,
    RoutelearnError,
    ScenarioError,
    SolverError,
)
from .graph import (
    Network,
    TwoTerminalGraph,
    edge_loads,
    is_series_parallel,
    series_parallel_reducible,
    underlying_graph,
    used_edges,
    validate_route_flow,
)
from .scenario import (
    BUILTIN_NAMES,
    ConvergenceRule,
    Scenario,
    Tolerances,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

__version__ = "0.1.0"

__all__ = [
    "SlopeBoundReport",
    "BatchSummary",
    "Belief",
    "BeliefError",
    "BUILTIN_NAMES",
    "CONVERGED",
    "ConditionReport",
    "ConvergenceRule",
    "CostError",
    "CostFunction",
    "CostModel",
    "EquilibriumResult",
    "MAX_STAGES",
    "Network",
    "NetworkError",
    "NoiseSampler",
    "Observation",
    "AverageCostComparison",
    "RestPointCheck",
    "RestPointFamily",
    "RestPointReport",
    "RoutelearnError",
    "Scenario",
    "ScenarioError",
    "SolverError",
    "StageRecord",
    "StateSpace",
    "Tolerances",
    "Trajectory",
    "TrajectorySummary",
    "TwoTerminalGraph",
    "WardropCertificate",
    "average_cost",
    "bayes_update",
    "beckmann_integral",
    "check_complete_learning_conditions",
    "compare_average_costs",
    "check_rest_point",
    "complete_info_equilibrium",
    "distinguishable_states",
    "edge_cost",
    "edge_loads",
    "enumerate_rest_points",
    "expected_edge_cost",
    "expected_route_cost",
    "is_series_parallel",
    "load_scenario",
    "log_gaussian_density",
    "log_likelihoods",
    "monte_carlo",
    "realize_costs",
    "replay_posterior",
    "run",
    "scenario_from_dict",
    "scenario_to_dict",
    "series_parallel_reducible",
    "solve_wardrop",
    "solve_wardrop_batch",
    "step",
    "summarize",
    "underlying_graph",
    "used_edges",
    "validate_slope_bound",
    "validate_route_flow",
    "verify_equilibrium",
    "write_trajectory_csv",
]
