"""Distributed virtual resource allocation for self-backhauled small cells."""

from .admm import AdmmState, InnerOptions, SolveReport, dual_update, \
    global_update, local_update, recover_association, recover_resources, \
    run_admm, solve_centralized, solve_centralized_report
from .alpha_outer import OuterState, inp_alpha_objective, run_algorithm2, solve_alpha
from .experiments import ExperimentSpec, compare_with_oracle, run_experiment
from .oracle import OracleResult, brute_force, default_y_grid
from .rates import RateTable, backhaul_rate, build_rate_table, \
    macro_access_rate, small_access_rate
from .relaxed import AllocationPoint, FeasibleRegion, RelaxedProblem
from .scenario import Scenario, ScenarioConfig, generate_scenario, path_gain, \
    read_config, write_config
from .utility import FD, WIRED, UtilityBreakdown, backhaul_cost, fairness_term, \
    report_utilities, resource_cost, vrm_objective

__all__ = [
    "AdmmState", "AllocationPoint", "ExperimentSpec", "FeasibleRegion", "FD",
    "InnerOptions", "OracleResult", "OuterState", "RateTable", "RelaxedProblem",
    "Scenario", "ScenarioConfig", "SolveReport", "UtilityBreakdown", "WIRED",
    "backhaul_cost", "backhaul_rate", "brute_force", "build_rate_table",
    "compare_with_oracle", "default_y_grid", "dual_update", "fairness_term",
    "generate_scenario", "global_update", "inp_alpha_objective", "local_update",
    "macro_access_rate", "path_gain", "read_config", "recover_association",
    "recover_resources", "report_utilities", "resource_cost", "run_admm",
    "run_algorithm2", "run_experiment", "small_access_rate", "solve_alpha",
    "solve_centralized", "solve_centralized_report", "vrm_objective",
    "write_config",
]

__version__ = "0.1.0"
