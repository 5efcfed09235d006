"""Experiment harness: ablations, parameter sweeps, and oracle comparisons.

Every emitted CSV row is reproducible from (experiment id, seed): scenarios
are generated from the base config with the row's seed, solves are
deterministic, and rows are written in a fixed order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import admm, alpha_outer, oracle
from .relaxed import RelaxedProblem
from .scenario import Scenario, ScenarioConfig, generate_scenario
from .utility import FD, WIRED

SCHEMES = ("fd+virt", "fd+novirt", "wired+virt", "wired+novirt")
SWEEP_VARIABLES = ("users", "si", "rho", "w", "alpha_init", "schemes")


@dataclass
class ExperimentSpec:
    """One sweep: a base config, a swept variable, and replication seeds."""

    experiment: str
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    values: tuple = ()
    seeds: tuple = (0,)
    virtualization: bool = True
    self_backhaul: bool = True
    alpha: float = 0.5
    rho: float = 5e7
    xi1: float = 1e6
    xi2: float = 1e-3
    max_iter: int = 100
    max_rounds: int = 50
    use_outer: bool = False
    solver: str = "admm"

    def __post_init__(self):
        if self.experiment not in SWEEP_VARIABLES:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.experiment == "schemes" and not self.values:
            self.values = SCHEMES
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")


def _scenario_for(spec: ExperimentSpec, value, seed) -> tuple[Scenario, str, dict]:
    cfg = spec.config
    virt, backhaul = spec.virtualization, FD if spec.self_backhaul else WIRED
    overrides = {"rng_seed": int(seed)}
    run = {"rho": spec.rho, "use_outer": spec.use_outer, "alpha0": spec.alpha}
    if spec.experiment == "users":
        overrides["users_per_mvno"] = int(value)
    elif spec.experiment == "si":
        overrides["residual_si_gain_db"] = float(value)
    elif spec.experiment == "rho":
        run["rho"] = float(value)
    elif spec.experiment == "w":
        overrides["sbs_weight"] = float(value)
        run["use_outer"] = True
    elif spec.experiment == "alpha_init":
        run["alpha0"] = float(value)
        run["use_outer"] = True
    elif spec.experiment == "schemes":
        virt = "novirt" not in value
        backhaul = FD if value.startswith("fd") else WIRED
    scenario = generate_scenario(dataclasses.replace(cfg, **overrides))
    if not virt:
        scenario = scenario.restrict_to_home_inp()
    return scenario, backhaul, run


def _metrics(scenario: Scenario, report: admm.SolveReport) -> dict:
    alloc = report.allocation
    n_u = scenario.num_users
    assoc_cols = alloc.x.argmax(axis=1) if n_u else np.zeros(0, dtype=int)
    on_sbs = scenario.col_sbs[assoc_cols] >= 0 if n_u else np.zeros(0, dtype=bool)
    util = report.utilities
    return {
        "total_mvno_utility": util.total_vrm,
        "avg_user_utility": float(util.user_utility.mean()) if n_u else 0.0,
        "total_inp_utility": float(util.inp_utility.sum()),
        "resource_utilization": float(alloc.y_tilde.sum()) / max(scenario.num_cols, 1),
        "sbs_user_fraction": float(on_sbs.mean()) if n_u else 0.0,
    }


def run_point(scenario: Scenario, backhaul: str, rho: float, alpha0: float,
              use_outer: bool, spec: ExperimentSpec):
    """Solve one sweep point; returns (report, final alpha vector)."""
    if use_outer:
        report, history = alpha_outer.run_algorithm2(
            scenario, xi1=spec.xi1, alpha0=alpha0, rho=rho, xi2=spec.xi2,
            max_rounds=spec.max_rounds, max_iter=spec.max_iter,
            backhaul=backhaul, solver=spec.solver)
        return report, history[-1].alpha
    alpha = np.full(scenario.num_inps, float(alpha0))
    if spec.solver == "admm":
        report = admm.run_admm(scenario, alpha, rho=rho, xi2=spec.xi2,
                               max_iter=spec.max_iter, backhaul=backhaul)
    else:
        report = admm.solve_centralized_report(scenario, alpha, backhaul)
    return report, alpha


def run_experiment(spec: ExperimentSpec, out_path=None):
    """Run the sweep; one row per (value, seed).  Failures are recorded
    per-row and the sweep continues."""
    rows = []
    m_count = spec.config.num_inps
    for value in spec.values:
        for seed in spec.seeds:
            scenario, backhaul, run = _scenario_for(spec, value, seed)
            row = {"value": value, "seed": int(seed)}
            try:
                report, alpha = run_point(scenario, backhaul, run["rho"],
                                          run["alpha0"], run["use_outer"], spec)
                row.update(_metrics(scenario, report))
                for m in range(m_count):
                    row[f"alpha_{m + 1}"] = float(alpha[m])
                row["iterations"] = report.iterations
                row["termination"] = report.termination
            except Exception as exc:  # record and continue
                row["termination"] = f"error:{type(exc).__name__}"
            rows.append(row)
    if out_path is not None:
        write_experiment_csv(spec, rows, out_path)
    return rows


_METRIC_COLS = ("total_mvno_utility", "avg_user_utility", "total_inp_utility",
                "resource_utilization", "sbs_user_fraction")


def write_experiment_csv(spec: ExperimentSpec, rows, path) -> None:
    m_count = spec.config.num_inps
    cols = ["value", "seed", *_METRIC_COLS,
            *[f"alpha_{m + 1}" for m in range(m_count)], "iterations", "termination"]
    with open(path, "w") as fh:
        fh.write(f"# sballoc csv v1 experiment {spec.experiment}\n")
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row.get(c, "")
                out.append(repr(v) if isinstance(v, float) else str(v))
            fh.write(",".join(out) + "\n")


def compare_with_oracle(config: ScenarioConfig, seeds, alpha=0.5, y_steps: int = 64,
                        backhaul: str = FD, out_path=None):
    """Relaxed / oracle / recovered objective triplets on desk instances."""
    rows = []
    for seed in seeds:
        scenario = generate_scenario(dataclasses.replace(config, rng_seed=int(seed)))
        alpha_vec = np.full(scenario.num_inps, float(alpha))
        problem = RelaxedProblem(scenario, alpha_vec, backhaul)
        point, _ = admm.solve_centralized(problem)
        relaxed_obj = problem.objective(point)
        report = admm.finish_solve(problem, point.x, point.y_tilde, [], 0, "centralized")
        result = oracle.brute_force(scenario, alpha=alpha_vec,
                                    y_grid=oracle.default_y_grid(y_steps),
                                    backhaul=backhaul)
        gap = abs(report.recovered_objective - result.objective) \
            / max(abs(result.objective), 1e-12)
        rows.append({"seed": int(seed), "relaxed": relaxed_obj,
                     "oracle": result.objective,
                     "recovered": report.recovered_objective,
                     "recovered_gap": gap})
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write("# sballoc csv v1 oracle_compare\n")
            fh.write("seed,relaxed,oracle,recovered,recovered_gap\n")
            for r in rows:
                fh.write(f"{r['seed']},{r['relaxed']!r},{r['oracle']!r},"
                         f"{r['recovered']!r},{r['recovered_gap']!r}\n")
    return rows
