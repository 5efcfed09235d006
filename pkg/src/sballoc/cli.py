"""Command line interface: generate / solve / sweep / oracle / compare.

All outputs are CSV files in the chosen output directory; identical flags
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import os

import numpy as np

from . import admm, alpha_outer, experiments, oracle
from .rates import build_rate_table, write_rates_csv
from .scenario import ScenarioConfig, generate_scenario, read_config, \
    write_config, write_gains_csv
from .utility import FD, WIRED


def _load_config(args) -> ScenarioConfig:
    cfg = read_config(args.config) if args.config else ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, rng_seed=args.seed)
    return cfg


def _scenario(args):
    cfg = _load_config(args)
    scenario = generate_scenario(cfg)
    if getattr(args, "no_virtualization", False):
        scenario = scenario.restrict_to_home_inp()
    return scenario


def _alpha_vec(args, m_count):
    if args.alpha is None:
        return np.full(m_count, 0.5)
    vals = [float(v) for v in args.alpha.split(",")]
    if len(vals) == 1:
        return np.full(m_count, vals[0])
    return np.asarray(vals)


def _backhaul(args) -> str:
    return WIRED if getattr(args, "wired_backhaul", False) else FD


def cmd_generate(args) -> int:
    scenario = _scenario(args)
    os.makedirs(args.out, exist_ok=True)
    write_config(scenario.config, os.path.join(args.out, "scenario_config.txt"))
    if args.dump_gains:
        write_gains_csv(scenario, os.path.join(args.out, "gains.csv"))
    print(f"scenario: {scenario.num_inps} InPs, {scenario.num_cols} BSs, "
          f"{scenario.num_users} users -> {args.out}")
    return 0


def cmd_solve(args) -> int:
    scenario = _scenario(args)
    alpha = _alpha_vec(args, scenario.num_inps)
    backhaul = _backhaul(args)
    os.makedirs(args.out, exist_ok=True)
    history = None
    if args.outer:
        report, history = alpha_outer.run_algorithm2(
            scenario, xi1=args.xi1, alpha0=alpha, rho=args.rho, xi2=args.xi2,
            max_rounds=args.max_rounds, max_iter=args.max_iter,
            backhaul=backhaul, solver=args.solver)
    elif args.solver == "centralized":
        report = admm.solve_centralized_report(scenario, alpha, backhaul)
    else:
        report = admm.run_admm(scenario, alpha, rho=args.rho, xi2=args.xi2,
                               max_iter=args.max_iter, backhaul=backhaul)

    report.allocation.write_csv(scenario, os.path.join(args.out, "allocation.csv"))
    report.write_backhaul_csv(scenario, os.path.join(args.out, "backhaul_share.csv"))
    report.write_trace_csv(os.path.join(args.out, "trace.csv"))
    report.utilities.write_csv(os.path.join(args.out, "utilities.csv"))
    if history is not None:
        alpha_outer.write_outer_trace_csv(history,
                                          os.path.join(args.out, "outer_trace.csv"))
    if args.dump_rates:
        table = build_rate_table(scenario, report.alpha)
        write_rates_csv(table, scenario, os.path.join(args.out, "rates.csv"))
    print(f"solve: objective {report.utilities.total_vrm!r} "
          f"({report.termination}, {report.iterations} iterations) -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = tuple(args.values.split(",")) if args.experiment == "schemes" \
        else tuple(float(v) for v in args.values.split(","))
    spec = experiments.ExperimentSpec(
        experiment=args.experiment, config=cfg, values=values,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        virtualization=not args.no_virtualization,
        self_backhaul=not args.wired_backhaul,
        alpha=args.fixed_alpha, rho=args.rho, xi1=args.xi1, xi2=args.xi2,
        max_iter=args.max_iter, max_rounds=args.max_rounds,
        use_outer=args.outer, solver=args.solver)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"sweep_{args.experiment}.csv")
    rows = experiments.run_experiment(spec, out_path)
    print(f"sweep {args.experiment}: {len(rows)} rows -> {out_path}")
    return 0


def cmd_oracle(args) -> int:
    scenario = _scenario(args)
    alpha = _alpha_vec(args, scenario.num_inps)
    os.makedirs(args.out, exist_ok=True)
    result = oracle.brute_force(scenario, alpha=alpha,
                                y_grid=oracle.default_y_grid(args.y_steps),
                                backhaul=_backhaul(args))
    out_path = os.path.join(args.out, "oracle.csv")
    result.write_csv(scenario, out_path)
    print(f"oracle: objective {result.objective!r} "
          f"({result.evaluations} grid points) -> {out_path}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    seeds = [int(s) for s in args.seeds.split(",")]
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "oracle_compare.csv")
    rows = experiments.compare_with_oracle(cfg, seeds, alpha=args.fixed_alpha,
                                           y_steps=args.y_steps,
                                           backhaul=_backhaul(args),
                                           out_path=out_path)
    worst = max(r["recovered_gap"] for r in rows)
    print(f"compare: {len(rows)} seeds, worst recovered gap {worst:.4%} -> {out_path}")
    return 0


def _add_common(p, seed=True):
    p.add_argument("--config", default=None, help="scenario config file")
    p.add_argument("--out", required=True, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="override rng seed")


def _add_solver_flags(p):
    p.add_argument("--rho", type=float, default=5e7)
    p.add_argument("--xi1", type=float, default=1e6)
    p.add_argument("--xi2", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--max-rounds", type=int, default=50)
    p.add_argument("--solver", choices=("admm", "centralized"), default="admm")
    p.add_argument("--outer", action="store_true",
                   help="run the alternating outer loop over the spectrum split")
    p.add_argument("--no-virtualization", action="store_true",
                   help="restrict users to their home InP")
    p.add_argument("--wired-backhaul", action="store_true",
                   help="replace FD self-backhaul with priced external backhaul")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sballoc",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a scenario and dump it")
    _add_common(p)
    p.add_argument("--dump-gains", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one instance")
    _add_common(p)
    p.add_argument("--alpha", default=None, help="spectrum split(s), comma separated")
    _add_solver_flags(p)
    p.add_argument("--dump-rates", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p, seed=False)
    p.add_argument("--experiment", required=True,
                   choices=experiments.SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma separated sweep values")
    p.add_argument("--seeds", default="0", help="comma separated seeds")
    p.add_argument("--fixed-alpha", type=float, default=0.5)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="brute-force a desk instance")
    _add_common(p)
    p.add_argument("--alpha", default=None)
    p.add_argument("--y-steps", type=int, default=64)
    p.add_argument("--wired-backhaul", action="store_true")
    p.add_argument("--no-virtualization", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="relaxed vs oracle vs recovered gaps")
    _add_common(p, seed=False)
    p.add_argument("--seeds", default="0", help="comma separated seeds")
    p.add_argument("--fixed-alpha", type=float, default=0.5)
    p.add_argument("--y-steps", type=int, default=64)
    p.add_argument("--wired-backhaul", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
