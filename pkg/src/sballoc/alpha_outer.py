"""Per-InP spectrum-split optimization and the outer alternating loop.

At a fixed recovered allocation the objective separates across InPs and is
strictly concave in each split alpha_m (log terms in alpha and 1-alpha, a
linear spectrum cost, and a backhaul cost quadratic in 1-alpha), so each
InP solves a scalar problem by bisection on the derivative.  The outer loop
alternates allocation solves with split updates until the utility stops
moving; both steps carry exact keep-the-better safeguards, so the round
trace is nondecreasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admm import InnerOptions, SolveReport, finish_solve, run_admm, \
    solve_centralized_report
from .rates import build_rate_table
from .relaxed import AllocationPoint, RelaxedProblem
from .scenario import Scenario
from .utility import FD, WIRED, fairness_term, report_utilities, spectrum_unit_cost

_ALPHA_EDGE = 1e-12


@dataclass
class OuterState:
    """One round of the outer loop."""

    round: int
    alpha: np.ndarray
    objective: float
    report: SolveReport
    alpha_status: list = field(default_factory=list)


def _full_band_coefficients(scenario: Scenario):
    """Rate coefficients with the split divided out.

    Returns (mbs_full, sbs_full, bh_full): access rates the MBS would give on
    the whole band, and SBS access / backhaul rates on the whole band.
    """
    m_count = scenario.num_inps
    at_one = build_rate_table(scenario, np.ones(m_count))
    at_zero = build_rate_table(scenario, np.zeros(m_count))
    return at_one.access, at_zero.access, at_zero.backhaul


def inp_alpha_objective(scenario: Scenario, allocation: AllocationPoint, m: int,
                        alpha_m: float, alpha: np.ndarray, backhaul: str = FD,
                        wired_price_per_bit: float | None = None) -> float:
    """InP m's term of the split subproblem at a fixed allocation.

    Rates are re-derived at the trial split; x, y and z stay fixed.
    """
    trial = np.asarray(alpha, dtype=float).copy()
    trial[m] = alpha_m
    rates = build_rate_table(scenario, trial)
    cfg = scenario.config
    cols = scenario.inp_cols(m)
    sbs_cols = cols[scenario.col_sbs[cols] >= 0]
    x, y, z = allocation.x, allocation.y_tilde, allocation.z

    fair = float(np.sum(scenario.delta_u[:, None]
                        * fairness_term(x[:, cols], y[:, cols], rates.access[:, cols])))
    unit = spectrum_unit_cost(scenario, trial)
    cost = cfg.price[m] * float(np.sum(unit[cols] * y[:, cols].sum(axis=0)))
    loads = np.sum(y[:, sbs_cols] * rates.access[:, sbs_cols], axis=0)
    if backhaul == FD:
        g = (1.0 - alpha_m) * cfg.macro_power_w() * z[sbs_cols]
        backhaul_cost = float(np.sum(g * loads))
    else:
        price = cfg.wired_price_per_bit if wired_price_per_bit is None \
            else wired_price_per_bit
        backhaul_cost = price * float(np.sum(loads))
    return fair - cost - backhaul_cost


def solve_alpha(scenario: Scenario, allocation: AllocationPoint, m: int,
                alpha: np.ndarray, backhaul: str = FD,
                wired_price_per_bit: float | None = None, tol: float = 1e-8):
    """Maximize InP m's split term by bisection on the scalar derivative.

    Returns (alpha_m, status).  The backhaul feasibility interval is
    degenerate only if the fixed allocation violates the (split-invariant)
    tight-backhaul inequality; then the previous split is kept.
    """
    cfg = scenario.config
    cols = scenario.inp_cols(m)
    mbs = scenario.mbs_col(m)
    sbs_cols = cols[scenario.col_sbs[cols] >= 0]
    x, y, z = allocation.x, allocation.y_tilde, allocation.z
    mbs_full, sbs_full, bh_full = _full_band_coefficients(scenario)

    a_coef = float(np.sum(scenario.delta_u * x[:, mbs]))
    c_coef = float(np.sum(scenario.delta_u[:, None] * x[:, sbs_cols]))
    if a_coef == 0.0 and c_coef == 0.0:
        return float(alpha[m]), "no-users"

    bw = cfg.bandwidth_hz[m]
    t_mac = float(np.sum(y[:, mbs])) * bw * cfg.macro_power_w()
    t_sbs = cfg.sbs_weight[m] * float(np.sum(y[:, sbs_cols])) * bw * cfg.sbs_power_w()
    gamma = cfg.price[m]
    loads_full = np.sum(y[:, sbs_cols] * sbs_full[:, sbs_cols], axis=0)

    if backhaul == FD:
        # split-invariant backhaul feasibility: load <= z * R_bh on each SBS
        caps = z[sbs_cols] * bh_full[sbs_cols]
        if np.any(loads_full > caps * (1.0 + 1e-9) + 1e-9):
            return float(alpha[m]), "degenerate"
        q_push = cfg.macro_power_w() * float(np.sum(z[sbs_cols] * loads_full))

        def fprime(a):
            out = -gamma * (t_mac - t_sbs) + 2.0 * (1.0 - a) * q_push
            if a_coef:
                out += a_coef / max(a, _ALPHA_EDGE)
            if c_coef:
                out -= c_coef / max(1.0 - a, _ALPHA_EDGE)
            return out
    else:
        price = cfg.wired_price_per_bit if wired_price_per_bit is None \
            else wired_price_per_bit
        lin_push = price * float(np.sum(loads_full))

        def fprime(a):
            out = -gamma * (t_mac - t_sbs) + lin_push
            if a_coef:
                out += a_coef / max(a, _ALPHA_EDGE)
            if c_coef:
                out -= c_coef / max(1.0 - a, _ALPHA_EDGE)
            return out

    lo, hi = 0.0, 1.0
    if fprime(lo if a_coef == 0.0 else _ALPHA_EDGE) <= 0.0:
        return lo, "boundary"
    if fprime(hi if c_coef == 0.0 else 1.0 - _ALPHA_EDGE) >= 0.0:
        return hi, "boundary"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fprime(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), "interior"


def _evaluate_recovered(scenario, allocation, alpha, backhaul, wired_price):
    rates = build_rate_table(scenario, alpha)
    breakdown = report_utilities(allocation.x, allocation.y_tilde, allocation.z,
                                 scenario, rates, backhaul, wired_price)
    return breakdown.total_vrm


def run_algorithm2(scenario: Scenario, xi1: float = 1e6, alpha0=0.5,
                   rho: float = 5e7, xi2: float = 1e-3, max_rounds: int = 50,
                   max_iter: int = 100, backhaul: str = FD,
                   wired_price_per_bit: float | None = None,
                   solver: str = "admm",
                   opts: InnerOptions | None = None):
    """Alternate allocation solves with per-InP split updates.

    Stops when the squared change of the recovered utility drops to xi1 or
    the round cap is hit.  Returns (final SolveReport, list of OuterState).
    """
    if xi1 <= 0.0:
        raise ValueError("xi1 must be positive")
    m_count = scenario.num_inps
    alpha = np.full(m_count, float(alpha0)) if np.isscalar(alpha0) \
        else np.asarray(alpha0, dtype=float).copy()

    history: list[OuterState] = []
    chosen: AllocationPoint | None = None
    prev_obj = None
    termination = "round cap"

    for o in range(1, max_rounds + 1):
        if solver == "admm":
            report = run_admm(scenario, alpha, rho=rho, xi2=xi2, max_iter=max_iter,
                              backhaul=backhaul, wired_price_per_bit=wired_price_per_bit,
                              opts=opts)
        else:
            report = solve_centralized_report(scenario, alpha, backhaul,
                                              wired_price_per_bit, opts)
        alloc = report.allocation
        obj = report.utilities.total_vrm
        if chosen is not None:
            prev_here = _evaluate_recovered(scenario, chosen, alpha, backhaul,
                                            wired_price_per_bit)
            if prev_here > obj:  # keep-the-better safeguard
                alloc, obj = chosen, prev_here

        state = OuterState(round=o, alpha=alpha.copy(), objective=obj, report=report)
        history.append(state)
        converged = scenario.num_users == 0 or \
            (prev_obj is not None and (obj - prev_obj) ** 2 <= xi1)
        chosen, prev_obj = alloc, obj
        if converged:
            termination = "outer converged"
            break

        new_alpha = alpha.copy()
        for m in range(m_count):
            cand, status = solve_alpha(scenario, alloc, m, alpha, backhaul,
                                       wired_price_per_bit)
            if status in ("interior", "boundary"):
                before = inp_alpha_objective(scenario, alloc, m, alpha[m], alpha,
                                             backhaul, wired_price_per_bit)
                after = inp_alpha_objective(scenario, alloc, m, cand, alpha,
                                            backhaul, wired_price_per_bit)
                if after >= before:
                    new_alpha[m] = cand
                else:
                    status = "kept-previous"
            state.alpha_status.append(status)
        alpha = new_alpha

    final_alpha = history[-1].alpha
    problem = RelaxedProblem(scenario, final_alpha, backhaul, wired_price_per_bit)
    final = finish_solve(problem, chosen.x.astype(float), chosen.y_tilde,
                         history[-1].report.trace, history[-1].report.iterations,
                         termination, history[-1].report.warnings)
    return final, history


def write_outer_trace_csv(history, path) -> None:
    with open(path, "w") as fh:
        fh.write("# sballoc csv v1 outer_trace\n")
        m_count = history[0].alpha.shape[0] if history else 0
        cols = ",".join(f"alpha_{m + 1}" for m in range(m_count))
        fh.write(f"round,{cols},objective\n")
        for state in history:
            alphas = ",".join(repr(float(a)) for a in state.alpha)
            fh.write(f"{state.round},{alphas},{state.objective!r}\n")
