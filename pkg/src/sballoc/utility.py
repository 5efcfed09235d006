"""Utility and cost evaluation: users, MVNOs, the resource manager, and InPs.

The resource manager maximizes the summed MVNO utility: proportional-fairness
income delta_u * log(served rate), minus the spectrum-power cost gamma * T,
minus the backhaul cost Q.  Fairness logs are natural; rates are bit/s
(base-2 logs inside the rate table), so the log base only rescales delta_u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import RateTable
from .scenario import Scenario

FD = "fd"
WIRED = "wired"

# Association weights below this contribute less than the double-precision
# resolution of the summed objective; they are treated as dead pairs so the
# continuous extension at x = 0 also covers numerically-zero weights.
PAIR_FLOOR = 1e-11


def fairness_term(x, y_tilde, rate):
    """Perspective-form fairness x * log(y_tilde * rate / x).

    Continuously extended to 0 at x = 0 (and below PAIR_FLOOR); -inf when a
    meaningful x meets y_tilde = 0 (an associated-but-starved user), which
    callers must treat as an infeasible direction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y_tilde, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = x * (np.log(y * rate) - np.log(x))
    return np.where(x > PAIR_FLOOR, vals, 0.0)


def spectrum_unit_cost(scenario: Scenario, alpha) -> np.ndarray:
    """Bandwidth-power product consumed per unit of y_tilde, per column (Hz*W).

    Macro columns cost alpha*B*P; small-cell columns are discounted by the
    InP's weight w: w*(1-alpha)*B*P_s.  Total transmit powers, not PSDs.
    """
    cfg = scenario.config
    alpha = np.asarray(alpha, dtype=float)
    cost = np.empty(scenario.num_cols)
    for m in range(cfg.num_inps):
        cols = scenario.inp_cols(m)
        bw = cfg.bandwidth_hz[m]
        for b in cols:
            if scenario.col_sbs[b] < 0:
                cost[b] = alpha[m] * bw * cfg.macro_power_w()
            else:
                cost[b] = cfg.sbs_weight[m] * (1.0 - alpha[m]) * bw * cfg.sbs_power_w()
    return cost


def resource_cost(y_macro, y_sbs, alpha_m, bandwidth_hz, macro_power_w,
                  sbs_power_w, sbs_weight):
    """Spectrum-power resource T for one InP: macro + weighted small-cell shares."""
    macro = np.sum(y_macro) * (alpha_m * bandwidth_hz * macro_power_w)
    small = sbs_weight * np.sum(y_sbs) * ((1.0 - alpha_m) * bandwidth_hz * sbs_power_w)
    return macro + small


def backhaul_cost(y_tilde, access_rates, backhaul_rates, alpha_m, macro_power_w):
    """Quadratic FD backhaul cost for one InP's SBS columns.

    Q' = sum_j (1/R_bh_j) (1-alpha) P (sum_u y R)^2, the z-eliminated form.
    Infinite if an SBS carries load but has zero backhaul rate.
    """
    y = np.atleast_2d(np.asarray(y_tilde, dtype=float))
    r = np.atleast_2d(np.asarray(access_rates, dtype=float))
    bh = np.asarray(backhaul_rates, dtype=float)
    loads = np.sum(y * r, axis=0)
    total = 0.0
    for load, rate in zip(loads, bh):
        if load > 0.0 and rate <= 0.0:
            return np.inf
        if rate > 0.0 and np.isfinite(rate):
            total += (1.0 - alpha_m) * macro_power_w * load * load / rate
    return total


def vrm_objective(x, y_tilde, scenario: Scenario, rates: RateTable,
                  backhaul: str = FD, wired_price_per_bit: float | None = None):
    """Objective of the relaxed allocation problem at a point (x, y_tilde)."""
    cfg = scenario.config
    fair = float(np.sum(scenario.delta_u[:, None] * fairness_term(x, y_tilde, rates.access)))
    if not np.isfinite(fair):
        return fair

    unit = spectrum_unit_cost(scenario, rates.alpha)
    gamma = np.array([cfg.price[m] for m in scenario.col_inp])
    lin = float(np.sum(gamma * unit * np.sum(y_tilde, axis=0)))

    sbs = scenario.sbs_col_mask
    loads = np.sum(y_tilde * rates.access, axis=0)
    if backhaul == FD:
        quad = 0.0
        for b in np.nonzero(sbs)[0]:
            m = scenario.col_inp[b]
            rate = rates.backhaul[b]
            if loads[b] > 0.0 and rate <= 0.0:
                return -np.inf
            if rate > 0.0 and np.isfinite(rate):
                quad += (1.0 - rates.alpha[m]) * cfg.macro_power_w() * loads[b] ** 2 / rate
        return fair - lin - quad
    price = cfg.wired_price_per_bit if wired_price_per_bit is None else wired_price_per_bit
    return fair - lin - price * float(np.sum(loads[sbs]))


@dataclass
class UtilityBreakdown:
    """Per-entity utility report for a recovered allocation."""

    user_rate: np.ndarray          # (U,) C_u, bit/s
    user_utility: np.ndarray       # (U,) G_u
    mvno_income: np.ndarray        # (N,)
    mvno_resource_cost: np.ndarray  # (N,) money, gamma-weighted
    mvno_backhaul_cost: np.ndarray  # (N,)
    mvno_net: np.ndarray           # (N,)
    inp_resource_revenue: np.ndarray   # (M,)
    inp_backhaul_revenue: np.ndarray   # (M,)
    inp_infrastructure_cost: np.ndarray  # (M,)
    inp_utility: np.ndarray        # (M,)
    total_vrm: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# sballoc csv v1 utilities\n")
            fh.write("entity,id,field,value\n")
            for u in range(self.user_rate.shape[0]):
                fh.write(f"user,{u},rate,{self.user_rate[u]!r}\n")
                fh.write(f"user,{u},utility,{self.user_utility[u]!r}\n")
            for i in range(self.mvno_net.shape[0]):
                fh.write(f"mvno,{i},income,{self.mvno_income[i]!r}\n")
                fh.write(f"mvno,{i},resource_cost,{self.mvno_resource_cost[i]!r}\n")
                fh.write(f"mvno,{i},backhaul_cost,{self.mvno_backhaul_cost[i]!r}\n")
                fh.write(f"mvno,{i},net,{self.mvno_net[i]!r}\n")
            for m in range(self.inp_utility.shape[0]):
                fh.write(f"inp,{m},resource_revenue,{self.inp_resource_revenue[m]!r}\n")
                fh.write(f"inp,{m},backhaul_revenue,{self.inp_backhaul_revenue[m]!r}\n")
                fh.write(f"inp,{m},infrastructure_cost,{self.inp_infrastructure_cost[m]!r}\n")
                fh.write(f"inp,{m},utility,{self.inp_utility[m]!r}\n")
            fh.write(f"total,-1,vrm_utility,{self.total_vrm!r}\n")


def report_utilities(x, y_tilde, z, scenario: Scenario, rates: RateTable,
                     backhaul: str = FD,
                     wired_price_per_bit: float | None = None) -> UtilityBreakdown:
    """Evaluate the full utility breakdown for a recovered (binary-x) point.

    In FD mode the backhaul income an InP collects equals the MVNOs' Q and
    there is no leased-infrastructure cost; in the wired ablation the whole
    backhaul income passes through to the infrastructure bill.
    """
    cfg = scenario.config
    n_mvno, n_inp = cfg.num_mvnos, cfg.num_inps
    served = y_tilde * rates.access                     # x*y*R per entry
    user_rate = served.sum(axis=1)
    user_utility = user_rate - scenario.delta_u

    fair = scenario.delta_u[:, None] * fairness_term(x, y_tilde, rates.access)
    unit = spectrum_unit_cost(scenario, rates.alpha)
    price = cfg.wired_price_per_bit if wired_price_per_bit is None else wired_price_per_bit

    mvno_income = np.zeros(n_mvno)
    mvno_t = np.zeros((n_mvno, n_inp))
    mvno_q = np.zeros((n_mvno, n_inp))
    for i in range(n_mvno):
        users = scenario.users_of_mvno(i)
        if users.size == 0:
            continue
        mvno_income[i] = fair[users].sum()
        for m in range(n_inp):
            cols = scenario.inp_cols(m)
            mvno_t[i, m] = np.sum(unit[cols] * y_tilde[np.ix_(users, cols)].sum(axis=0))
            sbs_cols = cols[scenario.col_sbs[cols] >= 0]
            bits = served[np.ix_(users, sbs_cols)].sum(axis=0)
            if backhaul == FD:
                g = (1.0 - rates.alpha[m]) * cfg.macro_power_w() * z[sbs_cols]
                mvno_q[i, m] = np.sum(g * bits)
            else:
                mvno_q[i, m] = price * bits.sum()

    gamma = np.asarray(cfg.price)
    mvno_resource_cost = mvno_t @ gamma
    mvno_backhaul_cost = mvno_q.sum(axis=1)
    mvno_net = mvno_income - mvno_resource_cost - mvno_backhaul_cost

    inp_resource_revenue = gamma * mvno_t.sum(axis=0)
    inp_backhaul_revenue = mvno_q.sum(axis=0)
    infra = np.zeros(n_inp) if backhaul == FD else inp_backhaul_revenue.copy()
    inp_utility = inp_resource_revenue + inp_backhaul_revenue - infra

    return UtilityBreakdown(
        user_rate=user_rate, user_utility=user_utility,
        mvno_income=mvno_income, mvno_resource_cost=mvno_resource_cost,
        mvno_backhaul_cost=mvno_backhaul_cost, mvno_net=mvno_net,
        inp_resource_revenue=inp_resource_revenue,
        inp_backhaul_revenue=inp_backhaul_revenue,
        inp_infrastructure_cost=infra, inp_utility=inp_utility,
        total_vrm=float(mvno_net.sum()))
