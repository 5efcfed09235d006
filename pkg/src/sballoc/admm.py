"""Consensus-ADMM solver for the relaxed allocation problem.

Each InP keeps a full local copy of the association matrix plus its own
resource shares; a coordinator averages the copies into the global matrix
and runs the dual update.  Local subproblems only ever see the InP's own
channel data (plus the global matrix and multipliers), which is the whole
point of the decomposition.

Subproblems are solved in two nested blocks: for a candidate association
the share subproblem is strictly concave and solved by projected scaled
ascent; the association itself moves by projected ascent on the
share-maximized objective, whose gradient is the plain fairness marginal at
the inner optimum (envelope theorem).  This keeps the association iterates
on a simple product of simplices where projection is exact and cheap.
Binary association is recovered from marginal benefits, resources are
re-solved at fixed association, and backhaul time shares follow from the
tight-backhaul property.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .rates import RateTable
from .relaxed import AllocationPoint, FeasibleRegion, RelaxedProblem, \
    _entry_ratio, _project_simplex_rows
from .scenario import Scenario
from .utility import FD, PAIR_FLOOR, UtilityBreakdown, fairness_term, \
    report_utilities

_X_EPS = 1e-9       # association weights below this are not recovery candidates
_LOG_FLOOR = 1e-300


@dataclass
class InnerOptions:
    """Projected-ascent controls for the share and association solvers."""

    max_steps: int = 400        # association (outer) step cap
    share_steps: int = 120      # share (inner) step cap
    local_steps: int = 25       # per-iteration cap for ADMM local solves
    rel_tol: float = 1e-6
    proj_tol: float = 1e-9
    armijo: float = 1e-4
    step_min: float = 1e-14
    step_max: float = 4.0


@dataclass
class AdmmState:
    """Living state of one ADMM run."""

    t: int
    x_global: np.ndarray
    local_x: list
    local_y: list
    multipliers: list
    rho: float
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    consensus_gap: float = np.inf
    objective_trace: list = field(default_factory=list)


@dataclass
class SolveReport:
    """Final allocation, utilities, and the convergence trace of a solve."""

    allocation: AllocationPoint
    relaxed: AllocationPoint
    relaxed_objective: float
    recovered_objective: float
    utilities: UtilityBreakdown
    trace: list            # rows (iter, objective, primal, dual, consensus_gap)
    iterations: int
    termination: str
    alpha: np.ndarray
    warnings: list = field(default_factory=list)

    def write_trace_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# sballoc csv v1 admm_trace\n")
            fh.write("iter,objective,primal_residual,dual_residual,consensus_gap\n")
            for row in self.trace:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in row) + "\n")

    def write_backhaul_csv(self, scenario: Scenario, path) -> None:
        z = self.allocation.z
        with open(path, "w") as fh:
            fh.write("# sballoc csv v1 backhaul_share\n")
            fh.write("inp,bs,z\n")
            for b in range(scenario.num_cols):
                if scenario.col_sbs[b] >= 0:
                    fh.write(f"{scenario.col_inp[b]},{b},{z[b]!r}\n")


# -- share (inner) subproblem ----------------------------------------------------


def _feasible_shares_under(problem: RelaxedProblem, x, desired, cols_mask=None):
    """Clip desired shares under the association weights and scale them
    inside every budget, keeping meaningful pairs strictly positive."""
    usable = problem.usable()
    if cols_mask is not None:
        usable = usable & cols_mask[None, :]
    y = np.clip(np.minimum(desired, x), 0.0, None)
    y[~usable] = 0.0
    lift = usable & (x > PAIR_FLOOR) & (y < x * 1e-9)
    y = np.where(lift, x * 1e-6, y)
    if y.shape[0] == 0:
        return y
    shares = y.sum(axis=0)
    y *= np.minimum(1.0, 1.0 / np.maximum(shares, 1e-300))[None, :]
    cols = problem.region._cap_cols
    if cols_mask is not None and cols.size:
        cols = cols[cols_mask[cols]]
    if cols.size:
        r = problem.rates.access[:, cols]
        loads = np.sum(y[:, cols] * r, axis=0)
        s = np.minimum(1.0, problem.region.cap[cols]
                       / np.maximum(loads, 1e-300))
        y[:, cols] *= s[None, :]
        for m in range(problem.scenario.num_inps):
            sel = cols[problem.scenario.col_inp[cols] == m]
            if sel.size:
                tot = np.sum(np.sum(y[:, sel] * problem.rates.access[:, sel],
                                    axis=0) / problem.region.cap[sel])
                if tot > 1.0:
                    y[:, sel] *= 1.0 / tot
    return y


def _solve_shares(problem: RelaxedProblem, region: FeasibleRegion, x, y0,
                  opts: InnerOptions, value=None):
    """Maximize the objective over shares at a fixed association.

    Strictly concave; diagonally scaled projected ascent with Armijo and a
    raw-gradient fallback.  `value` defaults to the problem objective and
    may add x-only terms (they shift the value, not the argmax).
    """
    if value is None:
        value = problem.objective
    y = y0.copy()
    f = value(x, y)
    info = {"steps": 0, "converged": False, "warning": None}
    if not np.isfinite(f) or y.shape[0] == 0:
        if y.shape[0]:
            info["warning"] = "share solver started outside the finite domain"
        info["converged"] = y.shape[0] == 0
        return y, f, info
    t_newton, t_grad = 1.0, 1.0
    stall = 0
    for _ in range(opts.share_steps):
        gy = problem.share_marginal(x, y)
        _, hy = problem.curvature(x, y)
        dy = gy / np.maximum(hy, 1e-12)
        col_max = np.max(np.abs(dy), axis=0, keepdims=True)
        dy = dy * np.minimum(1.0, 0.25 / np.maximum(col_max, 1e-300))

        def try_direction(uy, t, max_backtracks):
            while t >= opts.step_min and max_backtracks > 0:
                _, cy, _ = region.project(x, y + t * uy, tol=opts.proj_tol,
                                          max_passes=200)
                gain = float(np.sum(gy * (cy - y)))
                fc = value(x, cy)
                if np.isfinite(fc) and gain > 0.0 and fc >= f + opts.armijo * gain:
                    return cy, fc, t
                t *= 0.25
                max_backtracks -= 1
            return None

        threshold = opts.rel_tol * max(1.0, abs(f))
        t_newton = min(t_newton * 4.0, opts.step_max)
        hit = try_direction(dy, t_newton, 10)
        if hit is not None:
            t_newton = hit[2]
        if hit is None or hit[1] - f <= threshold:
            scale = 0.25 / max(float(np.max(np.abs(gy), initial=0.0)), 1e-300)
            t_grad = min(t_grad * 4.0, opts.step_max)
            hit_g = try_direction(gy * scale, t_grad, 40)
            if hit_g is not None:
                t_grad = hit_g[2]
                if hit is None or hit_g[1] > hit[1]:
                    hit = hit_g
        info["steps"] += 1
        if hit is None:
            info["converged"] = True
            break
        improvement = hit[1] - f
        y, f = hit[0], hit[1]
        if improvement <= threshold:
            stall += 1
            if stall >= 2:
                info["converged"] = True
                break
        else:
            stall = 0
    return y, f, info


# -- association (outer) subproblem -----------------------------------------------


def _ascend_association(view, x0, y0, opts: InnerOptions):
    """Projected ascent on F(x) = max_y f(x, y) over the association rows.

    The envelope gradient makes dead columns' entry value visible, so no
    special revival handling is needed; the row projection is exact.  Line
    search trials are screened with a cheap feasible lower bound of F
    (clipped warm shares); any point passing Armijo on the bound passes on
    F, and the full share solve runs only after acceptance.
    """
    x = view.project_x(x0)
    y, f = view.inner(x, y0)
    info = {"steps": 0, "converged": False, "warning": None}
    if not np.isfinite(f):
        info["warning"] = "association solver started outside the finite domain"
        return x, y, f, info
    t_newton, t_grad = 1.0, 1.0
    stall = 0
    for _ in range(opts.max_steps):
        gx = view.grad_x(x, y)
        hx = view.curv_x(x)
        dx = gx / np.maximum(hx, 1e-12)
        support = view.support
        n_live = support.sum(axis=1, keepdims=True)
        mean = np.where(n_live > 0,
                        np.sum(np.where(support, dx, 0.0), axis=1, keepdims=True)
                        / np.maximum(n_live, 1), 0.0)
        dx = np.where(support, dx - mean, 0.0)
        row_max = np.max(np.abs(dx), axis=1, keepdims=True)
        dx = dx * np.minimum(1.0, 0.25 / np.maximum(row_max, 1e-300))

        def try_direction(ux, t, max_backtracks):
            while t >= opts.step_min and max_backtracks > 0:
                cx = view.project_x(x + t * ux)
                gain = float(np.sum(gx * (cx - x)))
                if gain > 0.0:
                    cy, fb = view.inner_bound(cx, y)
                    if not np.isfinite(fb) or fb < f + opts.armijo * gain:
                        cy2, fb2 = view.inner_quick(cx, cy)
                        if np.isfinite(fb2) and fb2 > fb:
                            cy, fb = cy2, fb2
                    if np.isfinite(fb) and fb >= f + opts.armijo * gain:
                        return cx, cy, fb, t
                t *= 0.25
                max_backtracks -= 1
            return None

        threshold = opts.rel_tol * max(1.0, abs(f))
        t_newton = min(t_newton * 4.0, opts.step_max)
        hit = try_direction(dx, t_newton, 8)
        if hit is not None:
            t_newton = hit[3]
        if hit is None or hit[2] - f <= threshold:
            scale = 0.25 / max(float(np.max(np.abs(gx), initial=0.0)), 1e-300)
            t_grad = min(t_grad * 4.0, opts.step_max)
            hit_g = try_direction(gx * scale, t_grad, 20)
            if hit_g is not None:
                t_grad = hit_g[3]
                if hit is None or hit_g[2] > hit[2]:
                    hit = hit_g
        info["steps"] += 1
        if hit is None:
            info["converged"] = True
            break
        cx, cy, _, _ = hit
        cy, fc = view.inner(cx, cy)
        if fc < f:  # full share solve should only improve; keep the old point
            stall += 1
            if stall >= 3:
                info["converged"] = True
                break
            continue
        improvement = fc - f
        x, y, f = cx, cy, fc
        if improvement <= threshold:
            stall += 1
            if stall >= 3:
                info["converged"] = True
                break
        else:
            stall = 0
    if not info["converged"]:
        info["warning"] = "association solver hit its step cap"
    return x, y, f, info


class _CentralView:
    """The full relaxed problem as seen by the association ascent."""

    def __init__(self, problem: RelaxedProblem, opts: InnerOptions):
        self.problem = problem
        self.opts = opts
        self.share_region = FeasibleRegion(problem.scenario, problem.rates,
                                           problem.backhaul, fix_x=True)
        usable = problem.usable()
        rows_ok = usable.any(axis=1, keepdims=True)
        self.support = np.where(rows_ok, usable, problem.region.allowed)

    def project_x(self, x):
        return _project_simplex_rows(np.where(self.support, x, 0.0), self.support)

    def inner(self, x, y_warm):
        y0 = _feasible_shares_under(self.problem, x, y_warm)
        y, f, _ = _solve_shares(self.problem, self.share_region, x, y0, self.opts)
        return y, f

    def inner_bound(self, x, y_warm):
        y0 = _feasible_shares_under(self.problem, x, y_warm)
        return y0, self.problem.objective(x, y0)

    def inner_quick(self, x, y0):
        quick = dataclasses.replace(self.opts, share_steps=8)
        y, f, _ = _solve_shares(self.problem, self.share_region, x, y0, quick)
        return y, f

    def grad_x(self, x, y):
        return self.problem.association_marginal(x, y)

    def curv_x(self, x):
        return self.problem.delta[:, None] / np.maximum(x, 1e-2)


class LocalInp:
    """InP m's private subproblem: own columns' rates and costs only."""

    def __init__(self, problem: RelaxedProblem, m: int, opts: InnerOptions):
        scn = problem.scenario
        self.m = m
        self.opts = opts
        self.cols = scn.inp_cols(m)
        self.active = np.zeros(scn.num_cols, dtype=bool)
        self.active[self.cols] = True
        # private slices; other InPs' channel gains are never touched
        self.rates_own = problem.rates.access[:, self.cols]
        self.y_cost_own = problem.y_cost[:, self.cols]
        self.q_own = problem.q_coef[self.cols]
        self.delta = problem.delta
        masked = np.zeros_like(problem.rates.access)
        masked[:, self.cols] = self.rates_own
        masked_bh = np.where(self.active, problem.rates.backhaul, 0.0)
        local_rates = RateTable(access=masked, backhaul=masked_bh,
                                alpha=problem.alpha.copy())
        self.share_region = FeasibleRegion(scn, local_rates, problem.backhaul,
                                           active_cols=self.active, fix_x=True)
        self.problem = problem
        # association support: own unusable columns are excluded (their
        # fairness term would be -inf), other InPs' columns stay (they only
        # enter through the consensus penalty)
        usable = problem.usable()
        support = problem.region.allowed & (usable | ~self.active[None, :])
        rows_ok = support.any(axis=1, keepdims=True)
        self.support = np.where(rows_ok, support, problem.region.allowed)
        # consensus terms, set per iteration by local_update
        self.x_global = None
        self.lam = None
        self.rho = 0.0

    def own_value(self, x, y) -> float:
        """This InP's share of the relaxed objective."""
        xo, yo = x[:, self.cols], y[:, self.cols]
        fair = float(np.sum(self.delta[:, None]
                            * fairness_term(xo, yo, self.rates_own)))
        if not np.isfinite(fair):
            return fair
        lin = float(np.sum(yo * self.y_cost_own))
        loads = np.sum(yo * self.rates_own, axis=0)
        quad = float(np.sum(self.q_own * loads * loads))
        return fair - lin - quad

    def penalty(self, x) -> float:
        diff = x - self.x_global
        return float(np.sum(self.lam * diff)) + 0.5 * self.rho * float(np.sum(diff * diff))

    def augmented_value(self, x, y) -> float:
        own = self.own_value(x, y)
        return own - self.penalty(x) if np.isfinite(own) else own

    def project_x(self, x):
        return _project_simplex_rows(np.where(self.support, x, 0.0), self.support)

    def inner(self, x, y_warm):
        y0 = _feasible_shares_under(self.problem, x, y_warm, self.active)
        y, f, _ = _solve_shares(self.problem, self.share_region, x, y0,
                                self.opts, value=self.augmented_value)
        return y, f

    def inner_bound(self, x, y_warm):
        y0 = _feasible_shares_under(self.problem, x, y_warm, self.active)
        return y0, self.augmented_value(x, y0)

    def inner_quick(self, x, y0):
        quick = dataclasses.replace(self.opts, share_steps=8)
        y, f, _ = _solve_shares(self.problem, self.share_region, x, y0, quick,
                                value=self.augmented_value)
        return y, f

    def grad_x(self, x, y):
        xo, yo = x[:, self.cols], y[:, self.cols]
        r = self.rates_own
        ratio = np.where(xo > PAIR_FLOOR,
                         np.maximum(yo, _LOG_FLOOR) / np.maximum(xo, _LOG_FLOOR),
                         _entry_ratio(self.delta, xo, yo, r, self.y_cost_own,
                                      self.q_own))
        with np.errstate(divide="ignore", invalid="ignore"):
            g_own = self.delta[:, None] * (np.log(ratio * np.maximum(r, _LOG_FLOOR))
                                           - 1.0)
        usable_own = self.problem.usable()[:, self.cols]
        g = np.zeros_like(x)
        g[:, self.cols] = np.where(usable_own, g_own, 0.0)
        return g - self.lam - self.rho * (x - self.x_global)

    def curv_x(self, x):
        h = np.full_like(x, self.rho + 1e-12)
        h[:, self.cols] += self.delta[:, None] / np.maximum(x[:, self.cols], 1e-2)
        return h


def local_update(local: LocalInp, x_global, lam, rho, warm=None,
                 opts: InnerOptions | None = None):
    """Solve InP m's subproblem: maximize own utility minus consensus penalty.

    The solve is inexact on purpose (step cap local_steps): warm starts make
    successive ADMM iterations cheap, and consensus tolerates inexact local
    minimizers.  Returns (local copy of X, own resource shares, info).
    """
    if opts is not None:
        local.opts = opts
    local.opts = dataclasses.replace(local.opts,
                                     max_steps=local.opts.local_steps,
                                     share_steps=min(local.opts.share_steps, 30))
    local.x_global, local.lam, local.rho = x_global, lam, rho
    if warm is None:
        x0 = x_global.copy()
        y0 = _feasible_shares_under(local.problem, x0,
                                    x0 / max(x0.shape[0], 1), local.active)
    else:
        x0, y0 = warm
    x, y, _, info = _ascend_association(local, x0, y0, local.opts)
    return x, y, info


def global_update(local_xs, multipliers, rho):
    """Coordinator step: X = mean of copies + sum of multipliers / (M rho)."""
    m = len(local_xs)
    x = sum(local_xs) / m
    x = x + sum(multipliers) / (m * rho)
    return x


def dual_update(lam, local_x, x_global, rho):
    """Multiplier step lam <- lam + rho (X_m - X); exact, no clipping."""
    return lam + rho * (local_x - x_global)


# -- recovery -------------------------------------------------------------------


def recover_association(problem: RelaxedProblem, x, y) -> np.ndarray:
    """Round the relaxed association to one BS per user via marginal benefits.

    D = d(objective)/dx at the relaxed point; pick the argmax-D column when
    max D >= 0, otherwise the largest relaxed weight.  Ties break toward the
    larger relaxed weight, then the lower column index.  Candidates are the
    pairs carrying non-negligible relaxed weight: a vanishing pair's D
    reflects a per-unit ratio it could never sustain at full association.
    """
    r = problem.rates.access
    with np.errstate(divide="ignore", invalid="ignore"):
        d = problem.delta[:, None] * (np.log(np.maximum(y * r, _LOG_FLOOR))
                                      - np.log(np.maximum(x, _LOG_FLOOR)) - 1.0)
    weight_floor = np.maximum(_X_EPS, 1e-2 * x.max(axis=1, keepdims=True)) \
        if x.shape[0] else _X_EPS
    candidate = problem.region.allowed & (x > weight_floor)
    xbin = np.zeros_like(x)
    for u in range(x.shape[0]):
        cols = np.nonzero(candidate[u])[0]
        if cols.size == 0:
            cols = np.nonzero(problem.region.allowed[u])[0]
            best = min(cols, key=lambda b: (-x[u, b], b))
        else:
            best, key = None, None
            for b in cols:
                k = (d[u, b], x[u, b])
                if key is None or k > key:
                    best, key = b, k
            if key[0] < 0.0:
                best = min(cols, key=lambda b: (-x[u, b], b))
        xbin[u, best] = 1.0
    return xbin


def recover_resources(problem: RelaxedProblem, xbin, warm_y=None,
                      opts: InnerOptions | None = None) -> AllocationPoint:
    """Re-solve the shares at fixed binary association; set z by tightness.

    The restricted problem is concave in y_tilde alone; y = y_tilde / x and
    z = (sum_u y_tilde R) / R_bh on each SBS column.
    """
    opts = opts or InnerOptions()
    region = FeasibleRegion(problem.scenario, problem.rates, problem.backhaul,
                            fix_x=True)
    desired = warm_y if warm_y is not None else xbin / max(xbin.shape[0], 1)
    y0 = _feasible_shares_under(problem, xbin, desired)
    y, _, _ = _solve_shares(problem, region, xbin, y0, opts)

    z = np.zeros(problem.scenario.num_cols)
    cols = problem.region._cap_cols
    if cols.size and xbin.shape[0]:
        loads = np.sum(y[:, cols] * problem.rates.access[:, cols], axis=0)
        z[cols] = loads / problem.region.cap[cols]
    y_plain = np.where(xbin > 0.0, y, 0.0)
    return AllocationPoint(x=xbin, y_tilde=y, mode="recovered", y=y_plain, z=z)


_POLISH_CELL_LIMIT = 256  # auto local-search bound: U * B cells


def improve_association(problem: RelaxedProblem, xbin, warm_y=None,
                        max_passes: int = 3):
    """Deterministic single-user local search over the binary association.

    Best-improvement sweeps: for each user in index order, try every other
    candidate column, re-solve the (concave) resource subproblem, and keep
    the best strictly improving move.  The marginal-benefit rounding alone
    cannot see capacity interactions when several users round onto the same
    column; this repairs exactly that.
    """
    light = InnerOptions(share_steps=150)

    def solve_at(xb, warm):
        rec = recover_resources(problem, xb, warm_y=warm, opts=light)
        return rec, problem.objective(rec.x, rec.y_tilde)

    current, best_val = solve_at(xbin, warm_y)
    n_u = xbin.shape[0]
    usable = problem.usable()
    for _ in range(max_passes):
        improved = False
        for u in range(n_u):
            home = int(np.argmax(xbin[u]))
            move = None
            for b in np.nonzero(usable[u])[0]:
                if b == home:
                    continue
                trial = xbin.copy()
                trial[u] = 0.0
                trial[u, b] = 1.0
                rec, val = solve_at(trial, np.minimum(current.y_tilde, trial))
                if val > best_val + 1e-9 + 1e-12 * abs(best_val):
                    if move is None or val > move[0]:
                        move = (val, b, rec)
            if move is not None:
                best_val, b, current = move
                xbin = xbin.copy()
                xbin[u] = 0.0
                xbin[u, b] = 1.0
                improved = True
        if not improved:
            break
    return xbin, current


def finish_solve(problem: RelaxedProblem, x, y, trace, iterations, termination,
                 warnings=None, polish=None) -> SolveReport:
    """Shared tail of every solve: recovery, utilities, report assembly.

    polish=None enables the association local search automatically on small
    instances; True/False forces it.
    """
    relaxed = AllocationPoint(x.copy(), y.copy(), mode="relaxed")
    xbin = recover_association(problem, x, y)
    if polish is None:
        polish = 0 < x.size <= _POLISH_CELL_LIMIT
    if polish and x.shape[0]:
        xbin, recovered = improve_association(problem, xbin,
                                              warm_y=np.minimum(y, xbin))
        recovered = recover_resources(problem, xbin, warm_y=recovered.y_tilde)
    else:
        recovered = recover_resources(problem, xbin, warm_y=np.minimum(y, xbin))
    breakdown = report_utilities(recovered.x, recovered.y_tilde, recovered.z,
                                 problem.scenario, problem.rates, problem.backhaul,
                                 problem.wired_price)
    return SolveReport(
        allocation=recovered, relaxed=relaxed,
        relaxed_objective=problem.objective(relaxed),
        recovered_objective=problem.objective(recovered),
        utilities=breakdown, trace=trace, iterations=iterations,
        termination=termination, alpha=problem.alpha.copy(),
        warnings=warnings or [])


def _empty_report(problem: RelaxedProblem) -> SolveReport:
    n_u, n_b = problem.rates.access.shape
    zeros = np.zeros((n_u, n_b))
    return finish_solve(problem, zeros.copy(), zeros.copy(),
                        trace=[(0, 0.0, 0.0, 0.0, 0.0)], iterations=0,
                        termination="empty")


# -- drivers --------------------------------------------------------------------


def solve_centralized(problem: RelaxedProblem, opts: InnerOptions | None = None):
    """Reference solve of the full relaxed problem, ignoring the decomposition."""
    opts = opts or InnerOptions()
    n_u, n_b = problem.rates.access.shape
    if n_u == 0:
        return AllocationPoint(np.zeros((n_u, n_b)), np.zeros((n_u, n_b))), \
            {"steps": 0, "converged": True, "warning": None}
    view = _CentralView(problem, opts)
    start = problem.interior_point()
    x, y, _, info = _ascend_association(view, start.x, start.y_tilde, opts)
    return AllocationPoint(x, y), info


def solve_centralized_report(scenario: Scenario, alpha, backhaul: str = FD,
                             wired_price_per_bit: float | None = None,
                             opts: InnerOptions | None = None) -> SolveReport:
    problem = RelaxedProblem(scenario, alpha, backhaul, wired_price_per_bit)
    if scenario.num_users == 0:
        return _empty_report(problem)
    point, info = solve_centralized(problem, opts)
    obj = problem.objective(point)
    trace = [(0, obj, 0.0, 0.0, 0.0)]
    warnings = [info["warning"]] if info.get("warning") else []
    return finish_solve(problem, point.x, point.y_tilde, trace, info["steps"],
                        "centralized", warnings)


def run_admm(scenario: Scenario, alpha, rho: float = 5e7, xi2: float = 1e-3,
             max_iter: int = 100, backhaul: str = FD,
             wired_price_per_bit: float | None = None,
             opts: InnerOptions | None = None) -> SolveReport:
    """Iterate local solves, global averaging, and dual updates until the
    global association stops moving (and consensus is reached), then recover
    a binary allocation from the best iterate seen.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if xi2 <= 0.0:
        raise ValueError("xi2 must be positive")
    opts = opts or InnerOptions()
    problem = RelaxedProblem(scenario, alpha, backhaul, wired_price_per_bit)
    if scenario.num_users == 0:
        return _empty_report(problem)

    m_count = scenario.num_inps
    locals_ = [LocalInp(problem, m, opts) for m in range(m_count)]
    x_global = problem.interior_point().x
    state = AdmmState(t=0, x_global=x_global,
                      local_x=[x_global.copy() for _ in range(m_count)],
                      local_y=[_feasible_shares_under(problem, x_global,
                                                      x_global / max(scenario.num_users, 1),
                                                      lo.active)
                               for lo in locals_],
                      multipliers=[np.zeros_like(x_global) for _ in range(m_count)],
                      rho=rho)
    warnings = []
    trace = []
    best = (-np.inf, None, None)
    termination = "iteration cap"

    for t in range(1, max_iter + 1):
        state.t = t
        for m, lo in enumerate(locals_):
            xz, yz, info = local_update(lo, state.x_global, state.multipliers[m],
                                        rho, warm=(state.local_x[m], state.local_y[m]),
                                        opts=opts)
            if info.get("warning"):
                warnings.append(f"iter {t} inp {m}: {info['warning']}")
            state.local_x[m], state.local_y[m] = xz, yz

        x_prev = state.x_global
        state.x_global = global_update(state.local_x, state.multipliers, rho)
        for m in range(m_count):
            state.multipliers[m] = dual_update(state.multipliers[m],
                                               state.local_x[m], state.x_global, rho)

        diffs = [xz - state.x_global for xz in state.local_x]
        state.primal_residual = float(np.sqrt(sum(np.sum(d * d) for d in diffs)))
        state.dual_residual = rho * float(np.linalg.norm(state.x_global - x_prev))
        state.consensus_gap = max(float(np.max(np.abs(d))) for d in diffs) \
            if diffs else 0.0

        y_merged = np.zeros_like(state.x_global)
        for m, lo in enumerate(locals_):
            y_merged[:, lo.cols] = state.local_y[m][:, lo.cols]
        xm, ym, _ = problem.region.project(state.x_global, y_merged, tol=1e-10,
                                           max_passes=200)
        ym = _feasible_shares_under(problem, xm, ym)
        obj = problem.objective(xm, ym)
        state.objective_trace.append(obj)
        trace.append((t, obj, state.primal_residual, state.dual_residual,
                      state.consensus_gap))
        if np.isfinite(obj) and obj > best[0]:
            best = (obj, xm, ym)

        step_norm = float(np.linalg.norm(state.x_global - x_prev))
        if step_norm <= xi2 and state.consensus_gap <= 10.0 * xi2:
            termination = "consensus"
            break

    if termination == "iteration cap":
        warnings.append("consensus not reached within the iteration cap")
    if best[1] is None:
        best = (obj, xm, ym)
    return finish_solve(problem, best[1], best[2], trace, state.t, termination,
                        warnings)
