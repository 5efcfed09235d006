"""The convex relaxed allocation problem at a fixed spectrum split.

Decision variables are the association weights x[u, b] in [0, 1] and the
perspective-substituted resource shares y_tilde[u, b] in [0, x].  The
feasible polytope combines the per-user association simplex, the pairwise
box, per-BS time-share caps, and (in FD mode) per-SBS and per-InP backhaul
budgets.  Projection uses Dykstra's alternating method over exact
projections of the individual sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import RateTable, build_rate_table
from .scenario import Scenario
from .utility import FD, PAIR_FLOOR, WIRED, fairness_term, spectrum_unit_cost, \
    vrm_objective

_LOG_FLOOR = 1e-300  # keeps gradient logs finite at dead coordinates
_DEN_FLOOR = 1e-30


@dataclass
class AllocationPoint:
    """A point of the allocation polytope, relaxed or recovered.

    Recovered points carry binary x, the unscaled shares y = y_tilde / x,
    and the backhaul time shares z (per column, zero on MBS columns).
    """

    x: np.ndarray
    y_tilde: np.ndarray
    mode: str = "relaxed"
    y: np.ndarray | None = None
    z: np.ndarray | None = None

    def copy(self) -> "AllocationPoint":
        return AllocationPoint(self.x.copy(), self.y_tilde.copy(), self.mode,
                               None if self.y is None else self.y.copy(),
                               None if self.z is None else self.z.copy())

    def write_csv(self, scenario: Scenario, path) -> None:
        y = self.y if self.y is not None else np.zeros_like(self.y_tilde)
        with open(path, "w") as fh:
            fh.write("# sballoc csv v1 allocation\n")
            fh.write("user,inp,bs,x,ytilde,y\n")
            for u in range(self.x.shape[0]):
                for b in range(self.x.shape[1]):
                    fh.write(f"{u},{scenario.col_inp[b]},{b},{self.x[u, b]!r},"
                             f"{self.y_tilde[u, b]!r},{y[u, b]!r}\n")


def _entry_ratio(delta, x, y, rates, y_cost, q_coef):
    """Share ratio a user could sustain when entering each column.

    The marginal share price is the explicit cost plus a scarcity estimate:
    incumbents' leftover y-gradient on the column.  Without the scarcity
    term a saturated column keeps advertising its uncongested ratio and the
    solver churns on it.
    """
    loads = np.sum(y * rates, axis=0) if y.shape[0] else np.zeros(y.shape[1])
    marginal = y_cost + 2.0 * q_coef[None, :] * loads[None, :] * rates
    gy = delta[:, None] * x / np.maximum(y, _DEN_FLOOR) - marginal
    active = (x > PAIR_FLOOR) & (y > 1e-12)
    scarcity = np.max(np.where(active, gy, -np.inf), axis=0, initial=-np.inf)
    scarcity = np.where(np.isfinite(scarcity), np.maximum(scarcity, 0.0), 0.0)
    return np.clip(delta[:, None] / np.maximum(marginal + scarcity[None, :],
                                               _DEN_FLOOR), 0.0, 1.0)


def _project_pair(a, b):
    """Entrywise Euclidean projection onto {(x, y): 0 <= y <= x <= 1}."""
    swap = b > a
    t = np.clip((a + b) * 0.5, 0.0, 1.0)
    x = np.where(swap, t, np.clip(a, 0.0, 1.0))
    y = np.where(swap, t, np.clip(b, 0.0, 1.0))
    return x, y


def _project_simplex_rows(v, mask):
    """Project each row of v onto the probability simplex over `mask` columns.

    Off-mask entries pass through unchanged; every row must have at least
    one True in mask.
    """
    if v.shape[0] == 0:
        return v.copy()
    u = np.where(mask, v, -np.inf)
    s = -np.sort(-u, axis=1)
    finite = np.isfinite(s)
    cs = np.where(finite, s, 0.0).cumsum(axis=1)
    j = np.arange(1, v.shape[1] + 1)
    cond = finite & (s - (cs - 1.0) / j > 0)
    rho = np.where(cond, j, 0).max(axis=1)
    if np.any(rho == 0):
        raise ValueError("simplex projection on a row with no candidates")
    tau = (cs[np.arange(v.shape[0]), rho - 1] - 1.0) / rho
    return np.where(mask, np.maximum(v - tau[:, None], 0.0), v)


class _PairBoxSet:
    """Box + pairing constraints, entrywise: masks, 0<=y<=x<=1, optional fixed x."""

    def __init__(self, allowed, pinned_y, fix_x):
        self.allowed = allowed
        self.pinned_y = pinned_y
        self.fix_x = fix_x

    def project(self, x, y):
        if self.fix_x:
            yn = np.clip(y, 0.0, np.minimum(x, 1.0))
            yn[self.pinned_y] = 0.0
            return x.copy(), yn
        xn, yn = _project_pair(x, y)
        free = self.pinned_y & self.allowed
        xn[free] = np.clip(x[free], 0.0, 1.0)
        yn[self.pinned_y] = 0.0
        xn[~self.allowed] = 0.0
        return xn, yn


class _SimplexSet:
    def __init__(self, allowed):
        self.allowed = allowed

    def project(self, x, y):
        return _project_simplex_rows(x, self.allowed), y.copy()


class _ColCapSet:
    """Per-column halfspaces sum_u y[:, b] <= 1 over the active columns."""

    def __init__(self, cols, n_users):
        self.cols = cols
        self.n_users = max(n_users, 1)

    def project(self, x, y):
        yn = y.copy()
        s = yn[:, self.cols].sum(axis=0)
        over = s > 1.0
        if np.any(over):
            yn[:, self.cols[over]] -= (s[over] - 1.0) / self.n_users
        return x.copy(), yn


class _LoadCapSet:
    """Per-column weighted halfspaces sum_u w y <= cap (SBS backhaul budget)."""

    def __init__(self, cols, weights, caps):
        self.cols = cols
        self.weights = weights  # (U, len(cols))
        self.caps = caps
        self.norms = np.sum(weights * weights, axis=0)

    def project(self, x, y):
        yn = y.copy()
        if self.cols.size:
            vals = np.sum(self.weights * yn[:, self.cols], axis=0)
            excess = vals - self.caps
            for i in np.nonzero((excess > 0.0) & (self.norms > 0.0))[0]:
                yn[:, self.cols[i]] -= self.weights[:, i] * (excess[i] / self.norms[i])
        return x.copy(), yn


class _InpLoadSet:
    """Per-InP halfspace sum_j load_j / cap_j <= 1 over its SBS columns."""

    def __init__(self, blocks):
        self.blocks = []  # (cols, normals (U, k), norm^2)
        for cols, normals in blocks:
            self.blocks.append((cols, normals, float(np.sum(normals * normals))))

    def project(self, x, y):
        yn = y.copy()
        for cols, normals, nrm in self.blocks:
            if nrm <= 0.0:
                continue
            val = float(np.sum(normals * yn[:, cols])) - 1.0
            if val > 0.0:
                yn[:, cols] -= normals * (val / nrm)
        return x.copy(), yn


class FeasibleRegion:
    """Constraint metadata, feasibility checking, and Dykstra projection."""

    def __init__(self, scenario: Scenario, rates: RateTable, backhaul: str = FD,
                 active_cols=None, fix_x: bool = False):
        self.scenario = scenario
        self.rates = rates
        self.backhaul = backhaul
        n_u, n_b = scenario.access_gain.shape
        self.active = np.ones(n_b, dtype=bool) if active_cols is None \
            else np.asarray(active_cols, dtype=bool)
        self.allowed = scenario.allowed
        if n_u and not np.all(self.allowed.any(axis=1)):
            raise ValueError("every user needs at least one candidate BS")

        sbs = scenario.sbs_col_mask
        if backhaul == FD:
            self.cap = np.where(sbs, rates.backhaul, np.inf)
        else:
            self.cap = np.full(n_b, np.inf)
        dead = sbs & (self.cap <= 0.0)
        self.pinned_y = (~self.allowed) | (~self.active)[None, :] | dead[None, :]
        self.fix_x = fix_x

        cap_cols = np.nonzero(self.active & sbs & np.isfinite(self.cap) & (self.cap > 0))[0]
        self._sets = [_PairBoxSet(self.allowed, self.pinned_y, fix_x)]
        if not fix_x:
            self._sets.append(_SimplexSet(self.allowed))
        self._sets.append(_ColCapSet(np.nonzero(self.active)[0], n_u))
        if cap_cols.size:
            self._sets.append(_LoadCapSet(cap_cols, rates.access[:, cap_cols],
                                          self.cap[cap_cols]))
            blocks = []
            for m in range(scenario.num_inps):
                cols = cap_cols[scenario.col_inp[cap_cols] == m]
                if cols.size:
                    blocks.append((cols, rates.access[:, cols] / self.cap[cols]))
            if blocks:
                self._sets.append(_InpLoadSet(blocks))
        self._cap_cols = cap_cols

    # -- feasibility ----------------------------------------------------------

    def violations(self, x, y, tol: float = 1e-7):
        """Scale-aware violation report: list of (constraint id, magnitude).

        Magnitudes are absolute; the tol comparison is relative to each
        constraint's natural scale (rate-valued budgets compare against
        tol * max(1, cap)).
        """
        out = []
        mag = float(max(np.max(-x, initial=0.0), np.max(x - 1.0, initial=0.0)))
        if mag > tol:
            out.append(("C2_box", mag))
        mag = float(np.max(np.abs(x[~self.allowed]), initial=0.0))
        if mag > tol:
            out.append(("C2_candidate_mask", mag))
        if not self.fix_x and x.shape[0]:
            gaps = np.abs(np.sum(np.where(self.allowed, x, 0.0), axis=1) - 1.0)
            for u in np.nonzero(gaps > tol)[0]:
                out.append((f"C3_assoc[u={u}]", float(gaps[u])))
        mag = float(max(np.max(-y, initial=0.0), np.max(y - x, initial=0.0)))
        if mag > tol:
            out.append(("C4_pair", mag))
        mag = float(np.max(np.abs(y[self.pinned_y]), initial=0.0))
        if mag > tol:
            out.append(("C4_pinned", mag))
        shares = y[:, self.active].sum(axis=0) if y.shape[0] else np.zeros(0)
        for i in np.nonzero(shares - 1.0 > tol)[0]:
            out.append((f"C5_share[b={np.nonzero(self.active)[0][i]}]",
                        float(shares[i] - 1.0)))
        if self._cap_cols.size and y.shape[0]:
            loads = np.sum(y[:, self._cap_cols] * self.rates.access[:, self._cap_cols],
                           axis=0)
            for i in range(self._cap_cols.size):
                cap = self.cap[self._cap_cols[i]]
                if loads[i] - cap > tol * max(1.0, cap):
                    out.append((f"C6_backhaul[b={self._cap_cols[i]}]",
                                float(loads[i] - cap)))
            for m in range(self.scenario.num_inps):
                sel = self.scenario.col_inp[self._cap_cols] == m
                if np.any(sel):
                    tot = float(np.sum(loads[sel] / self.cap[self._cap_cols[sel]]))
                    if tot - 1.0 > tol:
                        out.append((f"C7_inp_backhaul[m={m}]", tot - 1.0))
        return out

    def max_violation(self, x, y) -> float:
        """Largest scaled violation (rate budgets normalized by their cap)."""
        worst = 0.0
        for name, mag in self.violations(x, y, tol=0.0):
            if name.startswith("C6"):
                cap = self.cap[int(name.split("b=")[1].rstrip("]"))]
                mag = mag / max(1.0, cap)
            worst = max(worst, mag)
        return worst

    # -- projection -----------------------------------------------------------

    def project(self, x, y, tol: float = 1e-9, max_passes: int = 1000):
        """Dykstra alternating projection onto the constraint intersection.

        Stops when the iterate is feasible within tol AND has stopped moving
        between passes (feasibility alone is not convergence of the
        projection).  Returns (x, y, converged); non-convergence after the
        pass cap signals a degenerate instance and leaves the best iterate.
        """
        x = np.asarray(x, dtype=float).copy()
        y = np.asarray(y, dtype=float).copy()
        if x.shape[0] == 0:
            return x, y, True
        if self.max_violation(x, y) <= tol:
            return x, y, True  # already feasible: projection is the identity
        corr = [(np.zeros_like(x), np.zeros_like(y)) for _ in self._sets]
        for _ in range(max_passes):
            x_prev, y_prev = x, y
            for i, s in enumerate(self._sets):
                px, py = corr[i]
                xi, yi = x + px, y + py
                x, y = s.project(xi, yi)
                corr[i] = (xi - x, yi - y)
            moved = max(float(np.max(np.abs(x - x_prev), initial=0.0)),
                        float(np.max(np.abs(y - y_prev), initial=0.0)))
            if moved <= 1e-11 and self.max_violation(x, y) <= tol:
                return x, y, True
        return x, y, False


class RelaxedProblem:
    """Objective, gradient, projection and feasibility for the relaxed problem."""

    def __init__(self, scenario: Scenario, alpha, backhaul: str = FD,
                 wired_price_per_bit: float | None = None):
        self.scenario = scenario
        self.alpha = np.asarray(alpha, dtype=float)
        self.backhaul = backhaul
        self.wired_price = scenario.config.wired_price_per_bit \
            if wired_price_per_bit is None else float(wired_price_per_bit)
        self.rates = build_rate_table(scenario, self.alpha)
        self.region = FeasibleRegion(scenario, self.rates, backhaul)
        self.delta = scenario.delta_u

        gamma = np.array([scenario.config.price[m] for m in scenario.col_inp])
        unit = spectrum_unit_cost(scenario, self.alpha)
        sbs = scenario.sbs_col_mask
        # linear y_tilde cost per entry: spectrum-power price, plus the
        # per-bit price of wired backhaul in the ablated mode
        self.y_cost = np.broadcast_to(gamma * unit, self.rates.access.shape).copy()
        if backhaul == WIRED:
            self.y_cost = self.y_cost + self.wired_price * \
                np.where(sbs[None, :], self.rates.access, 0.0)
        # quadratic load cost (1 - alpha) P / R_bh per SBS column (FD only)
        self.q_coef = np.zeros(scenario.num_cols)
        self._dead_sbs = np.zeros(scenario.num_cols, dtype=bool)
        if backhaul == FD:
            for b in np.nonzero(sbs)[0]:
                cap = self.rates.backhaul[b]
                if cap > 0.0 and np.isfinite(cap):
                    m = scenario.col_inp[b]
                    self.q_coef[b] = (1.0 - self.alpha[m]) * \
                        scenario.config.macro_power_w() / cap
                else:
                    self._dead_sbs[b] = True

    # -- evaluation -----------------------------------------------------------

    def objective(self, point_or_x, y=None) -> float:
        """Relaxed objective; equal to utility.vrm_objective on the same
        point (asserted in tests), evaluated from cached coefficients."""
        x, y = self._unpack(point_or_x, y)
        fair = float(np.sum(self.delta[:, None]
                            * fairness_term(x, y, self.rates.access)))
        if not np.isfinite(fair):
            return fair
        lin = float(np.sum(y * self.y_cost))
        loads = np.sum(y * self.rates.access, axis=0)
        if np.any(loads[self._dead_sbs] > 0.0):
            return -np.inf
        quad = float(np.sum(self.q_coef * loads * loads))
        return fair - lin - quad

    def gradient(self, point_or_x, y=None):
        """Analytic gradient of the objective over (x, y_tilde).

        d/dx   = delta * (log(yR/x) - 1)
        d/dy   = delta * x / y  - linear cost - 2 q_b R (sum_u y R)
        Exact on interior points; floored logs keep it finite elsewhere,
        and fully dead pairs (both coordinates at zero) are left at zero.
        """
        x, y = self._unpack(point_or_x, y)
        r = self.rates.access
        safe_ratio = np.maximum(y * r, _LOG_FLOOR) / np.maximum(x, _LOG_FLOOR)
        gx = self.delta[:, None] * (np.log(safe_ratio) - 1.0)
        gx[~self.region.allowed] = 0.0

        loads = np.sum(y * r, axis=0)
        gy = self.delta[:, None] * x / np.maximum(y, _DEN_FLOOR)
        gy -= self.y_cost
        gy -= 2.0 * self.q_coef[None, :] * loads[None, :] * r
        gy[self.region.pinned_y] = 0.0
        dead = x <= PAIR_FLOOR
        gx[dead] = 0.0
        gy[dead] = 0.0
        return gx, gy

    def usable(self) -> np.ndarray:
        """Pairs the association may meaningfully use: candidate columns with
        a positive access rate and a live share variable."""
        return self.region.allowed & ~self.region.pinned_y \
            & (self.rates.access > 0.0)

    def share_marginal(self, x, y):
        """d/dy of the objective (the y-block of `gradient`)."""
        r = self.rates.access
        loads = np.sum(y * r, axis=0)
        gy = self.delta[:, None] * x / np.maximum(y, _DEN_FLOOR)
        gy -= self.y_cost
        gy -= 2.0 * self.q_coef[None, :] * loads[None, :] * r
        gy[self.region.pinned_y | (x <= PAIR_FLOOR)] = 0.0
        return gy

    def association_marginal(self, x, y):
        """d/dx of the share-maximized objective F(x) = max_y f(x, y).

        By the envelope theorem this is delta*(log(y*R/x) - 1) at the inner
        optimum; at x = 0 the one-sided derivative is the value of entering
        at the scarcity-priced share ratio."""
        r = self.rates.access
        ratio = np.where(x > PAIR_FLOOR,
                         np.maximum(y, _LOG_FLOOR) / np.maximum(x, _LOG_FLOOR),
                         _entry_ratio(self.delta, x, y, r, self.y_cost,
                                      self.q_coef))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.delta[:, None] * (np.log(ratio * np.maximum(r, _LOG_FLOOR))
                                       - 1.0)
        return np.where(self.usable(), g, 0.0)

    def curvature(self, point_or_x, y=None):
        """Diagonal curvature magnitudes used to precondition descent steps.

        Dead pairs get the unit-weight curvature delta (the revival ray is
        nearly linear), so their lift is not suppressed."""
        x, y = self._unpack(point_or_x, y)
        r = self.rates.access
        hx = self.delta[:, None] / np.maximum(x, 1e-9)
        hx = np.where(x <= PAIR_FLOOR, self.delta[:, None] * np.ones_like(x), hx)
        hy = self.delta[:, None] * np.maximum(x, 1e-12) / np.maximum(y, 1e-12) ** 2
        hy = hy + 2.0 * self.q_coef[None, :] * r * r
        return hx, hy

    def project(self, point_or_x, y=None, tol: float = 1e-9):
        x, y = self._unpack(point_or_x, y)
        px, py, ok = self.region.project(x, y, tol=tol)
        if not ok:
            raise RuntimeError("projection did not converge; degenerate scenario")
        return AllocationPoint(px, py)

    def check_feasible(self, point_or_x, y=None, tol: float = 1e-7):
        x, y = self._unpack(point_or_x, y)
        return self.region.violations(x, y, tol=tol)

    # -- starting points -------------------------------------------------------

    def interior_point(self) -> AllocationPoint:
        """Strictly interior start: uniform x over usable candidates, shares
        scaled inside every budget so all fairness logs are finite."""
        n_u, n_b = self.rates.access.shape
        usable = self.region.allowed & ~self.region.pinned_y & (self.rates.access > 0.0)
        support = np.where(usable.any(axis=1, keepdims=True), usable, self.region.allowed)
        x = support / np.maximum(support.sum(axis=1, keepdims=True), 1)
        y = x / max(n_u, 1)
        y[self.region.pinned_y] = 0.0

        shares = y.sum(axis=0)
        scale = np.minimum(1.0, 0.9 / np.maximum(shares, 1e-300))
        y = y * scale[None, :]
        cols = self.region._cap_cols
        if cols.size and n_u:
            loads = np.sum(y[:, cols] * self.rates.access[:, cols], axis=0)
            s = np.minimum(1.0, 0.9 * self.region.cap[cols] / np.maximum(loads, 1e-300))
            y[:, cols] *= s[None, :]
            for m in range(self.scenario.num_inps):
                sel = cols[self.scenario.col_inp[cols] == m]
                if sel.size:
                    tot = np.sum(np.sum(y[:, sel] * self.rates.access[:, sel], axis=0)
                                 / self.region.cap[sel])
                    if tot > 0.9:
                        y[:, sel] *= 0.9 / tot
        return AllocationPoint(x, y)

    @staticmethod
    def _unpack(point_or_x, y):
        if y is None:
            return point_or_x.x, point_or_x.y_tilde
        return point_or_x, y
