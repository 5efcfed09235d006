"""Brute-force reference solver for tiny instances.

Enumerates every binary association (exactly one BS per user, matching the
relaxed problem's equality constraint), grid-searches the resource shares,
and sets backhaul time shares by the tightness property.  The search
decomposes per base station group: an MBS column is independent; the SBS
columns of one InP are coupled by the per-InP backhaul budget and are
enumerated jointly.  Group optima are memoized across associations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .rates import build_rate_table
from .scenario import Scenario
from .utility import FD, spectrum_unit_cost

_CHUNK = 1 << 18


@dataclass
class OracleResult:
    association: np.ndarray  # (U,) chosen column per user
    y: np.ndarray            # (U,) share on the chosen column
    z: np.ndarray            # (B,) backhaul time share per column
    alpha: np.ndarray
    objective: float
    evaluations: int         # grid points evaluated across the search

    def write_csv(self, scenario: Scenario, path) -> None:
        with open(path, "w") as fh:
            fh.write("# sballoc csv v1 oracle\n")
            fh.write("entity,id,field,value\n")
            for m, a in enumerate(self.alpha):
                fh.write(f"alpha,{m},value,{float(a)!r}\n")
            for u in range(self.association.shape[0]):
                fh.write(f"user,{u},bs,{int(self.association[u])}\n")
                fh.write(f"user,{u},y,{self.y[u]!r}\n")
            for b in range(self.z.shape[0]):
                if scenario.col_sbs[b] >= 0:
                    fh.write(f"sbs,{b},z,{self.z[b]!r}\n")
            fh.write(f"total,-1,objective,{self.objective!r}\n")
            fh.write(f"total,-1,evaluations,{self.evaluations}\n")


def default_y_grid(steps: int = 64) -> np.ndarray:
    """Shares k/steps for k = 1..steps; zero is excluded because an
    associated-but-starved user is never optimal."""
    return np.arange(1, steps + 1) / float(steps)


def _group_key(members):
    return tuple(sorted(members))


def _decode(indices, n_grid, k):
    """Map flat combo indices to a (k, len(indices)) grid-index array."""
    out = np.empty((k, indices.shape[0]), dtype=np.int32)
    rem = indices
    for pos in range(k - 1, -1, -1):
        if pos:
            rem, out[pos] = np.divmod(rem, n_grid)
        else:
            out[pos] = rem
    return out


class _GroupSolver:
    """Best grid allocation for one column group under one association."""

    def __init__(self, scenario, rates, cols, y_grid, backhaul, wired_price, q_coef):
        self.scenario = scenario
        self.rates = rates
        self.cols = cols
        self.grid = y_grid
        self.backhaul = backhaul
        self.wired_price = wired_price
        self.q_coef = q_coef
        cfg = scenario.config
        gamma = np.array([cfg.price[m] for m in scenario.col_inp])
        self.lin_cost = gamma * spectrum_unit_cost(scenario, rates.alpha)
        self.sbs = scenario.sbs_col_mask

    def solve(self, members):
        """members: tuple of (user, col) with col in this group.

        Returns (value, {user: share}, {col: load}, evaluations).
        """
        users = [u for u, _ in members]
        ucols = [c for _, c in members]
        k = len(users)
        if k == 0:
            return 0.0, {}, {}, 0
        delta = self.scenario.delta_u[users]
        r = np.array([self.rates.access[u, c] for u, c in members])
        lin = np.array([self.lin_cost[c] for c in ucols])
        if self.backhaul != FD:
            lin = lin + np.where([self.sbs[c] for c in ucols],
                                 self.wired_price * r, 0.0)
        if np.any(r <= 0.0):
            return -np.inf, {}, {}, 0

        col_list = sorted(set(ucols))
        col_members = [np.array([i for i, c in enumerate(ucols) if c == col])
                       for col in col_list]
        caps = np.array([self.rates.backhaul[c] if self.sbs[c] else np.inf
                         for c in col_list])
        if self.backhaul == FD and np.any(caps <= 0.0):
            return -np.inf, {}, {}, 0
        qs = np.array([self.q_coef[c] for c in col_list])

        n_grid = self.grid.shape[0]
        total = n_grid ** k
        best_val = -np.inf
        best_idx = None
        evaluations = 0
        # per-member lookup tables over the grid index
        log_grid = np.log(self.grid)
        log_r = np.log(r)
        contrib = [delta[i] * (log_grid + log_r[i]) - lin[i] * self.grid
                   for i in range(k)]
        loadvec = [self.grid * r[i] for i in range(k)]
        for start in range(0, total, _CHUNK):
            idx = np.arange(start, min(start + _CHUNK, total))
            gi = _decode(idx, n_grid, k)
            evaluations += idx.shape[0]
            feasible = np.ones(idx.shape[0], dtype=bool)
            inp_load = np.zeros(idx.shape[0])
            loads = []
            val = np.zeros(idx.shape[0])
            for i in range(k):
                val += contrib[i][gi[i]]
            for ci, mem in enumerate(col_members):
                share = self.grid[gi[mem[0]]].copy()
                load = loadvec[mem[0]][gi[mem[0]]].copy()
                for i in mem[1:]:
                    share += self.grid[gi[i]]
                    load += loadvec[i][gi[i]]
                feasible &= share <= 1.0 + 1e-12
                loads.append(load)
                if np.isfinite(caps[ci]):
                    feasible &= load <= caps[ci] * (1.0 + 1e-12)
                    inp_load += load / caps[ci]
            if self.backhaul == FD:
                feasible &= inp_load <= 1.0 + 1e-12
                for ci in range(len(col_list)):
                    val -= qs[ci] * loads[ci] * loads[ci]
            if not feasible.any():
                continue
            val = np.where(feasible, val, -np.inf)
            j = int(np.argmax(val))
            if val[j] > best_val:
                best_val = float(val[j])
                best_idx = gi[:, j].copy()
        if best_idx is None:
            return -np.inf, {}, {}, evaluations
        y_best = self.grid[best_idx]
        shares = {u: float(y_best[i]) for i, u in enumerate(users)}
        load_by_col = {}
        for ci, col in enumerate(col_list):
            load_by_col[col] = float((y_best[col_members[ci]]
                                      * r[col_members[ci]]).sum())
        return best_val, shares, load_by_col, evaluations


def brute_force(scenario: Scenario, alpha=None, y_grid=None, alpha_grids=None,
                backhaul: str = FD, wired_price_per_bit: float | None = None,
                budget: float = 1e8) -> OracleResult:
    """Exhaustive maximum of the allocation problem on grids.

    alpha_grids, when given, is one iterable of candidate splits per InP and
    the search covers their product; otherwise the single `alpha` vector is
    used.  Raises if the estimated enumeration work exceeds `budget`.
    """
    cfg = scenario.config
    if y_grid is None:
        y_grid = default_y_grid()
    y_grid = np.asarray(y_grid, dtype=float)
    if alpha_grids is None:
        if alpha is None:
            raise ValueError("need alpha or alpha_grids")
        alpha_list = [np.asarray(alpha, dtype=float)]
    else:
        alpha_list = [np.array(combo, dtype=float)
                      for combo in itertools.product(*alpha_grids)]
    wired_price = cfg.wired_price_per_bit if wired_price_per_bit is None \
        else wired_price_per_bit

    n_u, n_b = scenario.access_gain.shape
    if n_u == 0:
        return OracleResult(np.zeros(0, dtype=int), np.zeros(0), np.zeros(n_b),
                            alpha_list[0], 0.0, 0)

    candidates = [np.nonzero(scenario.allowed[u])[0] for u in range(n_u)]
    group_of_col = {}
    for b in range(n_b):
        if scenario.col_sbs[b] >= 0 and backhaul == FD:
            group_of_col[b] = ("inp_sbs", int(scenario.col_inp[b]))
        else:
            group_of_col[b] = ("col", b)

    assoc_space = list(itertools.product(*candidates))
    keys = set()
    for assoc in assoc_space:
        groups = {}
        for u, c in enumerate(assoc):
            groups.setdefault(group_of_col[c], []).append((u, c))
        for gid, members in groups.items():
            keys.add((gid, _group_key(members)))
    work = len(alpha_list) * (len(assoc_space)
                              + sum(y_grid.shape[0] ** len(members)
                                    for _, members in keys))
    if work > budget:
        raise ValueError(f"oracle work estimate {work:.3g} exceeds budget {budget:.3g}")

    best = None
    evaluations = 0
    for alpha_vec in alpha_list:
        rates = build_rate_table(scenario, alpha_vec)
        q_coef = np.zeros(n_b)
        if backhaul == FD:
            for b in np.nonzero(scenario.sbs_col_mask)[0]:
                cap = rates.backhaul[b]
                if cap > 0.0 and np.isfinite(cap):
                    m = scenario.col_inp[b]
                    q_coef[b] = (1.0 - alpha_vec[m]) * cfg.macro_power_w() / cap
        solver = _GroupSolver(scenario, rates, None, y_grid, backhaul,
                              wired_price, q_coef)
        memo = {}
        for assoc in assoc_space:
            groups = {}
            for u, c in enumerate(assoc):
                groups.setdefault(group_of_col[c], []).append((u, c))
            total_val = 0.0
            shares = {}
            loads = {}
            for gid, members in groups.items():
                key = (gid, _group_key(members))
                if key not in memo:
                    memo[key] = solver.solve(members)
                    evaluations += memo[key][3]
                val, sh, ld, _ = memo[key]
                if not np.isfinite(val):
                    total_val = -np.inf
                    break
                total_val += val
                shares.update(sh)
                loads.update(ld)
            if not np.isfinite(total_val):
                continue
            if best is None or total_val > best[0]:
                z = np.zeros(n_b)
                for col, load in loads.items():
                    cap = rates.backhaul[col]
                    if scenario.col_sbs[col] >= 0 and backhaul == FD \
                            and np.isfinite(cap) and cap > 0.0:
                        z[col] = load / cap
                y = np.array([shares.get(u, 0.0) for u in range(n_u)])
                best = (total_val, np.array(assoc, dtype=int), y, z,
                        alpha_vec.copy())

    if best is None:
        # every association infeasible on the grid
        assoc = np.array([c[0] for c in candidates], dtype=int)
        return OracleResult(assoc, np.zeros(n_u), np.zeros(n_b), alpha_list[0],
                            -np.inf, evaluations)
    val, assoc, y, z, alpha_vec = best
    return OracleResult(assoc, y, z, alpha_vec, val, evaluations)
