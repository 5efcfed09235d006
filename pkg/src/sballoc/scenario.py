"""Network instance generation: geometry, channel gains, powers and prices.

A scenario is an immutable snapshot of a virtualized small-cell deployment:
M infrastructure providers (InPs), each owning one macro base station (MBS)
and a number of self-backhauled small cells (SBSs), N virtual operators
(MVNOs) whose users may attach to any base station of any InP, and the
large-scale channel gains between all of them.  Fast fading is averaged out;
gains carry path loss and lognormal shadowing only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

D_MIN_M = 1.0  # distance clamp for the path-gain singularity


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _per_inp(value, m: int, name: str) -> tuple:
    """Normalize a scalar-or-sequence config entry to a length-M tuple."""
    if np.isscalar(value):
        return (float(value),) * m
    vals = tuple(float(v) for v in value)
    if len(vals) != m:
        raise ValueError(f"{name} must be scalar or length {m}, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs needed to generate a scenario.

    Per-InP fields (bandwidth_hz, residual_si_gain_db, price, sbs_weight)
    accept either a scalar or one value per InP.
    """

    area_side_m: float = 1000.0
    num_inps: int = 2
    num_mvnos: int = 2
    sbs_per_inp: int = 4
    users_per_mvno: int = 20
    bandwidth_hz: object = 10e6          # B_m
    macro_power_dbm: float = 46.0        # MBS transmit power (total over B_m)
    sbs_power_dbm: float = 20.0          # SBS transmit power (total over B_m)
    noise_psd: float = 3.16e-20          # W/Hz (about -165 dBm/Hz)
    residual_si_gain_db: object = -70.0  # residual self-interference after cancellation
    price: object = 5.0                  # money per (Hz * W) charged by each InP
    sbs_weight: float | object = 1e-3    # small-cell resource discount, in (0, 1]
    user_payment: float = 1e6            # money per log-rate unit
    wired_price_per_bit: float = 10.0    # external backhaul price (non-FD ablation)
    rng_seed: int = 0
    pathloss_exponent: float = 3.76
    bs_pathloss_exponent: float | None = None  # BS-to-BS links; defaults to pathloss_exponent
    shadowing_sigma_db: float = 8.0

    def __post_init__(self):
        m = self.num_inps
        if m < 1 or self.num_mvnos < 1:
            raise ValueError("need at least one InP and one MVNO")
        if self.sbs_per_inp < 0 or self.users_per_mvno < 0:
            raise ValueError("counts must be nonnegative")
        if self.area_side_m <= 0:
            raise ValueError("area_side_m must be positive")
        object.__setattr__(self, "bandwidth_hz", _per_inp(self.bandwidth_hz, m, "bandwidth_hz"))
        object.__setattr__(self, "residual_si_gain_db",
                           _per_inp(self.residual_si_gain_db, m, "residual_si_gain_db"))
        object.__setattr__(self, "price", _per_inp(self.price, m, "price"))
        object.__setattr__(self, "sbs_weight", _per_inp(self.sbs_weight, m, "sbs_weight"))
        if any(b <= 0 for b in self.bandwidth_hz):
            raise ValueError("bandwidth_hz must be positive")
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be positive")
        if not (np.isfinite(self.macro_power_dbm) and np.isfinite(self.sbs_power_dbm)):
            raise ValueError("powers must be finite")
        if any(not 0 < w <= 1 for w in self.sbs_weight):
            raise ValueError("sbs_weight must lie in (0, 1]")
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss_exponent must be positive")
        if self.bs_pathloss_exponent is None:
            object.__setattr__(self, "bs_pathloss_exponent", float(self.pathloss_exponent))

    @property
    def num_users(self) -> int:
        return self.num_mvnos * self.users_per_mvno

    # -- linear-unit views ---------------------------------------------------

    def macro_power_w(self) -> float:
        return dbm_to_watts(self.macro_power_dbm)

    def sbs_power_w(self) -> float:
        return dbm_to_watts(self.sbs_power_dbm)

    def macro_power_psd(self, m: int) -> float:
        """MBS power spectral density over InP m's band (W/Hz)."""
        return self.macro_power_w() / self.bandwidth_hz[m]

    def sbs_power_psd(self, m: int) -> float:
        return self.sbs_power_w() / self.bandwidth_hz[m]

    def residual_si_linear(self, m: int) -> float:
        return db_to_linear(self.residual_si_gain_db[m])


def path_gain(tx_pos, rx_pos, pathloss_exponent: float, shadowing_draw_db=0.0):
    """Linear channel gain d^(-exponent) * 10^(shadowing/10), with d clamped to 1 m.

    Accepts broadcastable position arrays of shape (..., 2).
    """
    if pathloss_exponent <= 0:
        raise ValueError("pathloss_exponent must be positive")
    tx = np.asarray(tx_pos, dtype=float)
    rx = np.asarray(rx_pos, dtype=float)
    d = np.maximum(np.linalg.norm(tx - rx, axis=-1), D_MIN_M)
    gain = d ** (-pathloss_exponent) * 10.0 ** (np.asarray(shadowing_draw_db, dtype=float) / 10.0)
    return gain


@dataclass
class Scenario:
    """Immutable network instance.

    Base stations are flattened into global columns: for each InP in order,
    its MBS first, then its SBSs.  ``col_inp[b]`` is the owning InP and
    ``col_sbs[b]`` the global SBS index of column b (-1 for an MBS column).
    ``access_gain[u, b]`` is the user-to-BS gain; ``backhaul_gain[s]`` the
    MBS-to-SBS gain of SBS s; ``cross_gain[s, k]`` the SBS-to-SBS gain.
    """

    config: ScenarioConfig
    mbs_pos: np.ndarray       # (M, 2)
    sbs_pos: np.ndarray       # (S, 2)
    user_pos: np.ndarray      # (U, 2)
    mvno_of_user: np.ndarray  # (U,)
    col_inp: np.ndarray       # (B,)
    col_sbs: np.ndarray       # (B,) global SBS index, -1 for MBS
    access_gain: np.ndarray   # (U, B)
    backhaul_gain: np.ndarray  # (S,)
    cross_gain: np.ndarray    # (S, S)
    allowed: np.ndarray       # (U, B) candidate-BS mask (virtualization ablation)
    delta_u: np.ndarray       # (U,) per-user payment

    def __post_init__(self):
        for name in ("mbs_pos", "sbs_pos", "user_pos", "mvno_of_user", "col_inp",
                     "col_sbs", "access_gain", "backhaul_gain", "cross_gain",
                     "allowed", "delta_u"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def num_users(self) -> int:
        return self.user_pos.shape[0]

    @property
    def num_cols(self) -> int:
        return self.col_inp.shape[0]

    @property
    def num_inps(self) -> int:
        return self.config.num_inps

    def inp_cols(self, m: int) -> np.ndarray:
        return np.nonzero(self.col_inp == m)[0]

    def mbs_col(self, m: int) -> int:
        return int(np.nonzero((self.col_inp == m) & (self.col_sbs < 0))[0][0])

    @property
    def sbs_col_mask(self) -> np.ndarray:
        return self.col_sbs >= 0

    def users_of_mvno(self, i: int) -> np.ndarray:
        return np.nonzero(self.mvno_of_user == i)[0]

    def restrict_to_home_inp(self) -> "Scenario":
        """Candidate sets for the no-virtualization ablation.

        MVNO i's users may only use InP (i mod M); arbitrary but fixed.
        """
        home = self.mvno_of_user % self.config.num_inps
        allowed = home[:, None] == self.col_inp[None, :]
        return dataclasses.replace(self, allowed=allowed)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Sample a scenario: seeded, deterministic, gains strictly positive.

    MBSs sit at the centers of M vertical strips (for M=2: centers of the
    left and right halves); SBSs and users are uniform over the square.
    """
    side = float(config.area_side_m)
    m_count = config.num_inps
    s_total = m_count * config.sbs_per_inp
    u_total = config.num_users

    root = np.random.SeedSequence(config.rng_seed)
    ss_sbs, ss_users, ss_shadow = root.spawn(3)

    mbs_pos = np.column_stack([
        (np.arange(m_count) + 0.5) * side / m_count,
        np.full(m_count, side / 2.0),
    ])
    sbs_pos = np.random.default_rng(ss_sbs).uniform(0.0, side, size=(s_total, 2))
    user_pos = np.random.default_rng(ss_users).uniform(0.0, side, size=(u_total, 2))
    mvno_of_user = np.repeat(np.arange(config.num_mvnos), config.users_per_mvno)

    col_inp = np.repeat(np.arange(m_count), 1 + config.sbs_per_inp)
    col_sbs = np.full(col_inp.shape[0], -1, dtype=int)
    s = 0
    for b in range(col_inp.shape[0]):
        first = b == 0 or col_inp[b] != col_inp[b - 1]
        if not first:
            col_sbs[b] = s
            s += 1

    col_pos = np.where((col_sbs >= 0)[:, None], sbs_pos[np.maximum(col_sbs, 0)],
                       mbs_pos[col_inp])

    rng_sh = np.random.default_rng(ss_shadow)
    exp_ue = config.pathloss_exponent
    exp_bs = config.bs_pathloss_exponent
    sigma = config.shadowing_sigma_db

    shadow_access = rng_sh.normal(0.0, sigma, size=(u_total, col_inp.shape[0]))
    access_gain = path_gain(user_pos[:, None, :], col_pos[None, :, :], exp_ue, shadow_access)

    shadow_bh = rng_sh.normal(0.0, sigma, size=s_total)
    owner = np.repeat(np.arange(m_count), config.sbs_per_inp)
    backhaul_gain = path_gain(mbs_pos[owner], sbs_pos, exp_bs, shadow_bh) \
        if s_total else np.zeros(0)

    cross_gain = np.zeros((s_total, s_total))
    if s_total:
        shadow_x = rng_sh.normal(0.0, sigma, size=(s_total, s_total))
        shadow_x = np.triu(shadow_x, 1)
        shadow_x = shadow_x + shadow_x.T
        cross_gain = path_gain(sbs_pos[:, None, :], sbs_pos[None, :, :], exp_bs, shadow_x)
        np.fill_diagonal(cross_gain, 0.0)

    allowed = np.ones((u_total, col_inp.shape[0]), dtype=bool)
    delta_u = np.full(u_total, float(config.user_payment))

    return Scenario(config=config, mbs_pos=mbs_pos, sbs_pos=sbs_pos, user_pos=user_pos,
                    mvno_of_user=mvno_of_user, col_inp=col_inp, col_sbs=col_sbs,
                    access_gain=access_gain, backhaul_gain=backhaul_gain,
                    cross_gain=cross_gain, allowed=allowed, delta_u=delta_u)


# -- config file and CSV plumbing --------------------------------------------

_CONFIG_FIELDS = [f.name for f in dataclasses.fields(ScenarioConfig)]
_INT_FIELDS = {"num_inps", "num_mvnos", "sbs_per_inp", "users_per_mvno", "rng_seed"}


def read_config(path) -> ScenarioConfig:
    """Parse a key = value config file (comments with '#', lists with commas)."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in _INT_FIELDS:
                values[key] = int(val)
            elif "," in val:
                values[key] = tuple(float(v) for v in val.split(","))
            else:
                values[key] = float(val)
    return ScenarioConfig(**values)


def write_config(config: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write("# sballoc scenario config\n")
        for name in _CONFIG_FIELDS:
            val = getattr(config, name)
            if isinstance(val, tuple):
                fh.write(f"{name} = {', '.join(repr(v) for v in val)}\n")
            elif isinstance(val, int):
                fh.write(f"{name} = {val}\n")
            else:
                fh.write(f"{name} = {val!r}\n")


def write_gains_csv(scenario: Scenario, path) -> None:
    """Dump every gain entry, one row each, for debugging."""
    with open(path, "w") as fh:
        fh.write("# sballoc csv v1 gains\n")
        fh.write("kind,user,inp,bs,gain\n")
        for u in range(scenario.num_users):
            for b in range(scenario.num_cols):
                fh.write(f"access,{u},{scenario.col_inp[b]},{b},"
                         f"{scenario.access_gain[u, b]!r}\n")
        for s in range(scenario.backhaul_gain.shape[0]):
            m = scenario.col_inp[np.nonzero(scenario.col_sbs == s)[0][0]]
            fh.write(f"backhaul,-1,{m},{s},{scenario.backhaul_gain[s]!r}\n")
        ns = scenario.cross_gain.shape[0]
        for s in range(ns):
            for k in range(ns):
                if s != k:
                    fh.write(f"cross,{s},-1,{k},{scenario.cross_gain[s, k]!r}\n")
