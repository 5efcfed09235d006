"""Achievable link rates for macro access, small-cell access, and FD self-backhaul.

All rates are Shannon-style, base-2 logs, in bit/s.  The macro band is the
fraction alpha_m of InP m's spectrum; small cells and their backhaul share
the remaining (1 - alpha_m).  SNR terms use power spectral densities so that
P*h/sigma^2 is per-Hz consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario


def macro_access_rate(alpha_m, bandwidth_hz, power_psd, gain, noise_psd):
    """Rate of a macro user: alpha * B * log2(1 + P h / sigma^2).

    Macro users see no interference: InPs use disjoint bands and the
    macro/small split is orthogonal.
    """
    return alpha_m * bandwidth_hz * np.log2(1.0 + power_psd * gain / noise_psd)


def small_access_rate(alpha_m, bandwidth_hz, power_psd, gain, cochannel_gains, noise_psd):
    """Rate of a small-cell user with co-channel interference from same-InP SBSs."""
    interference = power_psd * np.sum(cochannel_gains)
    sinr = power_psd * gain / (interference + noise_psd)
    return (1.0 - alpha_m) * bandwidth_hz * np.log2(1.0 + sinr)


def backhaul_rate(alpha_m, bandwidth_hz, macro_power_psd, gain, residual_si,
                  sbs_power_psd, cross_gains, noise_psd):
    """MBS-to-SBS rate while the SBS transmits in-band (FD self-backhaul).

    The SBS's own downlink leaks residual_si * P_s into its receiver; other
    SBSs of the same InP add co-channel interference.
    """
    si = residual_si * sbs_power_psd
    interference = sbs_power_psd * np.sum(cross_gains)
    sinr = macro_power_psd * gain / (si + interference + noise_psd)
    return (1.0 - alpha_m) * bandwidth_hz * np.log2(1.0 + sinr)


@dataclass
class RateTable:
    """Per-link rates at a fixed spectrum split.

    access[u, b]: rate user u would get from column b.
    backhaul[b]: backhaul rate of column b's SBS; +inf on MBS columns so the
    backhaul never constrains macro access.
    """

    access: np.ndarray
    backhaul: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.access.setflags(write=False)
        self.backhaul.setflags(write=False)
        self.alpha.setflags(write=False)


def build_rate_table(scenario: Scenario, alpha) -> RateTable:
    """Vectorized rates for every user/BS pair and every SBS backhaul link."""
    cfg = scenario.config
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (cfg.num_inps,):
        raise ValueError(f"alpha must have shape ({cfg.num_inps},)")
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("alpha entries must lie in [0, 1]")

    u_count, b_count = scenario.access_gain.shape
    access = np.zeros((u_count, b_count))
    backhaul = np.full(b_count, np.inf)
    sigma = cfg.noise_psd

    for m in range(cfg.num_inps):
        cols = scenario.inp_cols(m)
        sbs_cols = cols[scenario.col_sbs[cols] >= 0]
        mbs = scenario.mbs_col(m)
        bw = cfg.bandwidth_hz[m]
        p_psd = cfg.macro_power_psd(m)
        ps_psd = cfg.sbs_power_psd(m)

        snr = p_psd * scenario.access_gain[:, mbs] / sigma
        access[:, mbs] = alpha[m] * bw * np.log2(1.0 + snr)

        if sbs_cols.size:
            gains = scenario.access_gain[:, sbs_cols]
            total = ps_psd * gains.sum(axis=1, keepdims=True)
            sinr = ps_psd * gains / (total - ps_psd * gains + sigma)
            access[:, sbs_cols] = (1.0 - alpha[m]) * bw * np.log2(1.0 + sinr)

            s_idx = scenario.col_sbs[sbs_cols]
            cross = scenario.cross_gain[np.ix_(s_idx, s_idx)].sum(axis=1)
            si = cfg.residual_si_linear(m) * ps_psd
            sinr_bh = p_psd * scenario.backhaul_gain[s_idx] / (si + ps_psd * cross + sigma)
            backhaul[sbs_cols] = (1.0 - alpha[m]) * bw * np.log2(1.0 + sinr_bh)

    return RateTable(access=access, backhaul=backhaul, alpha=alpha.copy())


def write_rates_csv(table: RateTable, scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write("# sballoc csv v1 rates\n")
        fh.write("kind,user,inp,bs,rate\n")
        for u in range(table.access.shape[0]):
            for b in range(table.access.shape[1]):
                fh.write(f"access,{u},{scenario.col_inp[b]},{b},{table.access[u, b]!r}\n")
        for b in range(table.access.shape[1]):
            if scenario.col_sbs[b] >= 0:
                fh.write(f"backhaul,-1,{scenario.col_inp[b]},{b},{table.backhaul[b]!r}\n")
