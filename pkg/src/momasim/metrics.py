"""SINR, rates, large-array predictions and capacity models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization
from .codes import SpreadingAssignment
from .errors import InvalidParameterError
from .phy import (MRC, SIC, SU, CombinedSamples, EffectiveCodeSet, SicResult,
                  combined_noise_power, combiner_weights, cross_gain_matrix)
from .scenario import SystemConfig, UserPopulation, dbm_to_watts

LORA_CHANNELS = 16
LORA_CONCURRENT_PER_CHANNEL = 7


@dataclass(frozen=True)
class SinrReport:
    """Power budget of one or more decision samples.

    ``intra_class`` collects interference from users of the target's own
    class, ``inter_class`` from all other classes.
    """

    users: np.ndarray
    detector: str
    signal: np.ndarray
    intra_class: np.ndarray
    inter_class: np.ndarray
    noise: np.ndarray

    @property
    def interference(self) -> np.ndarray:
        return self.intra_class + self.inter_class

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / (self.interference + self.noise)

    @property
    def rate(self) -> np.ndarray:
        return rate(self.sinr)


def rate(sinr):
    """Shannon rate log2(1 + sinr) in bit/s/Hz."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise InvalidParameterError("SINR must be non-negative")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def _split(power_row: np.ndarray, k: int, class_index: np.ndarray):
    same = class_index == class_index[k]
    same[k] = False
    other = class_index != class_index[k]
    return float(power_row[same].sum()), float(power_row[other].sum())


def _single_user(eff: EffectiveCodeSet, assignment: SpreadingAssignment, pop: UserPopulation,
                 noise_var: float, weights: np.ndarray, detector: str) -> SinrReport:
    k = eff.target
    c_k = assignment.codes[k]
    proj = np.abs(eff.codes @ c_k.conj()) ** 2 * pop.amplitudes ** 2
    intra, inter = _split(proj, k, assignment.class_index)
    m = weights.shape[1]
    noise = combined_noise_power(weights[None], c_k[None], noise_var, m)
    return SinrReport(np.array([k]), detector, np.array([proj[k]]), np.array([intra]),
                      np.array([inter]), noise)


def sinr_ld(eff: EffectiveCodeSet, assignment: SpreadingAssignment, pop: UserPopulation,
            noise_var: float, weights: np.ndarray) -> SinrReport:
    """Single-user SINR of an LD user; ``weights`` is its ``(N, M)`` combiner."""
    if assignment.is_hd[eff.target]:
        raise InvalidParameterError(f"user {eff.target} is not an LD user")
    return _single_user(eff, assignment, pop, noise_var, weights, "ld")


def sinr_hd_su(eff: EffectiveCodeSet, assignment: SpreadingAssignment, pop: UserPopulation,
               noise_var: float, weights: np.ndarray) -> SinrReport:
    """Single-user SINR of an HD user; the noise term uses the despreading code."""
    if not assignment.is_hd[eff.target]:
        raise InvalidParameterError(f"user {eff.target} is not an HD user")
    return _single_user(eff, assignment, pop, noise_var, weights, SU)


def single_user_report(ch: ChannelRealization, d: np.ndarray, targets: Sequence[int],
                       assignment: SpreadingAssignment, pop: UserPopulation,
                       noise_var: float, detector: str = SU) -> SinrReport:
    """Vectorised single-user SINR budget for many targets at once."""
    t = np.asarray(targets, dtype=int)
    z = cross_gain_matrix(ch, d, t, assignment)
    power = np.abs(z) ** 2 * pop.amplitudes[None, :] ** 2
    signal = power[np.arange(t.size), t]
    ci = assignment.class_index
    same = ci[t][:, None] == ci[None, :]
    same[np.arange(t.size), t] = False
    intra = np.where(same, power, 0.0).sum(axis=1)
    inter = np.where(ci[t][:, None] != ci[None, :], power, 0.0).sum(axis=1)
    noise = combined_noise_power(d, assignment.codes[t], noise_var, ch.num_antennas)
    return SinrReport(t, detector, signal, intra, inter, noise)


def sinr_hd_sic(sic: SicResult, effective: np.ndarray, combined: CombinedSamples,
                pop: UserPopulation, noise_var: float) -> SinrReport:
    """Per-stage SINR of MMSE-SIC: only not-yet-cancelled HD users and LD users interfere."""
    a2 = pop.amplitudes ** 2
    ld = pop.ld_ids
    m = combined.d.shape[2]
    n_st = sic.order.size
    signal, intra, inter = np.empty(n_st), np.empty(n_st), np.empty(n_st)
    for i, k in enumerate(sic.order):
        ceff = effective[sic.rows[i]]
        proj = np.abs(ceff @ sic.filters[i].conj()) ** 2 * a2
        later = [j for j in sic.active[i] if j != k]
        signal[i] = proj[k]
        intra[i] = proj[later].sum()
        inter[i] = proj[ld].sum()
    noise = combined_noise_power(combined.d[sic.rows], sic.filters, noise_var, m)
    return SinrReport(sic.order.copy(), SIC, signal, intra, inter, noise)


def perfect_orthogonality_bound(report: SinrReport, zero: str = "inter_class") -> np.ndarray:
    """Rate with interference removed, signal and noise unchanged.

    ``zero="inter_class"`` removes only the other classes' interference, the
    benchmark for HD users under class-orthogonal access; ``zero="all"``
    removes every interference term.
    """
    if zero == "inter_class":
        return rate(report.signal / (report.intra_class + report.noise))
    if zero == "all":
        return rate(report.signal / report.noise)
    raise InvalidParameterError(f"unknown bound variant {zero!r}")


def asymptotic_sinr_ld(g_k, p_ld: float, mean_gain: float, k_l: int, n_l: int, m: int,
                       noise_var: float):
    c = p_ld * mean_gain
    return np.asarray(g_k) * p_ld / (c * k_l / (n_l * m) + noise_var / m)


@dataclass(frozen=True)
class TheoremDiagnostics:
    """Large-array interference diagnostics for a set of target users.

    ``interference[i]`` is the single-user interference power of target
    ``i``; for LD targets ``centering[i]`` is the predicted limit
    ``c K_l / (N_l M)`` (zero for HD targets).
    """

    targets: np.ndarray
    is_hd: np.ndarray
    interference: np.ndarray
    centering: np.ndarray
    self_gain: np.ndarray
    m: int

    @property
    def hd_interference(self) -> np.ndarray:
        return self.interference[self.is_hd]

    @property
    def ld_excess(self) -> np.ndarray:
        return (self.interference - self.centering)[~self.is_hd]

    @property
    def ld_interference(self) -> np.ndarray:
        return self.interference[~self.is_hd]


def theorem_diagnostics(assignment: SpreadingAssignment, ch: ChannelRealization,
                        pop: UserPopulation, targets: Optional[Sequence[int]] = None,
                        combiner: str = MRC) -> TheoremDiagnostics:
    if targets is None:
        targets = range(len(pop))
    t = np.asarray(list(targets), dtype=int)
    d = combiner_weights(ch, t, combiner, pop)
    z = cross_gain_matrix(ch, d, t, assignment)
    power = np.abs(z) ** 2 * pop.amplitudes[None, :] ** 2
    self_gain = z[np.arange(t.size), t]
    interference = power.sum(axis=1) - power[np.arange(t.size), t]
    m = ch.num_antennas
    centering = np.zeros(t.size)
    ld = pop.ld_ids
    if ld.size:
        p_ld = float(pop.powers[ld].mean())
        c = p_ld * pop.mean_gain
        ci = assignment.class_index
        for i, k in enumerate(t):
            if ci[k] > 0:
                spec = pop.plan.classes[ci[k]]
                centering[i] = c * spec.user_count / (spec.code_count * m)
    return TheoremDiagnostics(t, assignment.is_hd[t], interference, centering, self_gain, m)


def ld_capacity(target_rate: float, n_l: int, m: int, p_ld: float, mean_gain: float,
                worst_gain: float, noise_var: float) -> int:
    """Largest LD class size whose large-array SINR at ``worst_gain`` meets the target.

    Pass the cell-edge gain for a guarantee to every admitted user, or the
    mean gain for the typical user.
    """
    if target_rate <= 0:
        raise InvalidParameterError("target rate must be positive")
    if target_rate > 1000:
        return 0
    need = 2.0 ** target_rate - 1.0
    c = p_ld * mean_gain

    def feasible(k: int) -> bool:
        return worst_gain * p_ld / (c * k / (n_l * m) + noise_var / m) >= need

    est = (n_l * m / c) * (worst_gain * p_ld / need - noise_var / m)
    k = max(int(math.floor(est)), 0) if math.isfinite(est) else 0
    while feasible(k + 1):
        k += 1
    while k > 0 and not feasible(k):
        k -= 1
    return k


def baseline_lora(spatial_gain: int, channels: int = LORA_CHANNELS,
                  per_channel: int = LORA_CONCURRENT_PER_CHANNEL) -> int:
    """Concurrent LoRa transmissions: channels x spreading factors x spatial reuse."""
    if spatial_gain < 1:
        raise InvalidParameterError("spatial gain must be >= 1")
    return channels * per_channel * spatial_gain


def narrowband_snr(sys: SystemConfig, worst_gain: float, tx_power_dbm: float = 23.0,
                   num_antennas: Optional[int] = None) -> float:
    """Per-subcarrier SNR of a cell-edge narrow-band user putting all power on one SC."""
    m = sys.num_antennas if num_antennas is None else num_antennas
    return m * worst_gain * float(dbm_to_watts(tx_power_dbm)) / sys.noise_var


def baseline_narrowband(target_rate: float, reserved_scs: int = 72, spatial_gain: int = 8,
                        per_sc_snr: float = 1.0) -> int:
    """Orthogonal FDMA on the reserved subcarriers; each user takes whole SCs."""
    if reserved_scs < 1:
        raise InvalidParameterError("reserved_scs must be >= 1")
    per_sc = math.log2(1.0 + per_sc_snr)
    if per_sc <= 0:
        return 0
    need = max(1, math.ceil(target_rate / per_sc - 1e-12))
    return spatial_gain * (reserved_scs // need)


def rate_to_kbps(r, subcarrier_spacing: float = 15e3):
    """One despread symbol per OFDM symbol: bits/symbol times symbol rate."""
    return np.asarray(r) * subcarrier_spacing / 1e3
