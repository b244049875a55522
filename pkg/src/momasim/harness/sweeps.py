"""Parameter sweeps: LD capacity vs target rate, HD rate vs LD load, and
large-array diagnostics vs antenna count."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ..errors import InvalidParameterError
from ..metrics import (baseline_lora, baseline_narrowband, ld_capacity, narrowband_snr,
                       rate_to_kbps, theorem_diagnostics)
from ..scenario import ClassOrderingWarning, dbm_to_watts, expected_gain_uniform, pathloss_gain
from .config import Scenario
from .runner import Aggregate, _draw, run_monte_carlo, run_trials


@dataclass(frozen=True)
class SweepRow:
    x: float
    cells: Dict[str, Aggregate]


@dataclass(frozen=True)
class SweepTable:
    x_name: str
    series: tuple
    rows: tuple
    samples: Dict[tuple, np.ndarray] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.cells[name].mean for r in self.rows])

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.rows])


def _exact(v) -> Aggregate:
    return Aggregate(float(v), 0.0, 1)


def _sorted_grid(grid: Sequence[float], name: str) -> list:
    g = [float(x) for x in grid]
    if not g:
        raise InvalidParameterError(f"{name} grid is empty")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise InvalidParameterError(f"{name} grid must be strictly increasing")
    return g


def ld_gain_reference(scenario: Scenario):
    """(mean gain, cell-edge gain) for the scenario's placement interval."""
    s, p = scenario.system, scenario.placement
    if p.unit_gain:
        return 1.0, 1.0
    args = (s.carrier_freq, s.bs_height, s.ue_height, s.area_correction_db)
    return expected_gain_uniform(p.min_m, p.max_m, *args), pathloss_gain(p.max_m, *args)


def sweep_ld_capacity(scenario: Scenario, rate_grid: Optional[Sequence[float]] = None,
                      verify: Optional[bool] = None, verify_trials: int = 5) -> SweepTable:
    """Served LD users per OFDM symbol vs target rate, with LoRa and narrow-band baselines.

    The MOMA column inverts the large-array SINR for the first LD class and
    multiplies by the number of instances.  ``sweep.gain_policy`` picks the
    reference user: ``mean`` (typical user) or ``min`` (cell edge).
    """
    sw, sys = scenario.sweep, scenario.system
    grid = _sorted_grid(sw.rate_grid if rate_grid is None else rate_grid, "rate")
    verify = sw.verify if verify is None else verify
    ld = scenario.plan.ld_classes[0]
    p_ld = float(dbm_to_watts(ld.tx_power_dbm))
    g_mean, g_min = ld_gain_reference(scenario)
    if sw.gain_policy not in ("mean", "min"):
        raise InvalidParameterError(f"unknown gain policy {sw.gain_policy!r}")
    g_ref = g_mean if sw.gain_policy == "mean" else g_min
    snr_sc = narrowband_snr(sys, g_min, sw.narrowband_power_dbm)
    lora = baseline_lora(sw.lora_spatial_gain)
    series = ["moma", "moma_per_instance", "lora", "narrowband", "moma_over_narrowband", "rate_kbps"]
    if verify:
        series.append("sim_fraction_met")
    rows = []
    for r in grid:
        k_inst = ld_capacity(r, ld.code_count, sys.num_antennas, p_ld, g_mean, g_ref, sys.noise_var)
        moma = k_inst * sys.num_instances
        nb = baseline_narrowband(r, sw.reserved_scs, sw.spatial_gain, snr_sc)
        cells = {
            "moma": _exact(moma),
            "moma_per_instance": _exact(k_inst),
            "lora": _exact(lora),
            "narrowband": _exact(nb),
            "moma_over_narrowband": _exact(moma / nb if nb else float("inf")),
            "rate_kbps": _exact(rate_to_kbps(r, sys.subcarrier_spacing)),
        }
        if verify:
            cells["sim_fraction_met"] = _verify_capacity(scenario, k_inst, r, g_ref, verify_trials)
        rows.append(SweepRow(r, cells))
    return SweepTable("target_rate", tuple(series), tuple(rows))


def _verify_capacity(scenario: Scenario, k: int, target: float, g_ref: float, trials: int) -> Aggregate:
    """Simulate K admitted LD users; fraction of those at or above the reference gain meeting the target."""
    if k == 0:
        return Aggregate(float("nan"), float("nan"), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClassOrderingWarning)
        sc = scenario.with_ld_users(k).with_run(trials=trials, detector="su")
        results = run_trials(sc)
    vals = []
    for t in results:
        ok = t.gains[~t.is_hd] >= g_ref
        if ok.any():
            vals.append(float(np.mean(t.ld_rate[ok] >= target)))
    return Aggregate.of(vals)


def sweep_hd_rate(scenario: Scenario, ld_loads: Optional[Sequence[int]] = None,
                  profiles: Optional[Sequence[str]] = None, include_sic: bool = False,
                  workers: Optional[int] = None) -> SweepTable:
    """Mean HD rate (single-user, optional SIC, bound) vs LD users per instance."""
    sw = scenario.sweep
    loads = _sorted_grid(sw.ld_loads if ld_loads is None else ld_loads, "LD load")
    profiles = tuple(sw.profiles if profiles is None else profiles)
    kinds = ["su", "bound"] + (["sic"] if include_sic else [])
    series = tuple(f"{kind}_{p}" for p in profiles for kind in kinds) + ("k_ld_per_symbol",)
    metric = {"su": "hd_rate_su", "bound": "hd_rate_bound", "sic": "hd_rate_sic"}
    rows, samples = [], {}
    for load in loads:
        cells = {"k_ld_per_symbol": _exact(int(load) * scenario.system.num_instances)}
        for p in profiles:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ClassOrderingWarning)
                sc = scenario.with_ld_users(int(load)).with_channel(profile=p)
                if include_sic:
                    sc = sc.with_run(include_sic=True)
                mc = run_monte_carlo(sc, workers)
            for kind in kinds:
                name = f"{kind}_{p}"
                cells[name] = mc.aggregates[metric[kind]]
                samples[(load, name)] = mc.samples[metric[kind]]
        rows.append(SweepRow(load, cells))
    return SweepTable("k_ld", series, tuple(rows), samples)


@dataclass(frozen=True)
class TheoremCampaign:
    """Pooled large-array diagnostics per antenna count."""

    m_grid: tuple
    hd_interference: Dict[int, np.ndarray]
    ld_interference: Dict[int, np.ndarray]
    ld_centering: Dict[int, np.ndarray]
    self_gain: Dict[int, np.ndarray]
    trials: int

    def to_table(self) -> SweepTable:
        rows = []
        for m in self.m_grid:
            hd, ld, cen, sg = (self.hd_interference[m], self.ld_interference[m],
                               self.ld_centering[m], self.self_gain[m])
            cells = {
                "hd_interference_median": _exact(np.median(hd) if hd.size else np.nan),
                "hd_interference_mean": Aggregate.of(hd),
                "ld_interference_mean": Aggregate.of(ld),
                "ld_centering": _exact(cen.mean() if cen.size else np.nan),
                "ld_excess_mean": Aggregate.of(ld - cen),
                "self_gain_mean": Aggregate.of(sg.real),
            }
            rows.append(SweepRow(m, cells))
        return SweepTable("m", tuple(rows[0].cells), tuple(rows))


def theorem_campaign(scenario: Scenario, m_grid: Optional[Sequence[int]] = None,
                     alpha: Optional[float] = None, trials: Optional[int] = None) -> TheoremCampaign:
    """Collect interference and self-gain diagnostics over trials for each M.

    With ``alpha`` set, the first LD class is resized to ``round(alpha * M)``
    users for each antenna count.  Only codes, channels and placement are
    drawn; the decision chain itself is not needed.
    """
    sw = scenario.sweep
    grid = [int(m) for m in _sorted_grid(sw.m_grid if m_grid is None else m_grid, "M")]
    alpha = sw.alpha if alpha is None else alpha
    trials = scenario.run.trials if trials is None else trials
    out = {name: {} for name in ("hd", "ld", "cen", "sg")}
    for m in grid:
        hd, ld, cen, sg = [], [], [], []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClassOrderingWarning)
            sc = scenario.with_system(num_antennas=m).with_run(trials=trials)
            if alpha is not None:
                sc = sc.with_ld_users(max(1, int(round(alpha * m))))
            for i in range(trials):
                pop, assignment, ch, _ = _draw(sc, i)
                dg = theorem_diagnostics(assignment, ch, pop)
                hd.append(dg.hd_interference)
                ld.append(dg.ld_interference)
                cen.append(dg.centering[~dg.is_hd])
                sg.append(dg.self_gain)
        out["hd"][m] = np.concatenate(hd)
        out["ld"][m] = np.concatenate(ld)
        out["cen"][m] = np.concatenate(cen)
        out["sg"][m] = np.concatenate(sg)
    return TheoremCampaign(tuple(grid), out["hd"], out["ld"], out["cen"], out["sg"], trials)
