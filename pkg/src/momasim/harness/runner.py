"""Monte Carlo execution of the full uplink chain.

Seed splitting: every random stream of trial ``i`` comes from
``SeedSequence(entropy=base_seed, spawn_key=(i, stream))`` with a fixed
integer tag per stream (placement, combining, channel, symbols, noise).
Streams are stateless functions of ``(base_seed, i, tag)``, so adding a
stream or changing the number of workers never perturbs existing draws.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..channel import sample_small_scale_channel
from ..codes import (assign_codes, empty_combining_matrix, generate_hadamard, partition_codebook,
                     sample_combining_matrix)
from ..errors import MomaError
from ..metrics import (SinrReport, TheoremDiagnostics, perfect_orthogonality_bound, sinr_hd_sic,
                       single_user_report, theorem_diagnostics)
from ..phy import (MRC, SIC, combine, detect_hd_mmse_sic, draw_symbols, effective_code_tensor,
                   select_hd_detector, spread, superpose)
from ..scenario import ClassOrderingWarning, build_population
from .config import Scenario

PLACEMENT, COMBINING, CHANNEL, SYMBOLS, NOISE = range(5)


def stream_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial, stream)))


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    seed: int
    hd_detector: str
    users: np.ndarray
    class_index: np.ndarray
    gains: np.ndarray
    su: SinrReport
    hd_rate_bound: np.ndarray
    hd_rate_bound_all: np.ndarray
    decision_samples: np.ndarray
    sic: Optional[SinrReport] = None
    diagnostics: Optional[TheoremDiagnostics] = None

    @property
    def is_hd(self) -> np.ndarray:
        return self.class_index == 0

    @property
    def hd_rate_su(self) -> np.ndarray:
        return self.su.rate[self.is_hd]

    @property
    def ld_rate(self) -> np.ndarray:
        return self.su.rate[~self.is_hd]

    @property
    def hd_rate_sic(self) -> Optional[np.ndarray]:
        """SIC rates in user-id order (None when SIC did not run)."""
        if self.sic is None:
            return None
        out = np.empty(self.sic.users.size)
        hd_ids = self.users[self.is_hd]
        pos = {int(u): i for i, u in enumerate(hd_ids)}
        for u, r in zip(self.sic.users, self.sic.rate):
            out[pos[int(u)]] = r
        return out

    def metrics(self) -> Dict[str, float]:
        """Per-trial scalar summaries used for aggregation."""
        out = {}
        hd = self.hd_rate_su
        if hd.size:
            out["hd_rate_su"] = float(hd.mean())
            out["hd_sum_rate_su"] = float(hd.sum())
            out["hd_rate_bound"] = float(self.hd_rate_bound.mean())
            out["hd_rate_bound_all"] = float(self.hd_rate_bound_all.mean())
            out["hd_inter_class_interference"] = float(self.su.inter_class[self.is_hd].mean())
        if self.sic is not None:
            out["hd_rate_sic"] = float(self.sic.rate.mean())
            out["hd_sum_rate_sic"] = float(self.sic.rate.sum())
        ld = self.ld_rate
        if ld.size:
            out["ld_rate"] = float(ld.mean())
            out["ld_rate_min"] = float(ld.min())
            out["ld_inter_class_interference"] = float(self.su.inter_class[~self.is_hd].mean())
        if self.diagnostics is not None:
            dg = self.diagnostics
            if dg.hd_interference.size:
                out["thm_hd_interference"] = float(dg.hd_interference.mean())
            if dg.ld_interference.size:
                out["thm_ld_interference"] = float(dg.ld_interference.mean())
                out["thm_ld_excess"] = float(dg.ld_excess.mean())
            out["thm_self_gain"] = float(dg.self_gain.real.mean())
        return out


def _draw(scenario: Scenario, trial_index: int):
    run = scenario.run
    fixed = 0 if run.redraw == "positions" else trial_index
    sys = scenario.system
    plan = scenario.plan
    pop = build_population(plan, scenario.placement.min_m, scenario.placement.max_m, sys,
                           stream_rng(run.seed, trial_index, PLACEMENT),
                           unit_gain=scenario.placement.unit_gain)
    rng_w = stream_rng(run.seed, fixed, COMBINING)
    ws = [sample_combining_matrix(c.code_count, c.user_count, rng_w, run.combining)
          if c.user_count else empty_combining_matrix(c.code_count) for c in plan.ld_classes]
    partition = partition_codebook(generate_hadamard(sys.spreading_length), plan)
    assignment = assign_codes(partition, ws, pop)
    ch = sample_small_scale_channel(scenario.channel.resolve(), sys, len(pop),
                                    stream_rng(run.seed, fixed, CHANNEL), run.instance,
                                    common=scenario.channel.common)
    return pop, assignment, ch, fixed


def run_trial(scenario: Scenario, trial_index: int) -> TrialResult:
    try:
        return _run_trial(scenario, trial_index)
    except MomaError as e:
        raise type(e)(f"scenario {scenario.hash[:12]} trial {trial_index}: {e}") from e


def _run_trial(scenario: Scenario, trial_index: int) -> TrialResult:
    run = scenario.run
    sys = scenario.system
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClassOrderingWarning)
        pop, assignment, ch, fixed = _draw(scenario, trial_index)
    k = len(pop)
    symbols = draw_symbols(stream_rng(run.seed, fixed, SYMBOLS), k, run.symbols)
    tx = spread(assignment, pop, symbols, sys)
    sigma2 = sys.noise_var
    rx = superpose(tx, ch, pop, sigma2, stream_rng(run.seed, fixed, NOISE))
    mode = scenario.channel.combiner
    combined = combine(rx, ch, None, mode, pop)
    su = single_user_report(ch, combined.d, combined.targets, assignment, pop, sigma2)
    hd = pop.is_hd
    hd_spec = scenario.plan.hd_class
    detector = select_hd_detector(max(hd_spec.user_count, 1), ch.num_antennas,
                                  hd_spec.code_count, run.rho, run.detector)
    sic_report = None
    if hd.any() and (detector == SIC or run.include_sic):
        hd_ids = pop.hd_ids
        effective = effective_code_tensor(ch, combined.d[hd_ids], assignment)
        hd_combined = type(combined)(combined.r[hd_ids], combined.d[hd_ids],
                                     tuple(int(i) for i in hd_ids), mode)
        sic = detect_hd_mmse_sic(hd_combined, effective, pop, sigma2, symbols=symbols,
                                 recompute=run.sic_recompute,
                                 decision_directed=run.decision_directed)
        sic_report = sinr_hd_sic(sic, effective, hd_combined, pop, sigma2)
    decision = np.einsum("tn,tn->t", assignment.codes.conj(), combined.r)
    diagnostics = None
    if run.theorem:
        diagnostics = theorem_diagnostics(assignment, ch, pop, combiner=MRC)
    hd_su = _subset(su, hd)
    return TrialResult(
        trial_index=trial_index,
        seed=run.seed,
        hd_detector=detector,
        users=np.arange(k),
        class_index=pop.class_index.copy(),
        gains=pop.gains.copy(),
        su=su,
        hd_rate_bound=perfect_orthogonality_bound(hd_su, "inter_class") if hd.any() else np.empty(0),
        hd_rate_bound_all=perfect_orthogonality_bound(hd_su, "all") if hd.any() else np.empty(0),
        decision_samples=decision,
        sic=sic_report,
        diagnostics=diagnostics,
    )


def _subset(rep: SinrReport, mask: np.ndarray) -> SinrReport:
    return SinrReport(rep.users[mask], rep.detector, rep.signal[mask], rep.intra_class[mask],
                      rep.inter_class[mask], rep.noise[mask])


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    n: int

    @property
    def ci95(self) -> float:
        """Half-width of the normal-approximation 95% confidence interval."""
        return 1.96 * self.std / math.sqrt(self.n) if self.n > 1 else 0.0

    @classmethod
    def of(cls, values) -> "Aggregate":
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            return cls(float("nan"), float("nan"), 0)
        mean = math.fsum(v) / n
        std = math.sqrt(math.fsum((v - mean) ** 2) / (n - 1)) if n > 1 else 0.0
        return cls(mean, std, n)


@dataclass(frozen=True)
class MonteCarloSummary:
    scenario: Scenario
    trials: tuple
    aggregates: Dict[str, Aggregate] = field(default_factory=dict)
    samples: Dict[str, np.ndarray] = field(default_factory=dict)


def _trial_job(args):
    scenario, i = args
    return run_trial(scenario, i)


def run_trials(scenario: Scenario, workers: Optional[int] = None) -> List[TrialResult]:
    n = scenario.run.trials
    workers = scenario.run.workers if workers is None else workers
    jobs = [(scenario, i) for i in range(n)]
    if workers and workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    return sorted(results, key=lambda r: r.trial_index)


def aggregate(trials) -> tuple:
    """Mean/std/count per metric over trials, independent of completion order."""
    ordered = sorted(trials, key=lambda r: r.trial_index)
    per = [t.metrics() for t in ordered]
    names = sorted({k for p in per for k in p})
    samples = {k: np.array([p[k] for p in per if k in p]) for k in names}
    return {k: Aggregate.of(v) for k, v in samples.items()}, samples


def run_monte_carlo(scenario: Scenario, workers: Optional[int] = None) -> MonteCarloSummary:
    trials = run_trials(scenario, workers)
    aggs, samples = aggregate(trials)
    return MonteCarloSummary(scenario, tuple(trials), aggs, samples)
