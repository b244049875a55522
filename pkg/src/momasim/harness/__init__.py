"""Scenario loading, Monte Carlo execution, sweeps, emission and the CLI."""

from .config import ChannelSpec, PlacementSpec, RunSpec, Scenario, SweepSpec, load_scenario
from .emit import emit, metadata, payload, read_csv, render
from .runner import Aggregate, MonteCarloSummary, TrialResult, aggregate, run_monte_carlo, run_trial, run_trials
from .sweeps import SweepTable, sweep_hd_rate, sweep_ld_capacity, theorem_campaign
