import json
import subprocess
import sys

import numpy as np
import pytest

from momasim.errors import ConfigError, MomaError
from momasim.harness import (Aggregate, Scenario, aggregate, emit, load_scenario, metadata, payload,
                             read_csv, render, run_monte_carlo, run_trial, run_trials, sweep_hd_rate,
                             sweep_ld_capacity, theorem_campaign)
from momasim.harness.cli import main
from momasim.harness.runner import stream_rng
from momasim.harness.sweeps import SweepTable


@pytest.fixture(scope="module")
def small():
    # desk scenario at M=8 with light loads
    return (load_scenario("desk").with_system(num_antennas=8).with_hd_users(56)
            .with_ld_users(16).with_run(trials=3, seed=11))


def test_builtin_scenarios():
    full = load_scenario("full")
    desk = load_scenario("desk")
    assert full.run.trials == 100 and desk.run.trials == 20
    s = full.system
    assert (s.n_fft, s.n_used, s.spreading_length, s.num_antennas) == (1024, 600, 32, 80)
    assert [(c.code_count, c.user_count) for c in full.plan.classes] == [(28, 224), (4, 120)]
    assert full.placement.min_m == 25 and full.placement.max_m == 100


def test_config_round_trip(tmp_path):
    sc = load_scenario("full").with_channel(profile="EVA", combiner="mmse").with_run(seed=5)
    again = Scenario.from_dict(json.loads(sc.to_json()))
    assert again == sc and again.hash == sc.hash
    path = tmp_path / "s.json"
    path.write_text(sc.to_json())
    assert load_scenario(path) == sc


def test_custom_taps_round_trip():
    d = Scenario().to_dict()
    d["channel"]["profile"] = "TWO"
    d["channel"]["taps"] = [[0.0, 0.0], [1e-6, -3.0]]
    sc = Scenario.from_dict(d)
    assert sc.channel.resolve().powers.sum() == pytest.approx(1.0)
    assert Scenario.from_dict(json.loads(sc.to_json())) == sc


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra={}),
    lambda d: d["run"].update(bogus=1),
    lambda d: d["system"].update(num_antenna=3),
    lambda d: d["classes"][0].update(power=1),
    lambda d: d.update(channel={"profile": "ETU"}),
    lambda d: d.update(run=[]),
])
def test_config_rejects_bad_documents(mutate):
    d = Scenario().to_dict()
    mutate(d)
    with pytest.raises(MomaError):
        Scenario.from_dict(d)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(bad)


def test_stream_rng_stateless():
    a = stream_rng(3, 5, 2).standard_normal(4)
    assert np.array_equal(a, stream_rng(3, 5, 2).standard_normal(4))
    assert not np.array_equal(a, stream_rng(3, 5, 1).standard_normal(4))
    assert not np.array_equal(a, stream_rng(3, 6, 2).standard_normal(4))


def test_run_trial_deterministic(small):
    a, b = run_trial(small, 0), run_trial(small, 0)
    assert np.array_equal(a.su.sinr, b.su.sinr)
    assert np.array_equal(a.decision_samples, b.decision_samples)
    c = run_trial(small, 1)
    assert not np.array_equal(a.decision_samples, c.decision_samples)
    assert a.users.size == small.plan.total_users
    assert np.all(np.isfinite(a.su.sinr))


def test_flat_trial_zero_inter_class(small):
    t = run_trial(small.with_channel(profile="FLAT", common=True), 0)
    sig = t.su.signal
    assert np.all(t.su.inter_class <= 1e-10 * sig)


def test_positions_only_redraw(small):
    sc = small.with_run(redraw="positions")
    a, b = run_trial(sc, 0), run_trial(sc, 1)
    assert not np.array_equal(a.gains, b.gains)


def test_trial_errors_carry_context(small):
    bad = small.with_run(symbols="bpsk")
    with pytest.raises(MomaError, match="trial 0"):
        run_trial(bad, 0)


def test_one_trial_aggregate(small):
    mc = run_monte_carlo(small.with_run(trials=1))
    t = mc.trials[0]
    assert mc.aggregates["hd_rate_su"].mean == t.metrics()["hd_rate_su"]
    assert mc.aggregates["hd_rate_su"].std == 0 and mc.aggregates["hd_rate_su"].n == 1


def test_aggregate_order_independent(small):
    trials = run_trials(small)
    a, _ = aggregate(trials)
    b, _ = aggregate(list(reversed(trials)))
    assert a == b
    vals = [t.metrics()["ld_rate"] for t in trials]
    assert a["ld_rate"].mean == pytest.approx(np.mean(vals), rel=1e-12)
    assert a["ld_rate"].std == pytest.approx(np.std(vals, ddof=1), rel=1e-9)
    assert Aggregate.of([]).n == 0


def test_parallel_equals_serial(small):
    serial = run_monte_carlo(small, workers=1)
    parallel = run_monte_carlo(small, workers=2)
    assert serial.aggregates == parallel.aggregates


def test_sic_included(small):
    mc = run_monte_carlo(small.with_run(include_sic=True, trials=2))
    assert "hd_rate_sic" in mc.aggregates
    assert mc.trials[0].hd_rate_sic.shape == mc.trials[0].hd_rate_su.shape


def test_auto_detector_selects_sic():
    sc = load_scenario("desk").with_system(num_antennas=8).with_hd_users(112).with_ld_users(16).with_run(trials=1)
    assert run_trial(sc, 0).hd_detector == "sic"
    assert run_trial(sc.with_run(detector="su"), 0).hd_detector == "su"
    assert run_trial(load_scenario("desk").with_run(trials=1), 0).hd_detector == "su"


def test_sweep_ld_table():
    sc = load_scenario("full")
    t = sweep_ld_capacity(sc, [1.0])
    assert len(t.rows) == 1
    t = sweep_ld_capacity(sc)
    assert np.all(t.column("lora") == 896)
    assert np.all(np.diff(t.column("moma")) <= 0)
    assert np.all(np.diff(t.xs) > 0)
    np.testing.assert_allclose(t.column("moma"), t.column("moma_per_instance") * sc.system.num_instances)
    with pytest.raises(MomaError):
        sweep_ld_capacity(sc, [])
    with pytest.raises(MomaError):
        sweep_ld_capacity(sc, [2.0, 1.0])


def test_sweep_ld_min_policy_is_conservative():
    import dataclasses
    sc = load_scenario("full")
    lo = sweep_ld_capacity(sc.replace(sweep=dataclasses.replace(sc.sweep, gain_policy="min")))
    hi = sweep_ld_capacity(sc)
    assert np.all(lo.column("moma") <= hi.column("moma"))


def test_sweep_ld_verification(small):
    t = sweep_ld_capacity(small, [1.0], verify=True, verify_trials=2)
    assert 0.0 <= t.column("sim_fraction_met")[0] <= 1.0


def test_sweep_hd_table(small):
    t = sweep_hd_rate(small, [0, 16], ["EPA"])
    assert [r.x for r in t.rows] == [0, 16]
    row0 = t.rows[0].cells
    assert row0["su_EPA"].mean == pytest.approx(row0["bound_EPA"].mean, rel=1e-9)
    for r in t.rows:
        assert r.cells["bound_EPA"].mean >= r.cells["su_EPA"].mean
    # stored samples reproduce the aggregates
    for (load, name), v in t.samples.items():
        cell = next(r for r in t.rows if r.x == load).cells[name]
        assert np.mean(v) == pytest.approx(cell.mean, rel=1e-9)


def test_theorem_campaign_table(small):
    camp = theorem_campaign(small, [8, 32], alpha=1.0, trials=2)
    table = camp.to_table()
    assert list(table.xs) == [8, 32]
    assert camp.ld_interference[32].size == 2 * 32


def _table():
    return sweep_ld_capacity(load_scenario("full"), [0.5, 1.0, 2.0])


def test_emit_csv_round_trip(tmp_path):
    sc = load_scenario("full")
    table = _table()
    out = tmp_path / "t.csv"
    text = emit(table, "csv", out, metadata(sc, "sweep-ld"))
    assert out.read_text() == text
    meta, header, rows = read_csv(text)
    assert meta["scenario_hash"] == sc.hash and meta["seed"] == "0"
    assert meta["tool"].startswith("momasim ")
    assert header[0] == "target_rate"
    for row, r in zip(rows, table.rows):
        assert row[0] == r.x
        assert row[header.index("moma")] == r.cells["moma"].mean


def test_emit_json_round_trip():
    table = _table()
    doc = json.loads(render(table, "json", {"seed": "0"}))
    assert doc["rows"][1]["moma"] == table.rows[1].cells["moma"].mean


def test_emit_empty_table_header_only():
    text = render(SweepTable("x", ("a",), ()), "csv", {})
    assert text.strip().splitlines() == ["x,a,a_std,a_n"]


def test_emit_payload_excludes_timestamp():
    sc = load_scenario("full")
    a = render(_table(), "csv", metadata(sc, "sweep-ld"))
    b = render(_table(), "csv", dict(metadata(sc, "sweep-ld"), generated_at="other"))
    assert a != b and payload(a) == payload(b)
    ja = render(_table(), "json", metadata(sc, "x"))
    jb = render(_table(), "json", dict(metadata(sc, "x"), generated_at="other"))
    assert payload(ja) == payload(jb)


def test_emit_bad_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit(_table(), "csv", tmp_path / "missing" / "x.csv", {})


def test_cli_in_process(tmp_path, capsys):
    assert main(["baselines", "--rates", "1,2", "--config", "full"]) == 0
    out = capsys.readouterr().out
    _, header, rows = read_csv(out)
    assert header == ["target_rate", "lora", "narrowband"]
    assert rows[0][1] == 896
    assert main(["codes", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 224 + 120 + 32
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_subprocess(tmp_path):
    out = tmp_path / "s.csv"
    cmd = [sys.executable, "-m", "momasim", "simulate", "--trials", "1", "--seed", "3",
           "--profile", "EVA", "--out", str(out)]
    res = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
    assert res.returncode == 0, res.stderr
    meta, header, rows = read_csv(out.read_text())
    assert meta["seed"] == "3" and meta["trials"] == "1"
    assert header == ["metric", "mean", "std", "n", "ci95"]
    assert "hd_rate_su" in [r[0] for r in rows]
