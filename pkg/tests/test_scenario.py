import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from momasim.errors import EmptySetError, InvalidParameterError, InvalidPlanError
from momasim.scenario import (ClassOrderingWarning, ClassPlan, ClassSpec, SystemConfig,
                              build_population, dbm_to_watts, expected_gain_uniform,
                              make_population, mean_gain, pathloss_db, pathloss_gain)

from conftest import make_plan


def test_hata_slope_25_to_100m():
    g25, g100 = pathloss_gain(25.0), pathloss_gain(100.0)
    # distance slope (44.9 - 6.55 log10 30) per decade
    slope = 44.9 - 6.55 * math.log10(30.0)
    assert math.isclose(slope, 35.225, abs_tol=1e-3)
    assert 10 * math.log10(g25 / g100) == pytest.approx(slope * math.log10(4), rel=1e-12)
    assert 10 * math.log10(g25 / g100) == pytest.approx(21.2, abs=0.05)


def test_hata_absolute_value_independent_formula():
    # direct evaluation of the medium-city formula at f=900 MHz, d=50 m
    f, hb, hm, d = 900.0, 30.0, 1.5, 0.05
    a = (1.1 * math.log10(f) - 0.7) * hm - (1.56 * math.log10(f) - 0.8)
    pl = 46.3 + 33.9 * math.log10(f) - 13.82 * math.log10(hb) - a + (44.9 - 6.55 * math.log10(hb)) * math.log10(d)
    assert pathloss_db(50.0) == pytest.approx(pl, rel=1e-13)


@given(st.floats(1.0, 5000.0))
def test_gain_ratio_for_doubling_is_distance_independent(d):
    ratio = pathloss_gain(d) / pathloss_gain(2 * d)
    assert ratio == pytest.approx(pathloss_gain(10.0) / pathloss_gain(20.0), rel=1e-9)


def test_pathloss_affine_in_log_distance_three_points():
    d = np.array([10.0, 100.0, 1000.0])
    pl = pathloss_db(d)
    slope = 44.9 - 6.55 * math.log10(30.0)
    assert np.diff(pl) == pytest.approx([slope, slope], rel=1e-12)


@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4))
def test_gain_strictly_decreasing(a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    assert pathloss_gain(lo) > pathloss_gain(hi)


@pytest.mark.parametrize("kw", [{"distance": 0.0}, {"distance": -3.0}, {"distance": 10.0, "bs_height": 0.0},
                                {"distance": 10.0, "ue_height": -1.0}, {"distance": 10.0, "carrier": 0.0}])
def test_pathloss_domain_errors(kw):
    with pytest.raises(InvalidParameterError):
        pathloss_gain(**kw)


def test_expected_gain_matches_quadrature():
    num, _ = integrate.quad(lambda d: pathloss_gain(d), 25.0, 100.0, epsrel=1e-12)
    assert expected_gain_uniform(25.0, 100.0) == pytest.approx(num / 75.0, rel=1e-9)


def test_build_population_counts_and_classes():
    plan = make_plan(2, 2, 2, 3)
    pop = build_population(plan, 25, 100, SystemConfig(spreading_length=4), np.random.default_rng(1))
    assert len(pop) == 5
    assert [u.kind for u in pop.users] == ["HD", "HD", "LD", "LD", "LD"]
    assert all(25 <= u.distance <= 100 and u.large_scale_gain > 0 for u in pop.users)
    assert [u.code_index for u in pop.users] == [0, 1, 0, 1, 2]


def test_build_population_deterministic():
    plan = make_plan(28, 224, 4, 120)
    sys = SystemConfig()
    a = build_population(plan, 25, 100, sys, np.random.default_rng(7))
    b = build_population(plan, 25, 100, sys, np.random.default_rng(7))
    c = build_population(plan, 25, 100, sys, np.random.default_rng(8))
    assert a.users == b.users
    assert a.users != c.users


def test_uniform_distance_mean():
    plan = make_plan(28, 5000, 4, 5000)
    pop = build_population(plan, 25, 100, SystemConfig(), np.random.default_rng(3))
    d = np.array([u.distance for u in pop.users])
    assert d.mean() == pytest.approx(62.5, rel=0.02)


def test_gains_follow_pathloss():
    plan = make_plan(28, 10, 4, 10)
    pop = build_population(plan, 25, 100, SystemConfig(), np.random.default_rng(0))
    for u in pop.users:
        assert u.large_scale_gain == pytest.approx(pathloss_gain(u.distance), rel=1e-12)
        assert u.tx_power == pytest.approx(dbm_to_watts(23.0))


def test_build_population_errors():
    sys = SystemConfig(spreading_length=4)
    with pytest.raises(InvalidParameterError):
        build_population(None, 25, 100, sys, np.random.default_rng(0))
    with pytest.raises(InvalidParameterError):
        build_population(make_plan(2, 1, 2, 1), 100, 25, sys, np.random.default_rng(0))
    with pytest.raises(InvalidParameterError):
        build_population(make_plan(2, 0, 2, 0), 25, 100, sys, np.random.default_rng(0))


def test_mean_gain_examples():
    plan = make_plan(2, 1, 2, 2)
    assert mean_gain(make_population(plan, [1.0, 0.5, 0.5], [1, 1, 1])) == 0.5
    assert mean_gain(make_population(plan, [9.0, 0.2, 0.4], [1, 1, 1])) == pytest.approx(0.3, rel=1e-15)
    with pytest.raises(EmptySetError):
        mean_gain(make_population(make_plan(2, 1), [1.0], [1.0]))


def test_mean_gain_matches_direct_sum():
    pop = build_population(make_plan(28, 224, 4, 120), 25, 100, SystemConfig(), np.random.default_rng(11))
    direct = sum(u.large_scale_gain for u in pop.users if u.kind == "LD") / 120
    assert mean_gain(pop) == pytest.approx(direct, rel=1e-12)
    assert pop.mean_gain == pytest.approx(direct, rel=1e-12)


def test_system_config_defaults_and_validation():
    s = SystemConfig()
    assert s.num_instances == 18
    assert 10 * math.log10(s.noise_var * 1e3) == pytest.approx(-174 + 10 * math.log10(15e3), abs=1e-9)
    for kw in ({"spreading_length": 24}, {"n_used": 2000}, {"num_antennas": 0}, {"spreading_length": 1024, "n_used": 600}):
        with pytest.raises(InvalidParameterError):
            SystemConfig(**kw)


def test_plan_validation():
    with pytest.raises(InvalidPlanError):
        ClassPlan((ClassSpec("LD", 4, 10, level=1),))
    with pytest.raises(InvalidPlanError):
        ClassPlan((ClassSpec("HD", 2, 1), ClassSpec("HD", 2, 1)))
    with pytest.raises(InvalidPlanError):
        make_plan(28, 224, 4, 120).validate(64)
    with pytest.raises(InvalidPlanError):
        ClassPlan((ClassSpec("HD", 2, 1), ClassSpec("LD", 1, 4, level=1), ClassSpec("LD", 1, 8, level=1)))


def test_plan_ordering_warnings():
    with pytest.warns(ClassOrderingWarning):
        ClassPlan((ClassSpec("HD", 28, 224), ClassSpec("LD", 4, 8, level=1)))
    with pytest.warns(ClassOrderingWarning):
        ClassPlan((ClassSpec("HD", 24, 24), ClassSpec("LD", 4, 40, level=1, target_rate=0.5),
                   ClassSpec("LD", 4, 80, level=2, target_rate=1.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ClassPlan((ClassSpec("HD", 28, 224), ClassSpec("LD", 4, 120, level=1, target_rate=1.0)))


def test_plan_canonical_order():
    plan = ClassPlan((ClassSpec("LD", 2, 40, level=2), ClassSpec("LD", 2, 20, level=1), ClassSpec("HD", 28, 28)))
    assert [c.label for c in plan.classes] == ["HD", "LD1", "LD2"]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_population_pure_function_of_seed(seed):
    plan = make_plan(2, 3, 2, 4)
    sys = SystemConfig(spreading_length=4)
    a = build_population(plan, 25, 100, sys, np.random.default_rng(seed))
    b = build_population(plan, 25, 100, sys, np.random.default_rng(seed))
    assert a.users == b.users
