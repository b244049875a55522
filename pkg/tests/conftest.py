import numpy as np
import pytest

from momasim.channel import get_profile, sample_small_scale_channel
from momasim.codes import assign_codes, generate_hadamard, partition_codebook, sample_combining_matrix
from momasim.phy import combine, draw_symbols, spread, superpose
from momasim.scenario import ClassPlan, ClassSpec, SystemConfig, make_population


def make_plan(n_hd, k_hd, n_ld=None, k_ld=0, power_dbm=23.0):
    classes = [ClassSpec("HD", n_hd, k_hd, tx_power_dbm=power_dbm)]
    if n_ld:
        classes.append(ClassSpec("LD", n_ld, k_ld, tx_power_dbm=power_dbm, level=1))
    return ClassPlan(tuple(classes))


class Chain:
    """Small end-to-end chain with explicit gains and powers."""

    def __init__(self, plan, gains=None, powers=None, profile="FLAT", m=1, seed=0,
                 common=False, noise_var=0.0, symbols=None, combiner="mrc", h=None):
        n = plan.total_codes
        k = plan.total_users
        rng = np.random.default_rng(seed)
        self.sys = SystemConfig(spreading_length=n, num_antennas=m)
        gains = np.ones(k) if gains is None else np.asarray(gains, float)
        powers = np.ones(k) if powers is None else np.asarray(powers, float)
        self.pop = make_population(plan, gains, powers)
        part = partition_codebook(generate_hadamard(n), plan)
        ws = [sample_combining_matrix(c.code_count, c.user_count, rng) for c in plan.ld_classes]
        self.assignment = assign_codes(part, ws, self.pop)
        self.ch = sample_small_scale_channel(get_profile(profile), self.sys, k, rng, common=common)
        if h is not None:
            self.ch = type(self.ch)(np.broadcast_to(h, self.ch.h.shape).astype(complex),
                                    self.ch.subcarriers, self.ch.profile, common)
        self.symbols = draw_symbols(rng, k) if symbols is None else np.asarray(symbols, complex)
        self.tx = spread(self.assignment, self.pop, self.symbols, self.sys)
        self.noise_var = noise_var
        self.rx = superpose(self.tx, self.ch, self.pop, noise_var, rng)
        self.combined = combine(self.rx, self.ch, None, combiner, self.pop)


@pytest.fixture
def chain_factory():
    return Chain
