"""System configuration, user classes, placement and large-scale fading.

Path loss follows the COST-231 Hata model.  Distances are in metres and
frequencies in Hz at the API boundary; the model itself is evaluated in
km and MHz.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySetError, InvalidParameterError, InvalidPlanError

HD = "HD"
LD = "LD"


class ClassOrderingWarning(UserWarning):
    """A class plan violates the rate or overload ordering of the scheme."""


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SystemConfig:
    """OFDM numerology, array size and link-budget constants.

    ``noise_var`` is the per-subcarrier, per-antenna noise power in watts
    (``noise_psd`` integrated over one subcarrier spacing).
    """

    n_fft: int = 1024
    n_used: int = 600
    spreading_length: int = 32
    subcarrier_spacing: float = 15e3
    num_antennas: int = 80
    noise_psd_dbm_hz: float = -174.0
    carrier_freq: float = 900e6
    bs_height: float = 30.0
    ue_height: float = 1.5
    area_correction_db: float = 0.0

    def __post_init__(self):
        n = self.spreading_length
        if not _is_power_of_two(n):
            raise InvalidParameterError(f"spreading_length must be a power of two, got {n}")
        if not n <= self.n_used <= self.n_fft:
            raise InvalidParameterError(
                f"need spreading_length <= n_used <= n_fft, got {n}, {self.n_used}, {self.n_fft}")
        if self.num_antennas < 1:
            raise InvalidParameterError("num_antennas must be >= 1")
        if self.subcarrier_spacing <= 0 or self.carrier_freq <= 0:
            raise InvalidParameterError("subcarrier_spacing and carrier_freq must be positive")

    @property
    def num_instances(self) -> int:
        return self.n_used // self.spreading_length

    @property
    def noise_var(self) -> float:
        return float(dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * math.log10(self.subcarrier_spacing)))


@dataclass(frozen=True)
class ClassSpec:
    kind: str
    code_count: int
    user_count: int
    tx_power_dbm: float = 23.0
    level: Optional[int] = None
    target_rate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (HD, LD):
            raise InvalidPlanError(f"class kind must be 'HD' or 'LD', got {self.kind!r}")
        if self.code_count < 1 or self.user_count < 0:
            raise InvalidPlanError("code_count must be >= 1 and user_count >= 0")
        if self.kind == LD and (self.level is None or self.level < 1):
            raise InvalidPlanError("LD classes need a level >= 1")
        if self.kind == HD and self.level not in (None, 0):
            raise InvalidPlanError("the HD class has no level")

    @property
    def overload(self) -> float:
        return self.user_count / self.code_count

    @property
    def label(self) -> str:
        return HD if self.kind == HD else f"LD{self.level}"


@dataclass(frozen=True)
class ClassPlan:
    """User classes in canonical order: the HD class first, then LD by level.

    Structural problems raise :class:`InvalidPlanError`.  Violations of the
    target-rate ordering (decreasing with level) or of the overload ordering
    (increasing with level, all above the HD overload) only warn.
    """

    classes: tuple

    def __post_init__(self):
        classes = tuple(self.classes)
        if not classes:
            raise InvalidPlanError("empty class plan")
        hd = [c for c in classes if c.kind == HD]
        if len(hd) != 1:
            raise InvalidPlanError(f"exactly one HD class required, got {len(hd)}")
        ld = sorted((c for c in classes if c.kind == LD), key=lambda c: c.level)
        levels = [c.level for c in ld]
        if len(set(levels)) != len(levels):
            raise InvalidPlanError(f"duplicate LD levels: {levels}")
        object.__setattr__(self, "classes", (hd[0], *ld))
        self._check_ordering()

    def _check_ordering(self):
        ld = self.ld_classes
        rates = [c.target_rate for c in ld]
        if all(r is not None for r in rates):
            if any(a <= b for a, b in zip(rates, rates[1:])):
                warnings.warn(f"LD target rates not strictly decreasing with level: {rates}",
                              ClassOrderingWarning, stacklevel=3)
        loads = [c.overload for c in ld]
        if any(a >= b for a, b in zip(loads, loads[1:])) or any(
                x <= self.hd_class.overload for x in loads):
            warnings.warn(
                f"overload ratios not increasing from HD ({self.hd_class.overload:g}) "
                f"through LD levels {loads}", ClassOrderingWarning, stacklevel=3)

    @property
    def hd_class(self) -> ClassSpec:
        return self.classes[0]

    @property
    def ld_classes(self) -> tuple:
        return self.classes[1:]

    @property
    def total_codes(self) -> int:
        return sum(c.code_count for c in self.classes)

    @property
    def total_users(self) -> int:
        return sum(c.user_count for c in self.classes)

    def validate(self, spreading_length: int):
        if self.total_codes != spreading_length:
            raise InvalidPlanError(
                f"class code counts sum to {self.total_codes}, expected N={spreading_length}")


@dataclass(frozen=True)
class User:
    id: int
    class_index: int
    kind: str
    distance: float
    large_scale_gain: float
    tx_power: float
    code_index: int


@dataclass(frozen=True)
class UserPopulation:
    plan: ClassPlan
    users: tuple
    mean_gain: Optional[float] = field(default=None)

    @cached_property
    def gains(self) -> np.ndarray:
        return np.array([u.large_scale_gain for u in self.users], dtype=float)

    @cached_property
    def powers(self) -> np.ndarray:
        return np.array([u.tx_power for u in self.users], dtype=float)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        """sqrt(g_k P_k) per user."""
        return np.sqrt(self.gains * self.powers)

    @cached_property
    def class_index(self) -> np.ndarray:
        return np.array([u.class_index for u in self.users], dtype=int)

    @cached_property
    def is_hd(self) -> np.ndarray:
        return self.class_index == 0

    @property
    def hd_ids(self) -> np.ndarray:
        return np.flatnonzero(self.is_hd)

    @property
    def ld_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.is_hd)

    def __len__(self):
        return len(self.users)


def pathloss_db(distance, carrier: float = 900e6, bs_height: float = 30.0,
                ue_height: float = 1.5, area_correction: float = 0.0):
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise InvalidParameterError("distance must be positive")
    if carrier <= 0:
        raise InvalidParameterError("carrier frequency must be positive")
    if bs_height <= 0 or ue_height <= 0:
        raise InvalidParameterError("antenna heights must be positive")
    f = carrier / 1e6
    a_hm = (1.1 * math.log10(f) - 0.7) * ue_height - (1.56 * math.log10(f) - 0.8)
    return (46.3 + 33.9 * math.log10(f) - 13.82 * math.log10(bs_height) - a_hm
            + (44.9 - 6.55 * math.log10(bs_height)) * np.log10(d / 1000.0) + area_correction)


def pathloss_gain(distance, carrier: float = 900e6, bs_height: float = 30.0,
                  ue_height: float = 1.5, area_correction: float = 0.0):
    """Linear power gain 10^(-PL/10) of the COST-231 Hata model.

    No minimum-distance clamp is applied: below the model's nominal range
    the log-distance law is simply extrapolated.
    """
    pl = pathloss_db(distance, carrier, bs_height, ue_height, area_correction)
    g = 10.0 ** (-pl / 10.0)
    return float(g) if np.ndim(g) == 0 else g


def expected_gain_uniform(d_min: float, d_max: float, carrier: float = 900e6,
                          bs_height: float = 30.0, ue_height: float = 1.5,
                          area_correction: float = 0.0) -> float:
    """Mean Hata gain for a distance drawn uniformly on [d_min, d_max].

    The gain is a pure power law ``g(d) = g(1 m) * d**-beta``, so the mean has
    a closed form.
    """
    if not 0 < d_min < d_max:
        raise InvalidParameterError("need 0 < d_min < d_max")
    beta = (44.9 - 6.55 * math.log10(bs_height)) / 10.0
    g1 = pathloss_gain(1.0, carrier, bs_height, ue_height, area_correction)
    if math.isclose(beta, 1.0):
        integral = math.log(d_max / d_min)
    else:
        integral = (d_max ** (1 - beta) - d_min ** (1 - beta)) / (1 - beta)
    return g1 * integral / (d_max - d_min)


def code_index_for(kind: str, rank: int, code_count: int, user_count: int) -> int:
    # HD: round-robin reuse of the N^HD columns; LD: one column of U_l W_l each.
    if kind == HD:
        return rank % code_count
    return rank


def build_population(plan: ClassPlan, placement_min: float, placement_max: float,
                     sys: SystemConfig, rng: np.random.Generator,
                     unit_gain: bool = False) -> UserPopulation:
    """Draw user positions uniformly and attach Hata gains and code indices.

    With ``unit_gain`` every user gets ``g_k = 1`` (distances are still
    drawn, so the random stream is consumed identically).
    """
    if plan is None:
        raise InvalidParameterError("empty plan")
    if not placement_min < placement_max:
        raise InvalidParameterError("placement_min must be below placement_max")
    plan.validate(sys.spreading_length)
    k = plan.total_users
    if k == 0:
        raise InvalidParameterError("plan has no users")
    distances = rng.uniform(placement_min, placement_max, size=k)
    if unit_gain:
        gains = np.ones(k)
    else:
        gains = np.atleast_1d(pathloss_gain(distances, sys.carrier_freq, sys.bs_height,
                                            sys.ue_height, sys.area_correction_db))
    users = []
    uid = 0
    for ci, spec in enumerate(plan.classes):
        p = float(dbm_to_watts(spec.tx_power_dbm))
        for rank in range(spec.user_count):
            users.append(User(
                id=uid, class_index=ci, kind=spec.kind, distance=float(distances[uid]),
                large_scale_gain=float(gains[uid]), tx_power=p,
                code_index=code_index_for(spec.kind, rank, spec.code_count, spec.user_count)))
            uid += 1
    return UserPopulation(plan=plan, users=tuple(users),
                          mean_gain=_ld_mean(users))


def make_population(plan: ClassPlan, gains: Sequence[float], powers: Sequence[float],
                    distances: Optional[Sequence[float]] = None) -> UserPopulation:
    """Population with explicitly given gains and powers (tests, diagnostics)."""
    k = plan.total_users
    if len(gains) != k or len(powers) != k:
        raise InvalidParameterError(f"need {k} gains and powers")
    if distances is None:
        distances = np.full(k, np.nan)
    users = []
    uid = 0
    for ci, spec in enumerate(plan.classes):
        for rank in range(spec.user_count):
            if gains[uid] <= 0:
                raise InvalidParameterError("large-scale gains must be positive")
            users.append(User(uid, ci, spec.kind, float(distances[uid]), float(gains[uid]),
                              float(powers[uid]),
                              code_index_for(spec.kind, rank, spec.code_count, spec.user_count)))
            uid += 1
    return UserPopulation(plan, tuple(users), _ld_mean(users))


def _ld_mean(users):
    ld = [u.large_scale_gain for u in users if u.kind == LD]
    return math.fsum(ld) / len(ld) if ld else None


def mean_gain(pop: UserPopulation) -> float:
    ld = [u.large_scale_gain for u in pop.users if u.kind == LD]
    if not ld:
        raise EmptySetError("population has no LD users")
    return math.fsum(ld) / len(ld)
