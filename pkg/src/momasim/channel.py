"""Tapped-delay-line channels evaluated on one MOMA-OFDM instance.

A realization holds ``h[k, n, a]``: user ``k``, subcarrier ``n`` of the
instance block, antenna ``a``.  Each (user, antenna) pair draws independent
complex Gaussian tap amplitudes; the frequency response on subcarrier
``n`` is ``sum_p a_p exp(+2j*pi*tau_p*n*df)``.  The sign convention makes
``E[conj(h_n) h_m] = c_{n-m}`` with ``c_u = sum_p p_p exp(-2j*pi*tau_p*u*df)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameterError, InvalidProfileError
from .scenario import SystemConfig


@dataclass(frozen=True)
class TapDelayProfile:
    name: str
    delays: tuple = ()
    powers_db: tuple = ()
    normalize: bool = True
    independent_subcarriers: bool = False

    def __post_init__(self):
        if self.independent_subcarriers:
            return
        d = np.asarray(self.delays, dtype=float)
        if d.size == 0 or d.size != len(self.powers_db):
            raise InvalidProfileError(f"profile {self.name!r} needs matching, non-empty taps")
        if np.any(d < 0) or np.any(np.diff(d) <= 0):
            raise InvalidProfileError(f"profile {self.name!r}: delays must be >= 0 and strictly increasing")

    @property
    def powers(self) -> np.ndarray:
        """Linear tap powers, summing to one when ``normalize`` is set."""
        p = 10.0 ** (np.asarray(self.powers_db, dtype=float) / 10.0)
        return p / p.sum() if self.normalize else p

    @property
    def delay_array(self) -> np.ndarray:
        return np.asarray(self.delays, dtype=float)

    @classmethod
    def from_taps(cls, name: str, taps: Sequence[Sequence[float]], normalize: bool = True):
        """Build a profile from ``(delay_seconds, power_db)`` pairs."""
        if not taps:
            raise InvalidProfileError(f"profile {name!r} has no taps")
        delays, powers = zip(*taps)
        return cls(name, tuple(float(d) for d in delays), tuple(float(p) for p in powers), normalize)


_NS = 1e-9

PROFILES = {
    # 3GPP TS 36.104 Annex B.2
    "EPA": TapDelayProfile(
        "EPA",
        tuple(x * _NS for x in (0, 30, 70, 90, 110, 190, 410)),
        (0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8)),
    "EVA": TapDelayProfile(
        "EVA",
        tuple(x * _NS for x in (0, 30, 150, 310, 370, 710, 1090, 1730, 2510)),
        (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)),
    "FLAT": TapDelayProfile("FLAT", (0.0,), (0.0,)),
    # i.i.d. over users and antennas, fully correlated across the block
    "IID": TapDelayProfile("IID", (0.0,), (0.0,)),
    "IID_SC": TapDelayProfile("IID_SC", independent_subcarriers=True),
}


def get_profile(name: str) -> TapDelayProfile:
    try:
        return PROFILES[name.upper()]
    except KeyError:
        raise InvalidProfileError(f"unknown channel profile {name!r}; known: {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray
    subcarriers: np.ndarray
    profile: TapDelayProfile
    common: bool = False

    @property
    def num_users(self) -> int:
        return self.h.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.h.shape[2]


@dataclass(frozen=True)
class FrequencyAutocorrelation:
    lags: np.ndarray
    values: np.ndarray

    def __getitem__(self, u: int) -> complex:
        return complex(self.values[int(u) - int(self.lags[0])])


def instance_subcarriers(sys: SystemConfig, instance: int = 0) -> np.ndarray:
    if not 0 <= instance < sys.num_instances:
        raise InvalidParameterError(f"instance {instance} outside 0..{sys.num_instances - 1}")
    n = sys.spreading_length
    return np.arange(instance * n, (instance + 1) * n)


def _cn(rng, shape, var=1.0):
    scale = np.sqrt(np.asarray(var) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_small_scale_channel(profile: TapDelayProfile, sys: SystemConfig, num_users: int,
                               rng: np.random.Generator, instance: int = 0,
                               common: bool = False,
                               num_antennas: Optional[int] = None) -> ChannelRealization:
    """Draw per-user, per-antenna frequency responses on one instance block.

    With ``common=True`` a single (antenna x subcarrier) response is drawn and
    shared by every user.
    """
    m = sys.num_antennas if num_antennas is None else num_antennas
    sc = instance_subcarriers(sys, instance)
    n = sc.size
    draws = 1 if common else num_users
    if profile.independent_subcarriers:
        h = _cn(rng, (draws, n, m))
    else:
        p = profile.powers
        if p.size == 0:
            raise InvalidProfileError(f"profile {profile.name!r} is empty")
        taps = _cn(rng, (draws, m, p.size), p)
        phase = np.exp(2j * np.pi * np.outer(profile.delay_array, sc) * sys.subcarrier_spacing)
        h = (taps.reshape(draws * m, p.size) @ phase).reshape(draws, m, n).transpose(0, 2, 1)
    if common:
        h = np.repeat(h, num_users, axis=0)
    return ChannelRealization(np.ascontiguousarray(h), sc, profile, common)


def freq_autocorrelation(profile: TapDelayProfile, spacing: float,
                         max_lag: int) -> FrequencyAutocorrelation:
    lags = np.arange(-max_lag, max_lag + 1)
    if profile.independent_subcarriers:
        values = (lags == 0).astype(complex)
    else:
        values = np.exp(-2j * np.pi * np.outer(lags, profile.delay_array) * spacing) @ profile.powers
    return FrequencyAutocorrelation(lags, values)
