"""Uplink transmit/receive chain on one MOMA-OFDM instance.

Array conventions (``K`` users, ``N`` subcarriers, ``M`` antennas):

* codes ``c``: ``(K, N)``, transmit grid ``x``: ``(K, N)``
* channel ``h``: ``(K, N, M)``, received grid ``y``: ``(N, M)``
* combiner weights ``d``: ``(T, N, M)`` for ``T`` target users

Transmit power enters once: ``spread`` scales by ``sqrt(P_k)`` and
``superpose`` by ``sqrt(g_k)``, so the composed chain is
``y_n = sum_k sqrt(g_k P_k) h_{k,n} c_k[n] s_k + v_n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization
from .codes import SpreadingAssignment
from .errors import InvalidInputError, InvalidParameterError, InvalidTargetError
from .scenario import SystemConfig, UserPopulation

log = logging.getLogger(__name__)

MRC = "mrc"
MMSE = "mmse"
SU = "su"
SIC = "sic"


@dataclass(frozen=True)
class TransmitGrid:
    x: np.ndarray
    symbols: np.ndarray


@dataclass(frozen=True)
class ReceivedGrid:
    y: np.ndarray
    noise: np.ndarray
    noise_var: float


@dataclass(frozen=True)
class CombinedSamples:
    r: np.ndarray
    d: np.ndarray
    targets: tuple
    mode: str

    def row(self, k: int) -> int:
        try:
            return self.targets.index(int(k))
        except ValueError:
            raise InvalidTargetError(f"user {k} was not combined") from None


@dataclass(frozen=True)
class EffectiveCodeSet:
    """Effective codes of all users as seen through target ``target``'s combiner."""

    target: int
    codes: np.ndarray
    noise: Optional[np.ndarray]


@dataclass(frozen=True)
class SicResult:
    order: np.ndarray
    samples: np.ndarray
    filters: np.ndarray
    decisions: np.ndarray
    rows: np.ndarray
    active: tuple


@dataclass(frozen=True)
class DetectionReport:
    """Decision samples for every user plus the HD detector that produced them."""

    samples: np.ndarray
    hd_detector: str
    sic_order: Optional[np.ndarray] = None


def qpsk_symbols(rng: np.random.Generator, k: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(k, 2))
    return ((2 * bits[:, 0] - 1) + 1j * (2 * bits[:, 1] - 1)) / np.sqrt(2)


def gaussian_symbols(rng: np.random.Generator, k: int) -> np.ndarray:
    return (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)


def draw_symbols(rng: np.random.Generator, k: int, kind: str = "qpsk") -> np.ndarray:
    if kind == "qpsk":
        return qpsk_symbols(rng, k)
    if kind == "gaussian":
        return gaussian_symbols(rng, k)
    raise InvalidParameterError(f"unknown symbol alphabet {kind!r}")


def spread(assignment: SpreadingAssignment, pop: UserPopulation, symbols,
           sys: Optional[SystemConfig] = None) -> TransmitGrid:
    s = np.asarray(symbols, dtype=complex).reshape(-1)
    if s.size != assignment.num_users or s.size != len(pop):
        raise InvalidInputError(f"expected {assignment.num_users} symbols, got {s.size}")
    if sys is not None and assignment.codes.shape[1] != sys.spreading_length:
        raise InvalidInputError("code length does not match the system spreading length")
    x = np.sqrt(pop.powers)[:, None] * assignment.codes * s[:, None]
    return TransmitGrid(x, s)


def superpose(tx: TransmitGrid, ch: ChannelRealization, pop: UserPopulation,
              noise_var: float, rng: Optional[np.random.Generator] = None) -> ReceivedGrid:
    if noise_var < 0:
        raise InvalidParameterError("noise variance must be non-negative")
    k, n = tx.x.shape
    if ch.h.shape[:2] != (k, n) or len(pop) != k:
        raise InvalidInputError(f"grid {tx.x.shape} does not match channel {ch.h.shape}")
    m = ch.h.shape[2]
    y = np.einsum("knm,kn->nm", ch.h, np.sqrt(pop.gains)[:, None] * tx.x)
    if noise_var > 0:
        if rng is None:
            raise InvalidParameterError("a random source is needed for non-zero noise")
        v = np.sqrt(noise_var / 2) * (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    else:
        v = np.zeros((n, m), dtype=complex)
    return ReceivedGrid(y + v, v, float(noise_var))


def _targets(target_user, k: int) -> tuple:
    if target_user is None:
        return tuple(range(k))
    t = (int(target_user),) if np.ndim(target_user) == 0 else tuple(int(i) for i in target_user)
    for i in t:
        if not 0 <= i < k:
            raise InvalidTargetError(f"user {i} has no channel entry")
    return t


def combiner_weights(ch: ChannelRealization, targets: Sequence[int], mode: str = MRC,
                     pop: Optional[UserPopulation] = None, noise_var: float = 0.0) -> np.ndarray:
    """Spatial combiner ``d[t, n, :]`` for each target.

    MRC uses the channel itself.  MMSE uses
    ``M * g_t P_t * (sum_j g_j P_j h_j h_j^H + noise_var I)^-1 h_t``; the
    ``g_t P_t`` factor keeps ``(1/M) d^H h`` of order one for absolute powers.
    """
    t = list(targets)
    h = ch.h
    if mode == MRC:
        return h[t].copy()
    if mode != MMSE:
        raise InvalidParameterError(f"unknown combiner {mode!r}")
    if pop is None:
        raise InvalidParameterError("MMSE combining needs the user population")
    m = h.shape[2]
    p = pop.gains * pop.powers
    hn = h.transpose(1, 2, 0)  # N, M, K
    cov = (hn * p) @ hn.conj().transpose(0, 2, 1) + noise_var * np.eye(m)
    if noise_var == 0:
        cov += 1e-12 * np.trace(cov, axis1=1, axis2=2).real.max() / m * np.eye(m)
    sol = np.linalg.solve(cov, hn[:, :, t])  # N, M, T
    return m * sol.transpose(2, 0, 1) * p[t][:, None, None]


def combine(rx: ReceivedGrid, ch: ChannelRealization, target_user=None, mode: str = MRC,
            pop: Optional[UserPopulation] = None) -> CombinedSamples:
    """Spatially combine the received grid for one or several target users.

    ``r[t, n] = (1/M) d[t, n]^H y[n]``.
    """
    targets = _targets(target_user, ch.num_users)
    d = combiner_weights(ch, targets, mode, pop, rx.noise_var)
    m = ch.num_antennas
    r = np.einsum("tnm,nm->tn", d.conj(), rx.y) / m
    return CombinedSamples(r, d, targets, mode)


def effective_code_tensor(ch: ChannelRealization, d: np.ndarray,
                          assignment: SpreadingAssignment) -> np.ndarray:
    """``ceff[t, j, n] = (1/M) d[t, n]^H h[j, n] c_j[n]`` for every target row ``t``."""
    m = ch.num_antennas
    g = d.conj().transpose(1, 0, 2) @ ch.h.transpose(1, 2, 0)  # N, T, K
    return g.transpose(1, 2, 0) * assignment.codes[None, :, :] / m


def effective_codes(ch: ChannelRealization, combined: CombinedSamples,
                    assignment: SpreadingAssignment, target_user: int,
                    rx: Optional[ReceivedGrid] = None) -> EffectiveCodeSet:
    t = combined.row(target_user)
    d = combined.d[t]
    m = ch.num_antennas
    codes = np.einsum("nm,jnm->jn", d.conj(), ch.h) / m * assignment.codes
    noise = None
    if rx is not None:
        noise = np.einsum("nm,nm->n", d.conj(), rx.noise) / m
    return EffectiveCodeSet(int(target_user), codes, noise)


def cross_gain_matrix(ch: ChannelRealization, d: np.ndarray, targets: Sequence[int],
                      assignment: SpreadingAssignment) -> np.ndarray:
    """``Z[t, j] = c_t^H ceff_j`` as seen by target ``t`` (one GEMM)."""
    c = assignment.codes
    t = list(targets)
    k, n, m = ch.h.shape
    if d.shape != (len(t), n, m):
        raise InvalidInputError(f"combiner weights {d.shape} do not match {len(t)} targets on {(n, m)}")
    lhs = (d * c[t][:, :, None]).conj().reshape(len(t), n * m)
    rhs = (ch.h * c[:, :, None]).reshape(k, n * m)
    return lhs @ rhs.T / m


def combined_noise_power(d: np.ndarray, weights: np.ndarray, noise_var: float, m: int) -> np.ndarray:
    """``(1/M^2) sum_n |w_n|^2 ||d_n||^2 noise_var`` for each target row."""
    dn = np.sum(np.abs(d) ** 2, axis=2)
    return noise_var * np.sum(np.abs(weights) ** 2 * dn, axis=1) / m ** 2


def _check_kind(assignment: SpreadingAssignment, k: int, want_hd: bool):
    if not 0 <= k < assignment.num_users or bool(assignment.is_hd[k]) != want_hd:
        raise InvalidTargetError(f"user {k} is not an {'HD' if want_hd else 'LD'} user")


def detect_ld(combined: CombinedSamples, assignment: SpreadingAssignment, k: int) -> complex:
    _check_kind(assignment, k, want_hd=False)
    return complex(np.vdot(assignment.codes[k], combined.r[combined.row(k)]))


def detect_hd_su(combined: CombinedSamples, assignment: SpreadingAssignment, k: int) -> complex:
    _check_kind(assignment, k, want_hd=True)
    return complex(np.vdot(assignment.codes[k], combined.r[combined.row(k)]))


def sic_order(pop: UserPopulation) -> np.ndarray:
    """HD users by descending sqrt(P_k g_k); ties keep ascending user id."""
    hd = pop.hd_ids
    return hd[np.argsort(-pop.amplitudes[hd], kind="stable")]


def _qpsk_slice(z: complex) -> complex:
    return (np.sign(z.real) + 1j * np.sign(z.imag)) / np.sqrt(2)


def _mmse_filter(t_mat: np.ndarray, col: int, reg: float) -> np.ndarray:
    n = t_mat.shape[0]
    gram = t_mat @ t_mat.conj().T
    if reg <= 0:
        # noise-free, LD-free: tiny ridge keeps the solve well posed
        reg = 1e-12 * max(np.trace(gram).real / n, np.finfo(float).tiny)
    a = gram + reg * np.eye(n)
    try:
        return np.linalg.solve(a, t_mat[:, col])
    except np.linalg.LinAlgError:
        log.warning("singular MMSE-SIC matrix, falling back to pseudo-inverse")
        return np.linalg.pinv(a) @ t_mat[:, col]


def detect_hd_mmse_sic(combined: CombinedSamples, effective: np.ndarray, pop: UserPopulation,
                       noise_var: float, ld_interference_power: Optional[float] = None,
                       symbols: Optional[np.ndarray] = None, recompute: bool = True,
                       decision_directed: bool = False) -> SicResult:
    """MMSE filtering with successive cancellation over the HD class.

    ``effective[t]`` holds the effective codes of all users through the
    combiner of ``combined.targets[t]``.  Users are detected in descending
    received amplitude.  At each stage the filter is
    ``(T T^H + (noise_var + P_LD)/M I)^-1 T[:, k]`` with ``T`` the
    amplitude-scaled effective codes of the HD users not yet cancelled (all
    HD users when ``recompute`` is False).  Cancellation uses the true
    symbols unless ``decision_directed`` is set.
    """
    if pop.hd_ids.size == 0:
        raise InvalidTargetError("MMSE-SIC needs at least one HD user")
    if symbols is None and not decision_directed:
        raise InvalidInputError("genie-aided cancellation needs the transmitted symbols")
    a = pop.amplitudes
    if ld_interference_power is None:
        ld_interference_power = float(np.sum(a[pop.ld_ids] ** 2))
    m = combined.d.shape[2]
    reg = (noise_var + ld_interference_power) / m
    order = sic_order(pop)
    remaining = list(order)
    decoded, decisions = [], []
    samples = np.empty(order.size, dtype=complex)
    filters = np.empty((order.size, combined.r.shape[1]), dtype=complex)
    rows = np.empty(order.size, dtype=int)
    active = []
    for i, k in enumerate(order):
        t = combined.row(k)
        rows[i] = t
        ceff = effective[t]
        r_i = combined.r[t].copy()
        for j, s_hat in zip(decoded, decisions):
            r_i -= a[j] * ceff[j] * s_hat
        cols = remaining if recompute else list(order)
        t_mat = (ceff[cols] * a[cols][:, None]).T
        delta = _mmse_filter(t_mat, cols.index(k), reg)
        filters[i] = delta
        samples[i] = np.vdot(delta, r_i)
        active.append(tuple(remaining))
        if decision_directed:
            gain = a[k] * np.vdot(delta, ceff[k])
            s_hat = _qpsk_slice(samples[i] / gain)
        else:
            s_hat = symbols[k]
        decoded.append(k)
        decisions.append(s_hat)
        remaining.remove(k)
    return SicResult(order, samples, filters, np.array(decisions), rows, tuple(active))


def select_hd_detector(k_hd: int, m: int, n_hd: int, threshold: float = 0.5,
                       override: Optional[str] = None) -> str:
    """Use MMSE-SIC only when K^HD is comparable to the spreading gain M*N^HD."""
    if override is not None and override != "auto":
        if override not in (SU, SIC):
            raise InvalidParameterError(f"unknown detector override {override!r}")
        return override
    return SIC if k_hd >= threshold * m * n_hd else SU
