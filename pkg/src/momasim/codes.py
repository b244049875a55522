"""Orthogonal codebook, class partition, combining matrices and final codes.

HD users take columns of their class block directly (round-robin when
there are more users than columns).  LD users of level ``l`` take columns
of ``U_l @ W_l`` where ``W_l`` has i.i.d. +-1/sqrt(N_l) entries, so that
every LD code keeps unit norm and stays exactly orthogonal to every HD
code, while codes inside one LD class are only quasi-orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (InvalidAssignmentError, InvalidParameterError, InvalidPlanError,
                     UnsupportedSizeError)
from .scenario import HD, ClassPlan, UserPopulation


@dataclass(frozen=True)
class OrthogonalCodebook:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ClassCodePartition:
    u_hd: np.ndarray
    u_ld: tuple
    columns_hd: tuple
    columns_ld: tuple


@dataclass(frozen=True)
class CombiningMatrix:
    w: np.ndarray
    kind: str = "sign"

    @property
    def n_ld(self) -> int:
        return self.w.shape[0]

    @property
    def k_ld(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class SpreadingAssignment:
    """Final length-N code of every user, rows ordered by user id."""

    codes: np.ndarray
    class_index: np.ndarray
    code_index: np.ndarray
    partition: ClassCodePartition
    combining: tuple

    @property
    def num_users(self) -> int:
        return self.codes.shape[0]

    @property
    def is_hd(self) -> np.ndarray:
        return self.class_index == 0


def generate_hadamard(n: int) -> OrthogonalCodebook:
    """Sylvester Walsh-Hadamard matrix scaled to orthonormal columns."""
    if not isinstance(n, (int, np.integer)) or n < 1 or n & (n - 1):
        raise UnsupportedSizeError(f"Hadamard size must be a power of two, got {n}")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return OrthogonalCodebook(h / np.sqrt(n))


def partition_codebook(u: OrthogonalCodebook, plan: ClassPlan) -> ClassCodePartition:
    """Split columns contiguously: HD block first, then LD levels in order."""
    if plan.total_codes != u.n:
        raise InvalidPlanError(f"plan uses {plan.total_codes} codes, codebook has {u.n}")
    start = plan.hd_class.code_count
    cols_hd = tuple(range(start))
    blocks, cols_ld = [], []
    for spec in plan.ld_classes:
        cols = tuple(range(start, start + spec.code_count))
        blocks.append(u.matrix[:, cols])
        cols_ld.append(cols)
        start += spec.code_count
    return ClassCodePartition(u.matrix[:, cols_hd], tuple(blocks), cols_hd, tuple(cols_ld))


def sample_combining_matrix(n_ld: int, k_ld: int, rng: np.random.Generator,
                            kind: str = "sign") -> CombiningMatrix:
    """Draw an ``n_ld x k_ld`` combining matrix.

    ``kind="sign"`` gives equiprobable +-1/sqrt(n_ld) entries (unit column
    norms exactly).  ``kind="gaussian"`` gives N(0, 1/n_ld) entries, which
    meet the column-norm constraint only on average.
    """
    if n_ld < 1 or k_ld < 1:
        raise InvalidParameterError(f"combining matrix needs positive dimensions, got {n_ld}x{k_ld}")
    if kind == "sign":
        w = (2.0 * rng.integers(0, 2, size=(n_ld, k_ld)) - 1.0) / np.sqrt(n_ld)
    elif kind == "gaussian":
        w = rng.standard_normal((n_ld, k_ld)) / np.sqrt(n_ld)
    else:
        raise InvalidParameterError(f"unknown combining kind {kind!r}")
    return CombiningMatrix(w, kind)


def empty_combining_matrix(n_ld: int) -> CombiningMatrix:
    """Placeholder for an LD class that currently has no users."""
    return CombiningMatrix(np.zeros((n_ld, 0)))


def assign_codes(partition: ClassCodePartition, ws: Sequence[CombiningMatrix],
                 pop: UserPopulation) -> SpreadingAssignment:
    plan = pop.plan
    if len(ws) != len(plan.ld_classes):
        raise InvalidAssignmentError(
            f"need one combining matrix per LD class ({len(plan.ld_classes)}), got {len(ws)}")
    mixed = []
    for l, (spec, u_l, w) in enumerate(zip(plan.ld_classes, partition.u_ld, ws), start=1):
        if w.w.shape != (u_l.shape[1], spec.user_count):
            raise InvalidAssignmentError(
                f"LD level {spec.level}: combining matrix {w.w.shape} does not match "
                f"({u_l.shape[1]}, {spec.user_count})")
        mixed.append(u_l @ w.w)
    n = partition.u_hd.shape[0]
    codes = np.empty((len(pop), n))
    for user in pop.users:
        if user.kind == HD:
            if user.code_index >= partition.u_hd.shape[1]:
                raise InvalidAssignmentError(f"user {user.id}: HD column {user.code_index} out of range")
            codes[user.id] = partition.u_hd[:, user.code_index]
        else:
            block = mixed[user.class_index - 1]
            if user.code_index >= block.shape[1]:
                raise InvalidAssignmentError(f"user {user.id}: LD column {user.code_index} out of range")
            codes[user.id] = block[:, user.code_index]
    return SpreadingAssignment(
        codes=codes,
        class_index=pop.class_index.copy(),
        code_index=np.array([u.code_index for u in pop.users], dtype=int),
        partition=partition,
        combining=tuple(ws),
    )


def cross_correlation(assignment: SpreadingAssignment) -> np.ndarray:
    """K x K matrix of code inner products c_i^H c_j."""
    c = assignment.codes
    return c.conj() @ c.T
