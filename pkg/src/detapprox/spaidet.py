"""Sparse-inverse determinant approximation for Hermitian positive-definite matrices.

For index sets ``S_i`` drawn from ``{0..i}`` with ``i`` as the largest
member, ``sigma_i`` is the trailing diagonal entry of ``M[S_i, S_i]^{-1}`` and

    sigma = prod_i 1 / sigma_i,    det(M) <= sigma <= prod_i m_ii.

Growing any ``S_i`` can only lower ``sigma``; ``S_i = {0..i}`` is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CholeskyBreakdown,
    NonPositiveDiagonal,
    NotHermitian,
    ZeroDiagonal,
)
from .sparsemat import ComplexSparseMatrix, LogDet, is_hermitian

__all__ = [
    "SpaiPattern",
    "SpaiResult",
    "lower_neighbor_pattern",
    "spai_logdet",
    "hadamard_product_logdet",
]

DEFAULT_PATTERN_CAP = 64


@dataclass(frozen=True)
class SpaiPattern:
    """One sorted index set per row; ``sets[i]`` ends with ``i``."""

    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sets = tuple(tuple(int(j) for j in s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        for i, s in enumerate(sets):
            if not s or s[-1] != i:
                raise ValueError(f"pattern for row {i} must end with {i}")
            if any(b <= a for a, b in zip(s, s[1:])) or s[0] < 0:
                raise ValueError(f"pattern for row {i} must be sorted, distinct, non-negative")

    @classmethod
    def diagonal(cls, n: int) -> "SpaiPattern":
        return cls(tuple((i,) for i in range(n)))

    @classmethod
    def full_lower(cls, n: int) -> "SpaiPattern":
        return cls(tuple(tuple(range(i + 1)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.sets)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    def replace(self, i: int, new_set: Sequence[int]) -> "SpaiPattern":
        """Copy with row ``i``'s set swapped for ``new_set`` (``i`` is added)."""
        sets = list(self.sets)
        sets[i] = tuple(sorted(set(int(j) for j in new_set) | {i}))
        return SpaiPattern(tuple(sets))


@dataclass(frozen=True)
class SpaiResult:
    sigmas: tuple[float, ...]
    logdet: LogDet
    pattern_sizes: tuple[int, ...]


def lower_neighbor_pattern(
    M: ComplexSparseMatrix, level: int = 1, cap: int = DEFAULT_PATTERN_CAP
) -> SpaiPattern:
    """Neighbourhood patterns from the adjacency graph of ``M``.

    ``S_i`` collects every ``j <= i`` reachable from ``i`` in at most
    ``level`` steps through vertices ``<= i``, keeping only the ``cap``
    largest indices.  Level 1 is ``{j <= i : m_ij != 0} | {i}``.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if not is_hermitian(M, 1e-10):
        raise NotHermitian("sparse-inverse patterns need a Hermitian matrix")
    indptr = M.csr.indptr
    indices = M.csr.indices
    sets = []
    for i in range(M.order):
        reached = {i}
        frontier = [i]
        for _ in range(level):
            nxt = []
            for v in frontier:
                for j in indices[indptr[v]:indptr[v + 1]]:
                    j = int(j)
                    if j <= i and j not in reached:
                        reached.add(j)
                        nxt.append(j)
            if not nxt:
                break
            frontier = nxt
        sets.append(tuple(sorted(reached)[-cap:]))
    return SpaiPattern(tuple(sets))


def _gather(keys: np.ndarray, data: np.ndarray, n: int, sets: np.ndarray) -> np.ndarray:
    """Dense stack ``M[S, S]`` for each row of ``sets`` (shape ``(g, k)``)."""
    q = (sets[:, :, None] * n + sets[:, None, :]).ravel()
    pos = np.minimum(np.searchsorted(keys, q), keys.size - 1)
    hit = keys[pos] == q
    vals = np.where(hit, data[pos], 0.0)
    k = sets.shape[1]
    return vals.reshape(sets.shape[0], k, k)


def _trailing_pivots(subs: np.ndarray) -> np.ndarray:
    """Real trailing Cholesky pivots; NaN where the factorization breaks down."""
    try:
        return np.linalg.cholesky(subs)[:, -1, -1].real
    except np.linalg.LinAlgError:
        out = np.empty(subs.shape[0])
        for j, sub in enumerate(subs):
            try:
                out[j] = np.linalg.cholesky(sub)[-1, -1].real
            except np.linalg.LinAlgError:
                out[j] = np.nan
        return out


def spai_logdet(M: ComplexSparseMatrix, pattern: SpaiPattern) -> SpaiResult:
    """``ln sigma`` from a dense Cholesky factorization of each ``M[S_i, S_i]``.

    ``1 / sigma_i`` is the squared trailing diagonal entry of the factor.
    Sets of equal size are factored together as one stacked batch.  Raises
    :class:`CholeskyBreakdown` with the lowest offending row when a
    submatrix is not positive definite.
    """
    n = M.order
    if pattern.n != n:
        raise ValueError(f"pattern has {pattern.n} rows, matrix has order {n}")
    coo = M.csr.tocoo()
    # canonical CSR is row-major with sorted columns, so these keys are sorted
    keys = coo.row.astype(np.int64) * n + coo.col
    data = coo.data
    if keys.size == 0:
        raise CholeskyBreakdown(0)

    piv = np.empty(n)
    by_size: dict[int, list[int]] = {}
    for i, s in enumerate(pattern.sets):
        by_size.setdefault(len(s), []).append(i)
    for rows in by_size.values():
        sets = np.array([pattern.sets[i] for i in rows], dtype=np.int64)
        piv[rows] = _trailing_pivots(_gather(keys, data, n, sets))
    bad = ~(np.isfinite(piv) & (piv > 0.0))
    if np.any(bad):
        raise CholeskyBreakdown(int(np.argmax(bad)))
    sigmas = 1.0 / (piv * piv)
    logs = 2.0 * np.log(piv)
    return SpaiResult(tuple(sigmas.tolist()), LogDet(math.fsum(logs.tolist()), 0.0), tuple(pattern.sizes()))


def hadamard_product_logdet(M: ComplexSparseMatrix) -> LogDet:
    """``sum_i ln m_ii``; warns with :class:`NonPositiveDiagonal` for
    diagonals that are not real positive (the phase is then nonzero)."""
    d = M.diagonal()
    if np.any(d == 0):
        raise ZeroDiagonal("matrix has a zero diagonal entry")
    if np.any((d.real <= 0) | (d.imag != 0)):
        warnings.warn("diagonal is not real positive; phase is nonzero", NonPositiveDiagonal, stacklevel=2)
    return LogDet(math.fsum(np.log(np.abs(d)).tolist()), math.fsum(np.angle(d).tolist()))
