"""Complex sparse matrices, block partitions and block-diagonal factorizations.

Indices are 0-based throughout the Python API.  Matrix Market text is 1-based
on disk, as the format requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NonFiniteValue,
    ParseError,
    PartitionMismatch,
    SingularBlock,
    UnsupportedFormat,
)

__all__ = [
    "ComplexSparseMatrix",
    "BlockPartition",
    "LogDet",
    "FactoredBlockDiag",
    "from_entries",
    "split",
    "block_lu",
    "blockdiag_solve",
    "sparse_product",
    "trace",
    "is_hermitian",
    "read_matrix_market",
    "write_matrix_market",
]

# products whose entries fall below this magnitude are treated as structural zeros
PRODUCT_DROP_TOL = 1e-300


def _wrap_phase(phase: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(phase, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


class ComplexSparseMatrix:
    """Square complex matrix held in canonical CSR form.

    Canonical means sorted column indices, no duplicates and no explicit
    zeros, so two matrices with the same entries compare equal.  Instances
    are treated as immutable.
    """

    __slots__ = ("_csr",)

    def __init__(self, csr: sp.csr_array):
        self._csr = csr

    @classmethod
    def from_scipy(cls, mat) -> "ComplexSparseMatrix":
        csr = sp.csr_array(mat, dtype=np.complex128, copy=True)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got {csr.shape}")
        if not np.all(np.isfinite(csr.data)):
            raise NonFiniteValue("matrix contains NaN or Inf")
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        csr.data.setflags(write=False)
        return cls(csr)

    @classmethod
    def from_dense(cls, a) -> "ComplexSparseMatrix":
        return cls.from_scipy(sp.csr_array(np.asarray(a, dtype=np.complex128)))

    @classmethod
    def identity(cls, n: int) -> "ComplexSparseMatrix":
        return cls.from_scipy(sp.identity(n, dtype=np.complex128, format="csr"))

    @classmethod
    def zeros(cls, n: int) -> "ComplexSparseMatrix":
        return cls.from_scipy(sp.csr_array((n, n), dtype=np.complex128))

    @property
    def order(self) -> int:
        return self._csr.shape[0]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_array:
        """The underlying canonical CSR array (do not mutate)."""
        return self._csr

    def entries(self) -> Iterator[tuple[int, int, complex]]:
        """Yield ``(row, col, value)`` in row-major, then column order."""
        indptr, indices, data = self._csr.indptr, self._csr.indices, self._csr.data
        for i in range(self.order):
            for k in range(indptr[i], indptr[i + 1]):
                yield i, int(indices[k]), complex(data[k])

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def conj_transpose(self) -> "ComplexSparseMatrix":
        return ComplexSparseMatrix.from_scipy(self._csr.conj().T)

    def norm1(self) -> float:
        """Maximum absolute column sum."""
        if self.nnz == 0:
            return 0.0
        return float(abs(self._csr).sum(axis=0).max())

    def norm_inf(self) -> float:
        """Maximum absolute row sum."""
        if self.nnz == 0:
            return 0.0
        return float(abs(self._csr).sum(axis=1).max())

    def __add__(self, other: "ComplexSparseMatrix") -> "ComplexSparseMatrix":
        _check_same_order(self, other)
        return ComplexSparseMatrix.from_scipy(self._csr + other._csr)

    def __sub__(self, other: "ComplexSparseMatrix") -> "ComplexSparseMatrix":
        _check_same_order(self, other)
        return ComplexSparseMatrix.from_scipy(self._csr - other._csr)

    def __mul__(self, scalar: complex) -> "ComplexSparseMatrix":
        return ComplexSparseMatrix.from_scipy(self._csr * complex(scalar))

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComplexSparseMatrix):
            return NotImplemented
        a, b = self._csr, other._csr
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ComplexSparseMatrix(order={self.order}, nnz={self.nnz})"


def _check_same_order(a: ComplexSparseMatrix, b: ComplexSparseMatrix) -> None:
    if a.order != b.order:
        raise DimensionMismatch(f"orders differ: {a.order} vs {b.order}")


def from_entries(
    n: int, triples: Iterable[tuple[int, int, complex]]
) -> ComplexSparseMatrix:
    """Build an ``n x n`` matrix from 0-based ``(row, col, value)`` triples.

    Duplicate positions are summed; entries that cancel to exactly zero are
    dropped.
    """
    if n < 1:
        raise ValueError("order must be positive")
    rows, cols, vals = [], [], []
    for r, c, v in triples:
        r, c, v = int(r), int(c), complex(v)
        if not (0 <= r < n and 0 <= c < n):
            raise IndexOutOfRange(f"entry ({r}, {c}) outside a {n}x{n} matrix")
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise NonFiniteValue(f"entry ({r}, {c}) is not finite: {v}")
        rows.append(r)
        cols.append(c)
        vals.append(v)
    coo = sp.coo_array(
        (np.array(vals, dtype=np.complex128), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(n, n),
    )
    return ComplexSparseMatrix.from_scipy(coo.tocsr())


@dataclass(frozen=True)
class BlockPartition:
    """Block boundaries ``0 = offsets[0] < ... < offsets[k] = n``."""

    offsets: tuple[int, ...]

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if len(offs) < 2 or offs[0] != 0:
            raise PartitionMismatch("offsets must start at 0 and contain at least one block")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise PartitionMismatch("offsets must be strictly increasing")

    @classmethod
    def uniform(cls, n: int, block_size: int) -> "BlockPartition":
        if block_size < 1 or n % block_size:
            raise PartitionMismatch(f"block size {block_size} does not divide {n}")
        return cls(tuple(range(0, n + 1, block_size)))

    @classmethod
    def point(cls, n: int) -> "BlockPartition":
        return cls(tuple(range(n + 1)))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        return cls(tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist()))

    @property
    def n(self) -> int:
        return self.offsets[-1]

    @property
    def k(self) -> int:
        return len(self.offsets) - 1

    def sizes(self) -> list[int]:
        return [b - a for a, b in zip(self.offsets, self.offsets[1:])]

    def is_uniform(self) -> bool:
        return len(set(self.sizes())) == 1

    def blocks(self) -> Iterator[tuple[int, int]]:
        return zip(self.offsets, self.offsets[1:])

    def block_index(self) -> np.ndarray:
        """Block number of every row/column index."""
        return np.repeat(np.arange(self.k), self.sizes())


@dataclass(frozen=True)
class LogDet:
    """A determinant stored as ``ln|det|`` plus an unwrapped phase."""

    ln_abs: float
    phase: float = 0.0

    @property
    def principal_phase(self) -> float:
        return _wrap_phase(self.phase)

    @property
    def value(self) -> complex:
        """The complex logarithm ``ln_abs + i*phase`` on the unwrapped branch."""
        return complex(self.ln_abs, self.phase)

    def det(self) -> complex:
        """The determinant itself; overflows to inf for huge ``ln_abs``."""
        return complex(np.exp(complex(self.ln_abs, self.principal_phase)))

    def __add__(self, other: "LogDet") -> "LogDet":
        return LogDet(self.ln_abs + other.ln_abs, self.phase + other.phase)

    @classmethod
    def sum(cls, parts: Iterable["LogDet"]) -> "LogDet":
        parts = list(parts)
        return cls(math.fsum(p.ln_abs for p in parts), math.fsum(p.phase for p in parts))

    @classmethod
    def from_pivots(cls, pivots: np.ndarray, swaps: int) -> "LogDet":
        """Sum of ``log(pivot)`` with the permutation sign folded in as 0 or pi."""
        pivots = np.asarray(pivots, dtype=np.complex128)
        ln_abs = math.fsum(np.log(np.abs(pivots)).tolist())
        phase = math.fsum(np.angle(pivots).tolist()) + (math.pi if swaps % 2 else 0.0)
        return cls(ln_abs, phase)

    def distance(self, other: "LogDet") -> float:
        """Branch-safe distance ``|d ln_abs + i * wrap(d phase)|``."""
        return abs(complex(self.ln_abs - other.ln_abs, _wrap_phase(self.phase - other.phase)))


def split(
    M: ComplexSparseMatrix, P: BlockPartition
) -> tuple[ComplexSparseMatrix, ComplexSparseMatrix]:
    """Split ``M`` into its block diagonal (pinching) and off-diagonal blocks."""
    if P.n != M.order:
        raise PartitionMismatch(f"partition covers {P.n} indices, matrix has order {M.order}")
    coo = M.csr.tocoo()
    blk = P.block_index()
    inside = blk[coo.row] == blk[coo.col]
    shape = (M.order, M.order)
    md = sp.coo_array((coo.data[inside], (coo.row[inside], coo.col[inside])), shape=shape)
    mo = sp.coo_array((coo.data[~inside], (coo.row[~inside], coo.col[~inside])), shape=shape)
    return ComplexSparseMatrix.from_scipy(md.tocsr()), ComplexSparseMatrix.from_scipy(mo.tocsr())


def _lu_partial_pivot(a: np.ndarray, pivot_tol: float) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """In-place LU with partial pivoting, LAPACK ``getrf`` layout.

    Returns ``(lu, piv, swaps, singular)`` where ``piv[k]`` is the row
    exchanged with row ``k`` at step ``k``.
    """
    n = a.shape[0]
    scale = np.abs(a).sum(axis=0).max() if n else 0.0
    threshold = pivot_tol * scale
    piv = np.arange(n, dtype=np.int32)
    swaps = 0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv[k] = p
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            swaps += 1
        pivot = a[k, k]
        if not abs(pivot) > threshold:
            return a, piv, swaps, True
        if k + 1 < n:
            a[k + 1:, k] /= pivot
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return a, piv, swaps, False


@dataclass(frozen=True)
class FactoredBlockDiag:
    """Dense LU factors of every diagonal block of ``M_D``."""

    partition: BlockPartition
    factors: tuple[tuple[np.ndarray, np.ndarray], ...]
    block_logdets: tuple[LogDet, ...]
    singular_flag: bool = False
    singular_block: int | None = field(default=None)

    @property
    def order(self) -> int:
        return self.partition.n

    @property
    def logdet(self) -> LogDet:
        return LogDet.sum(self.block_logdets)


def _dense_block(csr: sp.csr_array, lo: int, hi: int) -> np.ndarray:
    return csr[lo:hi, lo:hi].toarray().astype(np.complex128, copy=True)


def block_lu(
    M_D: ComplexSparseMatrix,
    P: BlockPartition,
    pivot_tol: float = 1e-12,
    *,
    raise_on_singular: bool = True,
) -> FactoredBlockDiag:
    """Factor each diagonal block of ``M_D`` with partial pivoting.

    A block is singular when some pivot satisfies
    ``|pivot| <= pivot_tol * ||block||_1``.  By default that raises
    :class:`SingularBlock`; with ``raise_on_singular=False`` the returned
    object has ``singular_flag`` set and factoring stops at that block.
    """
    if P.n != M_D.order:
        raise PartitionMismatch(f"partition covers {P.n} indices, matrix has order {M_D.order}")
    coo = M_D.csr.tocoo()
    blk = P.block_index()
    if np.any(blk[coo.row] != blk[coo.col]):
        raise PartitionMismatch("matrix has entries outside the diagonal blocks")

    factors, logdets = [], []
    for b, (lo, hi) in enumerate(P.blocks()):
        lu, piv, swaps, singular = _lu_partial_pivot(_dense_block(M_D.csr, lo, hi), pivot_tol)
        if singular:
            if raise_on_singular:
                raise SingularBlock(b)
            return FactoredBlockDiag(P, tuple(factors), tuple(logdets), True, b)
        factors.append((lu, piv))
        logdets.append(LogDet.from_pivots(np.diag(lu), swaps))
    return FactoredBlockDiag(P, tuple(factors), tuple(logdets))


def blockdiag_solve(F: FactoredBlockDiag, B: ComplexSparseMatrix) -> ComplexSparseMatrix:
    """Solve ``M_D X = B`` one block row at a time.

    Only the columns where a block row of ``B`` has entries are densified, so
    empty block columns stay structurally zero in ``X``.
    """
    if F.singular_flag:
        raise SingularBlock(F.singular_block if F.singular_block is not None else -1)
    if B.order != F.order:
        raise DimensionMismatch(f"right-hand side has order {B.order}, factors {F.order}")
    csr = B.csr
    rows, cols, vals = [], [], []
    for (lo, hi), lu_piv in zip(F.partition.blocks(), F.factors):
        band = csr[lo:hi, :]
        if band.nnz == 0:
            continue
        used = np.unique(band.indices)
        rhs = band[:, used].toarray()
        x = sla.lu_solve(lu_piv, rhs, check_finite=False)
        r, c = np.nonzero(x)
        rows.append(r + lo)
        cols.append(used[c])
        vals.append(x[r, c])
    n = F.order
    if not rows:
        return ComplexSparseMatrix.zeros(n)
    coo = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return ComplexSparseMatrix.from_scipy(coo.tocsr())


def sparse_product(A: ComplexSparseMatrix, B: ComplexSparseMatrix) -> ComplexSparseMatrix:
    """Exact sparse-sparse product; magnitudes below 1e-300 are dropped."""
    _check_same_order(A, B)
    prod = sp.csr_array(A.csr @ B.csr)
    data = prod.data
    data[np.abs(data) < PRODUCT_DROP_TOL] = 0
    return ComplexSparseMatrix.from_scipy(prod)


def trace(A: ComplexSparseMatrix) -> complex:
    return complex(math.fsum(A.diagonal().real.tolist()), math.fsum(A.diagonal().imag.tolist()))


def trace_of_product(A: ComplexSparseMatrix, B: ComplexSparseMatrix) -> complex:
    """``trace(A @ B)`` without forming the product."""
    _check_same_order(A, B)
    s = A.csr.multiply(B.csr.T)
    d = s.data if sp.issparse(s) else np.asarray(s).ravel()
    return complex(math.fsum(d.real.tolist()), math.fsum(d.imag.tolist()))


def is_hermitian(M: ComplexSparseMatrix, tol: float = 1e-10) -> bool:
    """True iff ``||M - M*||_1 <= tol * ||M||_1``."""
    return (M - M.conj_transpose()).norm1() <= tol * M.norm1()


# --- Matrix Market ---------------------------------------------------------

_FIELDS = {"real", "complex", "integer"}
_SYMMETRIES = {"general", "symmetric", "hermitian"}


def read_matrix_market(text: str) -> ComplexSparseMatrix:
    """Parse coordinate Matrix Market text into a square complex matrix.

    Symmetric and Hermitian storage is expanded to general on read.
    """
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty input")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise ParseError(1, "missing '%%MatrixMarket matrix' header")
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fmt != "coordinate":
        raise UnsupportedFormat(f"only coordinate format is supported, got {fmt!r}")
    if fld not in _FIELDS:
        raise UnsupportedFormat(f"unsupported field {fld!r}")
    if sym not in _SYMMETRIES:
        raise UnsupportedFormat(f"unsupported symmetry {sym!r}")
    ncols_expected = 4 if fld == "complex" else 3

    size = None
    triples: list[tuple[int, int, complex]] = []
    seen = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if size is None:
            if len(parts) != 3:
                raise ParseError(lineno, "size line must be 'rows cols nnz'")
            try:
                nr, nc, nnz = (int(p) for p in parts)
            except ValueError:
                raise ParseError(lineno, "size line must contain integers") from None
            if nr != nc:
                raise UnsupportedFormat(f"matrix must be square, got {nr}x{nc}")
            if nr < 1 or nnz < 0:
                raise ParseError(lineno, "invalid dimensions")
            size = (nr, nnz)
            continue
        if len(parts) != ncols_expected:
            raise ParseError(lineno, f"expected {ncols_expected} fields, got {len(parts)}")
        try:
            r, c = int(parts[0]) - 1, int(parts[1]) - 1
            re = float(parts[2])
            im = float(parts[3]) if fld == "complex" else 0.0
        except ValueError:
            raise ParseError(lineno, f"malformed entry {line!r}") from None
        n = size[0]
        if not (0 <= r < n and 0 <= c < n):
            raise ParseError(lineno, f"index ({r + 1}, {c + 1}) out of range")
        if not (math.isfinite(re) and math.isfinite(im)):
            raise ParseError(lineno, "non-finite value")
        if sym != "general" and c > r:
            raise ParseError(lineno, f"{sym} storage must list the lower triangle only")
        v = complex(re, im)
        triples.append((r, c, v))
        if r != c:
            if sym == "symmetric":
                triples.append((c, r, v))
            elif sym == "hermitian":
                triples.append((c, r, v.conjugate()))
        seen += 1
    if size is None:
        raise ParseError(len(lines), "missing size line")
    if seen != size[1]:
        raise ParseError(len(lines), f"expected {size[1]} entries, found {seen}")
    return from_entries(size[0], triples)


def write_matrix_market(M: ComplexSparseMatrix, comments: Sequence[str] = ()) -> str:
    """Serialize as ``complex general``; floats use shortest round-trip repr."""
    out = ["%%MatrixMarket matrix coordinate complex general"]
    out.extend(f"% {c}" for c in comments)
    out.append(f"{M.order} {M.order} {M.nnz}")
    for r, c, v in M.entries():
        out.append(f"{r + 1} {c + 1} {v.real!r} {v.imag!r}")
    return "\n".join(out) + "\n"
