import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detapprox.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NonFiniteValue,
    ParseError,
    PartitionMismatch,
    SingularBlock,
    UnsupportedFormat,
)
from detapprox.sparsemat import (
    BlockPartition,
    ComplexSparseMatrix,
    LogDet,
    block_lu,
    blockdiag_solve,
    from_entries,
    is_hermitian,
    read_matrix_market,
    sparse_product,
    split,
    trace,
    trace_of_product,
    write_matrix_market,
)


def random_dense(n, seed, density=0.5):
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * (rng.random((n, n)) < density)
    return a + n * np.eye(n)


# --- ComplexSparseMatrix ------------------------------------------------------


def test_duplicates_are_summed_and_cancellations_dropped():
    M = from_entries(3, [(0, 0, 1), (0, 0, 2), (1, 2, 1j), (1, 2, -1j), (2, 1, 5)])
    assert M.nnz == 2
    assert list(M.entries()) == [(0, 0, 3 + 0j), (2, 1, 5 + 0j)]


def test_out_of_range_and_non_finite_entries_rejected():
    with pytest.raises(IndexOutOfRange):
        from_entries(2, [(2, 0, 1.0)])
    with pytest.raises(IndexOutOfRange):
        from_entries(2, [(0, -1, 1.0)])
    with pytest.raises(NonFiniteValue):
        from_entries(2, [(0, 0, complex(1, math.nan))])
    with pytest.raises(NonFiniteValue):
        from_entries(2, [(0, 0, math.inf)])


def test_storage_is_immutable_and_copied():
    a = np.eye(3, dtype=complex)
    M = ComplexSparseMatrix.from_dense(a)
    a[0, 0] = 7
    assert M.to_dense()[0, 0] == 1
    with pytest.raises(ValueError):
        M.csr.data[0] = 2


def test_norms_and_conjugate_transpose():
    M = from_entries(2, [(0, 0, 1), (0, 1, 3j), (1, 0, -2), (1, 1, 4)])
    assert M.norm1() == pytest.approx(7.0)
    assert M.norm_inf() == pytest.approx(6.0)
    assert np.array_equal(M.conj_transpose().to_dense(), M.to_dense().conj().T)
    assert not is_hermitian(M)
    assert is_hermitian(M + M.conj_transpose())


def test_arithmetic_and_equality():
    A = ComplexSparseMatrix.identity(3)
    assert A - A == ComplexSparseMatrix.zeros(3)
    assert (A * 2j).to_dense()[1, 1] == 2j
    with pytest.raises(DimensionMismatch):
        A + ComplexSparseMatrix.identity(2)


# --- BlockPartition --------------------------------------------------------------


def test_partition_constructors():
    P = BlockPartition.from_sizes([2, 3, 1])
    assert P.offsets == (0, 2, 5, 6) and P.n == 6 and P.k == 3
    assert not P.is_uniform()
    assert P.block_index().tolist() == [0, 0, 1, 1, 1, 2]
    assert BlockPartition.uniform(6, 2).sizes() == [2, 2, 2]
    assert BlockPartition.point(4).k == 4


@pytest.mark.parametrize("offsets", [(0,), (1, 3), (0, 2, 2), (0, 3, 1)])
def test_bad_partitions(offsets):
    with pytest.raises(PartitionMismatch):
        BlockPartition(offsets)


def test_uniform_requires_divisor():
    with pytest.raises(PartitionMismatch):
        BlockPartition.uniform(10, 3)


# --- LogDet --------------------------------------------------------------------------


def test_logdet_from_pivots_folds_in_permutation_sign():
    ld = LogDet.from_pivots(np.array([2.0, -3.0]), swaps=1)
    assert ld.ln_abs == pytest.approx(math.log(6))
    assert ld.phase == pytest.approx(2 * math.pi)
    assert ld.principal_phase == pytest.approx(0.0, abs=1e-15)
    assert ld.det() == pytest.approx(6.0)


def test_logdet_distance_wraps_phase():
    a = LogDet(1.0, math.pi - 1e-3)
    b = LogDet(1.0, -math.pi + 1e-3)
    assert a.distance(b) == pytest.approx(2e-3)


def test_logdet_sum():
    parts = [LogDet(0.1, 0.2)] * 10
    s = LogDet.sum(parts)
    assert s.ln_abs == 1.0 and s.phase == 2.0


# --- split, block LU, solves ---------------------------------------------------------


def test_split_reconstructs_matrix():
    M = ComplexSparseMatrix.from_dense(random_dense(7, 1))
    P = BlockPartition.from_sizes([3, 1, 3])
    M_D, M_off = split(M, P)
    assert M_D + M_off == M
    blk = P.block_index()
    for r, c, _ in M_D.entries():
        assert blk[r] == blk[c]
    for r, c, _ in M_off.entries():
        assert blk[r] != blk[c]


@pytest.mark.parametrize("seed", range(5))
def test_block_lu_logdet_matches_numpy(seed):
    a = random_dense(9, seed)
    P = BlockPartition.from_sizes([4, 2, 3])
    M_D, _ = split(ComplexSparseMatrix.from_dense(a), P)
    F = block_lu(M_D, P)
    sign, ln = np.linalg.slogdet(M_D.to_dense())
    assert F.logdet.ln_abs == pytest.approx(ln, rel=1e-12)
    assert abs(np.exp(1j * F.logdet.phase) - sign) < 1e-12


def test_block_lu_pivots_a_zero_leading_entry():
    M = from_entries(2, [(0, 1, 1), (1, 0, 1)])
    F = block_lu(M, BlockPartition((0, 2)))
    assert F.logdet.ln_abs == pytest.approx(0.0)
    assert F.logdet.det() == pytest.approx(-1.0)


def test_singular_block_reports_block_index():
    M = from_entries(4, [(0, 0, 1), (1, 1, 1), (2, 2, 1), (2, 3, 2), (3, 2, 1), (3, 3, 2)])
    P = BlockPartition.uniform(4, 2)
    with pytest.raises(SingularBlock) as exc:
        block_lu(M, P)
    assert exc.value.block == 1
    F = block_lu(M, P, raise_on_singular=False)
    assert F.singular_flag and F.singular_block == 1
    with pytest.raises(SingularBlock):
        blockdiag_solve(F, M)


def test_blockdiag_solve_matches_dense():
    a = random_dense(8, 3)
    P = BlockPartition.from_sizes([3, 3, 2])
    M = ComplexSparseMatrix.from_dense(a)
    M_D, M_off = split(M, P)
    X = blockdiag_solve(block_lu(M_D, P), M_off)
    expected = np.linalg.solve(M_D.to_dense(), M_off.to_dense())
    assert np.allclose(X.to_dense(), expected, atol=1e-12)


def test_products_and_traces():
    a = ComplexSparseMatrix.from_dense(random_dense(6, 4))
    b = ComplexSparseMatrix.from_dense(random_dense(6, 5))
    dense = a.to_dense() @ b.to_dense()
    assert np.allclose(sparse_product(a, b).to_dense(), dense)
    assert trace_of_product(a, b) == pytest.approx(np.trace(dense))
    assert trace(a) == pytest.approx(np.trace(a.to_dense()))


# --- Matrix Market ---------------------------------------------------------------------


def test_mm_symmetric_and_hermitian_expansion():
    sym = "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n1 1 2\n3 1 -1\n"
    M = read_matrix_market(sym)
    assert M.to_dense()[0, 2] == -1 and M.to_dense()[2, 0] == -1
    herm = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 1\n"
    H = read_matrix_market(herm)
    assert H.to_dense()[0, 1] == -1j and H.to_dense()[1, 0] == 1j


def test_mm_integer_field_and_comments():
    txt = "%%MatrixMarket matrix coordinate integer general\n% hi\n\n2 2 1\n2 1 7\n"
    assert read_matrix_market(txt).to_dense()[1, 0] == 7


@pytest.mark.parametrize(
    "text, line",
    [
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 3 1\n", 3),
        ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n", 3),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n", 3),
        ("%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 1 1\n", 3),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n", 3),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 nan\n", 3),
        ("not a header\n", 1),
    ],
)
def test_mm_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        read_matrix_market(text)
    assert exc.value.line == line


@pytest.mark.parametrize(
    "text",
    [
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
        "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n",
        "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1\n",
        "%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1\n",
    ],
)
def test_mm_unsupported_formats(text):
    with pytest.raises(UnsupportedFormat):
        read_matrix_market(text)


# bounded so that summed duplicates cannot overflow
finite = st.floats(min_value=-1e300, max_value=1e300, allow_nan=False)


@given(
    n=st.integers(1, 6),
    entries=st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), finite, finite), max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_mm_round_trip_is_exact(n, entries):
    triples = [(r % n, c % n, complex(x, y)) for r, c, x, y in entries]
    M = from_entries(n, triples)
    text = write_matrix_market(M, comments=["round trip"])
    assert read_matrix_market(text) == M
    assert write_matrix_market(read_matrix_market(text), comments=["round trip"]) == text
