"""Zone determinant expansion of ``ln det(M)`` and its a-priori error bounds.

With ``M = M_D + M_off`` split along a block partition and
``A = M_D^{-1} M_off``, the order-``m`` approximation is

    delta_m = ln det(M_D) + sum_{p=1..m} (-1)^(p-1) / p * trace(A^p)

and, for ``rho = rho(A) < 1`` and ``c = -n ln(1 - rho)``,

    |ln det(M) - delta_m|                <= c rho^m
    |det(M) - e^delta_m| / |e^delta_m|   <= c rho^m exp(c rho^m)
                                         <= 7/4 c rho^m   if c rho^m < 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    CheckerboardViolation,
    EigenvalueBelowMinusOne,
    MemoryBudgetExceeded,
    NotPositiveDefinite,
    RhoNotLessThanOne,
    ZeroDiagonal,
)
from .oracle import (
    RhoEstimate,
    dense_cap,
    power_iteration_rho,
    symmetrized_zone_spectrum,
)
from .sparsemat import (
    BlockPartition,
    ComplexSparseMatrix,
    LogDet,
    _wrap_phase,
    block_lu,
    blockdiag_solve,
    is_hermitian,
    sparse_product,
    split,
    trace,
    trace_of_product,
)

__all__ = [
    "RhoEstimate",
    "BoundRow",
    "ExpansionReport",
    "zone_expansion",
    "checkerboard_parity",
    "log_error_bound",
    "det_rel_error_bounds",
    "pinching_bound_real",
    "gerschgorin_rho_bound",
    "diagonal_approximation",
    "logdet_error",
    "det_rel_error",
]

RhoMode = Union[str, float, RhoEstimate]

# default fill-in budget: nnz of any power of A may not exceed this multiple of nnz(M)
NNZ_CAP_FACTOR = 64
ODD_TRACE_TOL = 1e-12


class BoundRow(NamedTuple):
    abs_log_bound: float
    rel_det_bound: float
    tight_rel_bound: float | None


@dataclass
class ExpansionReport:
    """Everything produced by one run of :func:`zone_expansion`.

    ``deltas[p]`` is ``delta_p`` on the unwrapped branch of ``ln det(M_D)``;
    ``traces[p - 1]`` is ``trace(A^p)``.  ``bounds`` is empty when
    ``rho >= 1``.
    """

    n: int
    partition: BlockPartition
    order: int
    logdet_md: LogDet
    deltas: list[complex]
    traces: list[complex]
    rho: RhoEstimate
    c: float | None
    bounds: list[BoundRow]
    checkerboard: str
    skipped_orders: list[int] = field(default_factory=list)
    odd_trace_residuals: dict[int, complex] = field(default_factory=dict)
    lambda_min: float | None = None
    nnz_A: int = 0

    @property
    def bounds_available(self) -> bool:
        return self.rho.value < 1.0

    def delta_logdet(self, p: int) -> LogDet:
        d = self.deltas[p]
        return LogDet(d.real, d.imag)


def logdet_error(approx: complex | LogDet, exact: LogDet) -> float:
    """``|ln det(M) - approx|`` with the phase difference taken modulo 2*pi."""
    if not isinstance(approx, LogDet):
        approx = LogDet(approx.real, approx.imag)
    return approx.distance(exact)


def det_rel_error(approx: complex | LogDet, exact: LogDet) -> float:
    """``|det(M) - e^approx| / |e^approx|`` evaluated in log space."""
    if not isinstance(approx, LogDet):
        approx = LogDet(approx.real, approx.imag)
    z = complex(exact.ln_abs - approx.ln_abs, _wrap_phase(exact.phase - approx.phase))
    return abs(np.expm1(z))


def _c_rho_m(n: float, rho: float, order: int) -> float:
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if rho >= 1.0:
        raise RhoNotLessThanOne(f"bounds need rho < 1, got {rho}")
    return -n * math.log1p(-rho) * rho**order


def log_error_bound(n: int, rho: float, order: int, effective_n: float | None = None) -> float:
    """``c * rho**order`` with ``c = -n ln(1 - rho)``.

    ``effective_n`` replaces ``n`` in ``c``; it is a heuristic tightening and
    not a proven bound.
    """
    return _c_rho_m(n if effective_n is None else effective_n, rho, order)


def det_rel_error_bounds(
    n: int, rho: float, order: int, effective_n: float | None = None
) -> tuple[float, float | None]:
    """General and (when ``c rho^m < 1``) tight relative determinant bounds."""
    x = _c_rho_m(n if effective_n is None else effective_n, rho, order)
    if x == 0.0:
        general = 0.0
    elif x > 700.0:
        general = math.inf
    else:
        general = x * math.exp(x)
    tight = 1.75 * x if x < 1.0 else None
    return general, tight


def pinching_bound_real(n: int, rho: float, lambda_min: float) -> float:
    """Upper bound ``1 - exp(-n rho^2 / (1 + lambda_min))`` on the pinching error.

    Valid only when every eigenvalue of ``M_D^{-1} M_off`` is real and
    greater than -1, e.g. for Hermitian positive-definite ``M``; the caller
    is responsible for that.
    """
    if not lambda_min > -1.0:
        raise EigenvalueBelowMinusOne(f"lambda_min = {lambda_min} <= -1")
    if rho < 0 or abs(lambda_min) > rho * (1 + 1e-12) + 1e-15:
        raise ValueError(f"inconsistent spectrum: rho = {rho}, lambda_min = {lambda_min}")
    return -math.expm1(-n * rho * rho / (1.0 + lambda_min))


def gerschgorin_rho_bound(M: ComplexSparseMatrix) -> float:
    """``max_i sum_{j != i} |m_ij / m_ii|``, bounding rho for the point partition."""
    d = M.diagonal()
    if np.any(d == 0):
        raise ZeroDiagonal("matrix has a zero diagonal entry")
    absm = abs(M.csr)
    off = np.asarray(absm.sum(axis=1)).ravel() - np.abs(d)
    return float(np.max(np.maximum(off, 0.0) / np.abs(d)))


def checkerboard_parity(M_off: ComplexSparseMatrix, P: BlockPartition) -> str:
    """Classify the block pattern as ``"odd"``, ``"even"`` or ``"none"``.

    Odd: blocks (i, j) vanish when i and j have the same parity.  Even: they
    vanish when the parities differ.  Only equal-sized blocks qualify; a
    matrix with no entries satisfies the odd definition and is reported so.
    """
    if P.n != M_off.order or not P.is_uniform():
        return "none"
    coo = M_off.csr.tocoo()
    blk = P.block_index()
    same = (blk[coo.row] % 2) == (blk[coo.col] % 2)
    if not np.any(same):
        return "odd"
    if np.all(same):
        return "even"
    return "none"


def _estimate_rho(
    mode: RhoMode, M: ComplexSparseMatrix, P: BlockPartition, A: ComplexSparseMatrix
) -> tuple[RhoEstimate, float | None]:
    if isinstance(mode, RhoEstimate):
        return mode, None
    if isinstance(mode, (int, float)):
        return RhoEstimate(float(mode), "user_supplied"), None
    if mode == "gersh":
        return RhoEstimate(A.norm_inf(), "gerschgorin_bound"), None
    if mode == "power":
        return power_iteration_rho(A), None
    if mode == "hermitian":
        rho, lam_min = symmetrized_zone_spectrum(M, P)
        return RhoEstimate(rho, "hermitian_exact"), lam_min
    if mode == "auto":
        if M.order <= dense_cap() and is_hermitian(M, 1e-10):
            try:
                rho, lam_min = symmetrized_zone_spectrum(M, P)
                return RhoEstimate(rho, "hermitian_exact"), lam_min
            except NotPositiveDefinite:
                pass
        est = power_iteration_rho(A)
        if est.converged:
            return est, None
        return RhoEstimate(A.norm_inf(), "gerschgorin_bound"), None
    raise ValueError(f"unknown rho mode {mode!r}")


def zone_expansion(
    M: ComplexSparseMatrix,
    P: BlockPartition,
    order: int,
    rho_mode: RhoMode = "auto",
    pivot_tol: float = 1e-12,
    *,
    nnz_cap: int | None = None,
    effective_n: float | None = None,
) -> ExpansionReport:
    """Compute ``delta_0 .. delta_order`` by sparse power accumulation.

    ``rho_mode`` is ``"auto"``, ``"power"``, ``"gersh"``, ``"hermitian"``, a
    number (user-supplied rho) or a ready :class:`RhoEstimate`.  When the
    off-diagonal part is an odd checkerboard, odd powers are still formed but
    their traces must vanish (checked against ``n * 1e-12 * ||A||_1^p``); they
    are recorded as exact zeros and listed in ``skipped_orders``.

    Raises :class:`SingularBlock` for a singular diagonal block and
    :class:`MemoryBudgetExceeded` when a power of ``A`` outgrows ``nnz_cap``
    (default ``64 * nnz(M)``).  ``rho >= 1`` does not raise; the report just
    carries no bounds.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    n = M.order
    M_D, M_off = split(M, P)
    F = block_lu(M_D, P, pivot_tol)
    md = F.logdet
    A = blockdiag_solve(F, M_off)
    parity = checkerboard_parity(M_off, P)
    rho, lam_min = _estimate_rho(rho_mode, M, P, A)
    cap = nnz_cap if nnz_cap is not None else NNZ_CAP_FACTOR * max(M.nnz, 1)
    norm_a = A.norm1()

    deltas = [md.value]
    traces: list[complex] = []
    skipped: list[int] = []
    residuals: dict[int, complex] = {}
    power = None
    for p in range(1, order + 1):
        if p == 1:
            power = A
            tr = trace(A)
        elif p == order:
            # last order: only the diagonal of the product is needed
            tr = trace_of_product(power, A)
        else:
            power = sparse_product(power, A)
            if power.nnz > cap:
                raise MemoryBudgetExceeded(
                    f"nnz(A^{p}) = {power.nnz} exceeds the cap of {cap}"
                )
            tr = trace(power)
        if parity == "odd" and p % 2 == 1:
            limit = n * ODD_TRACE_TOL * norm_a**p
            if abs(tr) > limit:
                raise CheckerboardViolation(
                    f"|trace(A^{p})| = {abs(tr):.3e} exceeds {limit:.3e} for an odd checkerboard"
                )
            residuals[p] = tr
            skipped.append(p)
            tr = 0j
        traces.append(tr)
        sign = 1.0 if p % 2 == 1 else -1.0
        deltas.append(deltas[-1] + sign * tr / p)

    c = None
    bounds: list[BoundRow] = []
    if rho.value < 1.0:
        n_eff = n if effective_n is None else effective_n
        c = -n_eff * math.log1p(-rho.value)
        for p in range(order + 1):
            general, tight = det_rel_error_bounds(n, rho.value, p, effective_n)
            bounds.append(BoundRow(log_error_bound(n, rho.value, p, effective_n), general, tight))

    return ExpansionReport(
        n=n,
        partition=P,
        order=order,
        logdet_md=md,
        deltas=deltas,
        traces=traces,
        rho=rho,
        c=c,
        bounds=bounds,
        checkerboard=parity,
        skipped_orders=skipped,
        odd_trace_residuals=residuals,
        lambda_min=lam_min,
        nnz_A=A.nnz,
    )


def diagonal_approximation(
    M: ComplexSparseMatrix, order: int = 0, pivot_tol: float = 1e-12
) -> ExpansionReport:
    """Point-partition expansion (``delta_0`` is the diagonal product) with the
    Gerschgorin bound as rho."""
    rho = RhoEstimate(gerschgorin_rho_bound(M), "gerschgorin_bound")
    return zone_expansion(M, BlockPartition.point(M.order), order, rho, pivot_tol)
