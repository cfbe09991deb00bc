"""Exact and brute-force references used to check the approximations.

Nothing here is on the approximation path itself: the dense LU goes through
LAPACK rather than the block factorization in :mod:`detapprox.sparsemat`,
and the Leibniz sum shares no code with either.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DenseCapExceeded,
    NotHermitian,
    NotPositiveDefinite,
    OrderTooLarge,
    SingularMatrix,
)
from .sparsemat import BlockPartition, ComplexSparseMatrix, LogDet, split

DEFAULT_DENSE_CAP = 4096
LEIBNIZ_MAX_ORDER = 10
# above this order the assembled symmetrized matrix goes to LAPACK eigvalsh
JACOBI_MAX_ORDER = 128

RHO_METHODS = ("power_iteration", "gerschgorin_bound", "hermitian_exact", "user_supplied")


def dense_cap() -> int:
    """Largest order the dense oracles accept (env ``ZONEDET_DENSE_CAP``)."""
    raw = os.environ.get("ZONEDET_DENSE_CAP")
    return int(raw) if raw else DEFAULT_DENSE_CAP


def _as_dense(M) -> np.ndarray:
    if isinstance(M, ComplexSparseMatrix):
        return M.to_dense()
    a = np.array(M, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_cap(n: int) -> None:
    cap = dense_cap()
    if n > cap:
        raise DenseCapExceeded(f"order {n} exceeds dense cap {cap}")


@dataclass(frozen=True)
class RhoEstimate:
    """Spectral radius estimate of ``M_D^{-1} M_off`` and how it was obtained."""

    value: float
    method: str
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        if self.method not in RHO_METHODS:
            raise ValueError(f"unknown rho method {self.method!r}")
        if not self.value >= 0:
            raise ValueError("rho must be non-negative")
        if not self.converged and self.method != "power_iteration":
            raise ValueError("only power iteration may report non-convergence")


def dense_lu_logdet(M) -> LogDet:
    """Log-determinant from a dense LU with partial pivoting."""
    a = _as_dense(M)
    n = a.shape[0]
    _check_cap(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    pivots = np.diag(lu)
    if np.any(pivots == 0):
        raise SingularMatrix("exactly zero pivot in dense LU")
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    return LogDet.from_pivots(pivots, swaps)


def leibniz_det(M) -> complex:
    """Determinant as the signed sum over all permutations (order <= 10)."""
    a = _as_dense(M)
    n = a.shape[0]
    if n > LEIBNIZ_MAX_ORDER:
        raise OrderTooLarge(f"Leibniz expansion limited to order {LEIBNIZ_MAX_ORDER}, got {n}")
    rows = np.arange(n)
    iu, ju = np.triu_indices(n, k=1)
    total = 0j
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 50_000)), dtype=np.intp)
        if chunk.size == 0:
            break
        inversions = np.count_nonzero(chunk[:, iu] > chunk[:, ju], axis=1)
        signs = np.where(inversions % 2, -1.0, 1.0)
        terms = np.prod(a[rows, chunk], axis=1)
        total += complex(np.sum(signs * terms))
    return total


def power_iteration_rho(
    A: ComplexSparseMatrix,
    seeds: int = 3,
    tol: float = 1e-6,
    max_iter: int = 5000,
    rng_seed: int = 0,
) -> RhoEstimate:
    """Estimate ``rho(A)`` by power iteration on ``A @ A``.

    Squaring folds the +/- eigenvalue pairs of checkerboard matrices onto one
    dominant eigenvalue.  Each start vector is iterated until successive
    Rayleigh quotients agree to ``tol`` (relative); the estimate is the square
    root of the largest converged quotient magnitude.  Non-convergence is
    reported through ``converged=False``, never raised.
    """
    csr = A.csr
    n = A.order
    rng = np.random.Generator(np.random.Philox(rng_seed))
    best_conv, best_any = None, 0.0
    total_iters = 0
    for _ in range(max(1, seeds)):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x /= np.linalg.norm(x)
        prev = None
        lam = 0j
        converged = False
        for it in range(1, max_iter + 1):
            y = csr @ (csr @ x)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                lam, converged = 0j, True
                break
            lam = np.vdot(x, y)
            x = y / ny
            if prev is not None and abs(lam - prev) <= tol * abs(lam):
                converged = True
                break
            prev = lam
        total_iters += it
        mag = abs(lam)
        best_any = max(best_any, mag)
        if converged:
            best_conv = mag if best_conv is None else max(best_conv, mag)
    if best_conv is not None:
        return RhoEstimate(math.sqrt(best_conv), "power_iteration", True, total_iters)
    return RhoEstimate(math.sqrt(best_any), "power_iteration", False, total_iters)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint pair sets covering every (p, q) once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi(H: np.ndarray, tol: float, vectors: bool, max_sweeps: int = 60):
    """Cyclic complex Jacobi; each round applies n/2 disjoint rotations at once."""
    a = H.copy()
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128) if vectors else None
    fro = np.linalg.norm(a)
    if n < 2 or fro == 0.0:
        return np.real(np.diag(a)).copy(), v
    rounds = _round_robin(n)
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        if np.linalg.norm(a[offmask]) <= tol * fro:
            break
        for P, Q in rounds:
            if P.size == 0:
                continue
            apq = a[P, Q]
            r = np.abs(apq)
            active = r > 0.0
            if not np.any(active):
                continue
            safe_r = np.where(active, r, 1.0)
            e = np.where(active, apq / safe_r, 1.0)
            tau = (a[Q, Q].real - a[P, P].real) / (2.0 * safe_r)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ec = np.conj(e)
            g11, g12, g21, g22 = c, s, -s * ec, c * ec
            ap, aq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = ap * g11 + aq * g21
            a[:, Q] = ap * g12 + aq * g22
            rp, rq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = np.conj(g11)[:, None] * rp + np.conj(g21)[:, None] * rq
            a[Q, :] = np.conj(g12)[:, None] * rp + np.conj(g22)[:, None] * rq
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            if v is not None:
                vp, vq = v[:, P].copy(), v[:, Q].copy()
                v[:, P] = vp * g11 + vq * g21
                v[:, Q] = vp * g12 + vq * g22
        idx = np.arange(n)
        a[idx, idx] = a[idx, idx].real
    return np.real(np.diag(a)).copy(), v


def _hermitian_checked(H, tol: float = 1e-10) -> np.ndarray:
    h = _as_dense(H)
    scale = np.abs(h).sum(axis=0).max() if h.size else 0.0
    if np.abs(h - h.conj().T).sum(axis=0).max(initial=0.0) > tol * scale:
        raise NotHermitian("matrix is not Hermitian within 1e-10")
    return 0.5 * (h + h.conj().T)


def hermitian_eigs_jacobi(H, tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi."""
    h = _hermitian_checked(H)
    _check_cap(h.shape[0])
    w, _ = _jacobi(h, tol, vectors=False)
    return np.sort(w)


def hermitian_eigh_jacobi(H, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unit eigenvectors of a Hermitian matrix."""
    h = _hermitian_checked(H)
    _check_cap(h.shape[0])
    w, v = _jacobi(h, tol, vectors=True)
    order = np.argsort(w)
    return w[order], v[:, order]


def symmetrized_zone_spectrum(M: ComplexSparseMatrix, P: BlockPartition) -> tuple[float, float]:
    """``(rho, lambda_min)`` of ``M_D^{-1} M_off`` for Hermitian positive-definite ``M``.

    Uses the similar Hermitian matrix ``M_D^{-1/2} M_off M_D^{-1/2}``, with
    each block's inverse square root taken from its Jacobi eigendecomposition.
    """
    n = M.order
    _check_cap(n)
    scale = M.norm1()
    if (M - M.conj_transpose()).norm1() > 1e-10 * scale:
        raise NotHermitian("matrix is not Hermitian within 1e-10")
    M_D, M_off = split(M, P)
    w_blocks = []
    for b, (lo, hi) in enumerate(P.blocks()):
        lam, vec = hermitian_eigh_jacobi(M_D.csr[lo:hi, lo:hi].toarray())
        if lam[0] <= 0.0:
            raise NotPositiveDefinite(f"diagonal block {b} is not positive definite")
        w_blocks.append((vec / np.sqrt(lam)) @ vec.conj().T)
    if M_off.nnz == 0:
        return 0.0, 0.0
    s = M_off.to_dense()
    for (lo, hi), w in zip(P.blocks(), w_blocks):
        s[lo:hi, :] = w @ s[lo:hi, :]
    for (lo, hi), w in zip(P.blocks(), w_blocks):
        s[:, lo:hi] = s[:, lo:hi] @ w
    s = 0.5 * (s + s.conj().T)
    if n <= JACOBI_MAX_ORDER:
        eigs = np.sort(_jacobi(s, 1e-13, vectors=False)[0])
    else:
        eigs = np.linalg.eigvalsh(s)
    return float(np.max(np.abs(eigs))), float(eigs[0])
