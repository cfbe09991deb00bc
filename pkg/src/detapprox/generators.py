"""Test-matrix families with closed-form or oracle-checkable determinants.

Seeded generators draw from ``numpy.random.Philox`` (a counter-based 64-bit
generator) keyed by the seed, so a given seed reproduces the same entries
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from .errors import NonPositiveEigenvalue
from .sparsemat import BlockPartition, ComplexSparseMatrix, LogDet, from_entries

__all__ = [
    "GeneratorSpec",
    "generate",
    "laplacian_2d",
    "laplacian_2d_logdet_exact",
    "toeplitz_tridiag",
    "toeplitz_logdet_exact",
    "block_t3",
    "block_t3_logdet_exact",
    "random_checkerboard",
    "hpd_random",
    "diag_dominant_random",
    "example_2x2",
    "exact_logdet",
    "laplacian_row_partition",
]

KINDS = (
    "laplacian2d",
    "toeplitz_tridiag",
    "block_t3",
    "checkerboard",
    "hpd_random",
    "diag_dominant_random",
    "example_2x2",
)
ALIASES = {"toeplitz": "toeplitz_tridiag", "example2x2": "example_2x2", "laplacian": "laplacian2d"}

# zone offsets on the ring; both odd, so couplings always join opposite parities
CHECKERBOARD_RING_OFFSETS = (1, 3)
CHECKERBOARD_DIAG_PERTURBATION = 0.1
CHECKERBOARD_PHASE_NOISE = 0.1


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


def _tridiag(m: int, a: float, b: float) -> sp.csr_array:
    return sp.csr_array(sp.diags([b, a, b], [-1, 0, 1], shape=(m, m), dtype=np.complex128))


def laplacian_2d(m: int) -> ComplexSparseMatrix:
    """Five-point Laplacian of order ``m**2``: ``T_m = tridiag(-1, 4, -1)``
    diagonal blocks coupled by ``-I_m``."""
    if m < 2:
        raise ValueError("m must be at least 2")
    eye = sp.identity(m, dtype=np.complex128, format="csr")
    shift = sp.diags([1.0, 1.0], [-1, 1], shape=(m, m), dtype=np.complex128)
    M = sp.kron(eye, _tridiag(m, 4.0, -1.0)) - sp.kron(shift, eye)
    return ComplexSparseMatrix.from_scipy(M)


def laplacian_2d_logdet_exact(m: int) -> float:
    """``sum_{i,j} ln 4(sin^2(i pi / 2(m+1)) + sin^2(j pi / 2(m+1)))``."""
    if m < 2:
        raise ValueError("m must be at least 2")
    s = np.sin(np.arange(1, m + 1) * math.pi / (2 * (m + 1))) ** 2
    return math.fsum(np.log(4.0 * (s[:, None] + s[None, :])).ravel().tolist())


def toeplitz_tridiag(n: int, a: float = 2.0, b: float = -1.0) -> ComplexSparseMatrix:
    if n < 1:
        raise ValueError("n must be positive")
    return ComplexSparseMatrix.from_scipy(_tridiag(n, a, b))


def toeplitz_logdet_exact(n: int, a: float = 2.0, b: float = -1.0) -> float:
    """Sum of ``ln(a + 2 b cos(i pi / (n+1)))`` over the eigenvalues."""
    if n < 1:
        raise ValueError("n must be positive")
    lam = a + 2.0 * b * np.cos(np.arange(1, n + 1) * math.pi / (n + 1))
    if n == 1:
        lam = np.array([a])
    if np.any(lam <= 0):
        raise NonPositiveEigenvalue("tridiagonal Toeplitz matrix is not positive definite")
    return math.fsum(np.log(lam).tolist())


T3 = np.array([[1.5, -1.0, 0.0], [-1.0, 1.5, -1.0], [0.0, -1.0, 1.5]])


def block_t3(n: int) -> ComplexSparseMatrix:
    """Block diagonal matrix of ``n / 3`` copies of ``T_3``."""
    if n < 3 or n % 3:
        raise ValueError("n must be a positive multiple of 3")
    return ComplexSparseMatrix.from_scipy(
        sp.block_diag([T3] * (n // 3), format="csr").astype(np.complex128)
    )


def block_t3_logdet_exact(n: int) -> float:
    if n < 3 or n % 3:
        raise ValueError("n must be a positive multiple of 3")
    return (n // 3) * math.log(3.0 / 8.0)


def checkerboard_zone_pairs(k: int) -> list[tuple[int, int]]:
    """Coupled zone pairs ``(even, odd)`` on a ring of ``k`` zones."""
    pairs = set()
    for z in range(0, k, 2):
        for d in CHECKERBOARD_RING_OFFSETS:
            for w in ((z + d) % k, (z - d) % k):
                if w != z:
                    pairs.add((z, w))
    return sorted(pairs)


def random_checkerboard(
    k: int, block_size: int, coupling_scale: float, seed: int
) -> ComplexSparseMatrix:
    """Complex non-Hermitian matrix whose off-diagonal blocks form an odd checkerboard.

    Zones sit on a ring and each even zone couples to the odd zones at ring
    distance 1 and 3.  Diagonal blocks are the identity plus a complex
    perturbation of row sum at most 0.2.  Each coupled pair gets a random
    permutation block with magnitudes in ``[scale/2, scale]``; the reverse
    block uses the transposed pattern and the same magnitudes with
    independent small phases, so ``M_off`` is close to symmetric.
    """
    if k < 2 or k % 2:
        raise ValueError("k must be a positive even integer")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    rng = _rng(seed)
    b = block_size
    n = k * b
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.ones(n, dtype=np.complex128)]
    eps = CHECKERBOARD_DIAG_PERTURBATION
    for z in range(k):
        base = z * b
        for r in range(b):
            c = rng.integers(0, b, size=2)
            mag = eps * rng.random(2)
            ph = rng.uniform(-math.pi, math.pi, size=2)
            rows.append(np.full(2, base + r))
            cols.append(base + c)
            vals.append(mag * np.exp(1j * ph))
    if coupling_scale != 0.0:
        for z, w in checkerboard_zone_pairs(k):
            perm = rng.permutation(b)
            mag = coupling_scale * (0.5 + 0.5 * rng.random(b))
            ph1 = rng.uniform(-CHECKERBOARD_PHASE_NOISE, CHECKERBOARD_PHASE_NOISE, size=b)
            ph2 = rng.uniform(-CHECKERBOARD_PHASE_NOISE, CHECKERBOARD_PHASE_NOISE, size=b)
            r = np.arange(b)
            rows += [z * b + r, w * b + perm]
            cols += [w * b + perm, z * b + r]
            vals += [mag * np.exp(1j * ph1), mag * np.exp(1j * ph2)]
    coo = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return ComplexSparseMatrix.from_scipy(coo.tocsr())


def _random_complex_sparse(rng: np.random.Generator, n: int, density: float) -> sp.csr_array:
    mask = rng.random((n, n)) < density
    r, c = np.nonzero(mask)
    v = rng.standard_normal(r.size) + 1j * rng.standard_normal(r.size)
    return sp.csr_array(sp.coo_array((v, (r, c)), shape=(n, n)))


def hpd_random(n: int, seed: int, dominance: float = 0.0, density: float = 0.3) -> ComplexSparseMatrix:
    """``B* B + dominance * I`` with ``B = I + sparse complex noise``, made
    exactly Hermitian."""
    if n < 1:
        raise ValueError("n must be positive")
    if dominance < 0:
        raise ValueError("dominance must be non-negative")
    rng = _rng(seed)
    B = sp.identity(n, dtype=np.complex128, format="csr") + 0.5 * _random_complex_sparse(rng, n, density)
    H = (B.conj().T @ B).toarray() + dominance * np.eye(n)
    H = 0.5 * (H + H.conj().T)
    return ComplexSparseMatrix.from_dense(H)


def diag_dominant_random(
    n: int, seed: int, margin: float = 1.0, density: float = 0.3
) -> ComplexSparseMatrix:
    """Strictly row diagonally dominant complex matrix.

    Each diagonal entry has a random phase and magnitude
    ``row_offdiag_sum + margin * (1 + u)`` with ``u`` uniform in [0, 1).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if margin <= 0:
        raise ValueError("margin must be positive")
    rng = _rng(seed)
    off = _random_complex_sparse(rng, n, density).tolil()
    off.setdiag(0)
    off = sp.csr_array(off)
    off.eliminate_zeros()
    rowsum = np.asarray(abs(off).sum(axis=1)).ravel()
    mag = rowsum + margin * (1.0 + rng.random(n))
    diag = mag * np.exp(1j * rng.uniform(-math.pi, math.pi, size=n))
    return ComplexSparseMatrix.from_scipy(off + sp.diags(diag, format="csr"))


def example_2x2(alpha: complex) -> ComplexSparseMatrix:
    """``[[1, alpha], [alpha, 1]]``; its determinant is ``1 - alpha**2``."""
    a = complex(alpha)
    return from_entries(2, [(0, 0, 1), (0, 1, a), (1, 0, a), (1, 1, 1)])


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator kind plus its keyword parameters."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    def provenance(self) -> str:
        args = " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"generated by detapprox: kind={self.kind} {args}".rstrip()


def generate(spec: GeneratorSpec) -> ComplexSparseMatrix:
    p = spec.params
    if spec.kind == "laplacian2d":
        return laplacian_2d(int(p["m"]))
    if spec.kind == "toeplitz_tridiag":
        return toeplitz_tridiag(int(p["n"]), float(p.get("a", 2.0)), float(p.get("b", -1.0)))
    if spec.kind == "block_t3":
        return block_t3(int(p["n"]))
    if spec.kind == "checkerboard":
        return random_checkerboard(
            int(p["k"]), int(p["block_size"]), float(p.get("coupling_scale", 0.1)), int(p.get("seed", 0))
        )
    if spec.kind == "hpd_random":
        return hpd_random(int(p["n"]), int(p.get("seed", 0)), float(p.get("dominance", 0.0)))
    if spec.kind == "diag_dominant_random":
        return diag_dominant_random(int(p["n"]), int(p.get("seed", 0)), float(p.get("margin", 1.0)))
    return example_2x2(complex(p.get("alpha", 0.5j)))


def exact_logdet(spec: GeneratorSpec) -> LogDet | None:
    """Closed-form log-determinant where the family has one."""
    p = spec.params
    if spec.kind == "laplacian2d":
        return LogDet(laplacian_2d_logdet_exact(int(p["m"])))
    if spec.kind == "toeplitz_tridiag":
        return LogDet(toeplitz_logdet_exact(int(p["n"]), float(p.get("a", 2.0)), float(p.get("b", -1.0))))
    if spec.kind == "block_t3":
        return LogDet(block_t3_logdet_exact(int(p["n"])))
    if spec.kind == "example_2x2":
        d = 1 - complex(p.get("alpha", 0.5j)) ** 2
        return LogDet(math.log(abs(d)), math.atan2(d.imag, d.real)) if d != 0 else None
    return None


def laplacian_row_partition(m: int) -> BlockPartition:
    """One block per grid row (``k = m`` blocks of size ``m``)."""
    return BlockPartition.uniform(m * m, m)
