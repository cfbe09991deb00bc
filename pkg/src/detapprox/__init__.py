"""Log-determinant approximations for sparse complex matrices.

Zone determinant expansions with a-priori error bounds, sparse-inverse
(SPAI) approximations for Hermitian positive-definite matrices, test
matrix generators and exact reference oracles.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .sparsemat import (
    BlockPartition,
    ComplexSparseMatrix,
    FactoredBlockDiag,
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
from .oracle import (
    RhoEstimate,
    dense_cap,
    dense_lu_logdet,
    hermitian_eigh_jacobi,
    hermitian_eigs_jacobi,
    leibniz_det,
    power_iteration_rho,
    symmetrized_zone_spectrum,
)
from .zonedet import (
    BoundRow,
    ExpansionReport,
    checkerboard_parity,
    det_rel_error,
    det_rel_error_bounds,
    diagonal_approximation,
    gerschgorin_rho_bound,
    log_error_bound,
    logdet_error,
    pinching_bound_real,
    zone_expansion,
)
from .spaidet import (
    SpaiPattern,
    SpaiResult,
    hadamard_product_logdet,
    lower_neighbor_pattern,
    spai_logdet,
)
from .generators import *  # noqa: F401,F403
