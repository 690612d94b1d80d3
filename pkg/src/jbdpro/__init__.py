"""Joint bidiagonalization of a matrix pair {A, L} with none, full or
partial reorthogonalization, GSVD extraction and finite-precision
diagnostics."""

from .bidiag_svd import RitzDecomposition, inv_norm, svd_bidiagonal
from .diagnostics import (
    DiagnosticsReport,
    build_report,
    ehat_residual,
    ek_residual,
    guard_48,
    hk_residual,
    ortho_levels,
    vdev_norm,
)
from .gsvd import GsvdApprox, RitzTrace, extract_gsvd, ritz_trace
from .jbd import (
    BidiagPair,
    Breakdown,
    JbdState,
    ReorthRecord,
    StrategyConfig,
    jbd_init,
    jbd_run,
    jbd_step,
)
from .linalg import EPS, QrFactors, dense_svd_oracle, householder_qr, mgs_orthogonalize
from .ortho_monitor import OrthoTracker, select_indices
from .projector import ProjectionProvider, SparsePair, lsqr_solve, project, stacked_matvec
from .sparse_io import CsrMatrix, load_matrix_market, write_csv_trace, write_matrix_market
from .testgen import KnownGsvd, builtin_pair, make_cs_pair, make_first_derivative, make_multiplicity_pair

__all__ = [name for name in dir() if not name.startswith("_")]
