"""Finite-precision diagnostics of a JBD run.

All quantities are computed from a finished run: the leading columns of
the stored bases never change, so the series for every k <= state.k can
be read off one final state.  Anything that needs ``Q`` (E_k, Eh_k and
the deviation of Vt from range(Q)) requires the explicit-qr projector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .bidiag_svd import inv_norm
from .jbd import BidiagPair, JbdState
from .linalg import EPS
from .projector import ProjectionProvider, UnsupportedModeError

__all__ = [
    "DiagnosticsReport",
    "DIAG_COLUMNS",
    "ortho_levels",
    "hk_tridiagonal",
    "hk_residual",
    "ek_residual",
    "ehat_residual",
    "vdev_norm",
    "guard_48",
    "build_report",
]

DIAG_COLUMNS = (
    "k",
    "kappa_u",
    "xi_u",
    "kappa_vt",
    "xi_vt",
    "kappa_uh",
    "xi_uh",
    "hk",
    "ek",
    "ehat",
    "vdev",
    "bhat_inv",
    "guard48",
)


def _levels_from_gram(gram: np.ndarray) -> tuple[float, float]:
    k = gram.shape[0]
    if k == 0:
        return 0.0, 0.0
    if k == 1:
        return 0.0, float(abs(1.0 - gram[0, 0]))
    off = np.abs(gram - np.diag(np.diag(gram)))
    kappa = float(off.max())
    xi = float(np.max(np.abs(np.linalg.eigvalsh(np.eye(k) - gram))))
    return kappa, xi


def ortho_levels(basis) -> tuple[float, float]:
    """``(kappa, xi)``: largest off-diagonal ``|w_i^T w_j|`` and ``||I - W^T W||_2``."""
    w = np.asarray(basis, dtype=np.float64)
    return _levels_from_gram(w.T @ w)


def hk_tridiagonal(coeffs: BidiagPair, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and subdiagonal of ``H_k = I - B_k^T B_k - P Bh_k^T Bh_k P``."""
    if k < 1 or k > coeffs.steps:
        raise ValueError(f"k must lie in 1..{coeffs.steps}")
    c = coeffs.arrays()
    a, b, ah, bh = c["alpha"][:k], c["beta"][1 : k + 1], c["alpha_hat"][:k], c["beta_hat"]
    bh_prev = np.concatenate([[0.0], bh[: k - 1]])
    diag = 1.0 - (a * a + b * b + ah * ah + bh_prev * bh_prev)
    # B^T B has a_{i+1} b_{i+1} off the diagonal; P flips the sign of Bh^T Bh's
    sub = -(c["alpha"][1:k] * c["beta"][1:k]) + ah[: k - 1] * bh[: k - 1]
    return diag, sub


def hk_residual(coeffs: BidiagPair, k: int) -> float:
    """Spectral norm of the tridiagonal ``H_k``."""
    diag, sub = hk_tridiagonal(coeffs, k)
    if k == 1:
        return float(abs(diag[0]))
    ev = eigvalsh_tridiagonal(diag, sub)
    return float(np.max(np.abs(ev)))


def _require_explicit(provider: ProjectionProvider, what: str):
    if provider.mode != "explicit-qr":
        raise UnsupportedModeError(f"{what} needs the explicit-qr projector")


def _nonneg_qr(mat: np.ndarray) -> np.ndarray:
    """Q factor of a compact QR with nonnegative ``diag(R)``."""
    q, r = np.linalg.qr(mat, mode="reduced")
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def _check_k(state: JbdState, k):
    k = state.k if k is None else k
    if not 1 <= k <= state.k:
        raise ValueError(f"k must lie in 1..{state.k}")
    return k


def ek_residual(state: JbdState, provider: ProjectionProvider, k: int | None = None, v=None) -> float:
    """``||M_k^T Q_A N_k - B_k(1:k, 1:k)||`` with ``U_k = M_k R_k``, ``V_k = N_k S_k``.

    ``v`` may pass a precomputed ``Q^T Vt`` (at least k columns).
    """
    _require_explicit(provider, "E_k")
    k = _check_k(state, k)
    if v is None:
        v = provider.q.T @ state.vt[:, :k]
    mk = _nonneg_qr(state.u[:, :k])
    nk = _nonneg_qr(v[:, :k])
    proj = mk.T @ (provider.q_a @ nk)
    return float(np.linalg.norm(proj - state.coeffs.b_matrix(k)[:k], 2))


def ehat_residual(state: JbdState, provider: ProjectionProvider, k: int | None = None, v=None) -> float:
    """``||Mh_k^T Q_L Nh_k - Bh_k||`` with ``Vh_k = V_k P``."""
    _require_explicit(provider, "Eh_k")
    k = _check_k(state, k)
    if v is None:
        v = provider.q.T @ state.vt[:, :k]
    vhat = v[:, :k] * state.sign_parity(k)
    mk = _nonneg_qr(state.uh[:, :k])
    nk = _nonneg_qr(vhat)
    proj = mk.T @ (provider.q_l @ nk)
    return float(np.linalg.norm(proj - state.coeffs.bhat_matrix(k), 2))


def vdev_norm(state: JbdState, provider: ProjectionProvider, k: int | None = None, v=None) -> float:
    """``||Vt_k - Q Q^T Vt_k||``."""
    _require_explicit(provider, "the deviation of Vt from range(Q)")
    k = _check_k(state, k)
    vt = state.vt[:, :k]
    if v is None:
        v = provider.q.T @ vt
    return float(np.linalg.norm(vt - provider.q @ v[:, :k], 2))


def guard_48(coeffs: BidiagPair, k: int, c4: float | None = None, m_plus_p: int | None = None) -> bool:
    """``||Bh_k^{-1}||^3 <= C4 / ((2k+1) sqrt(eps))``, C4 defaulting to ``sqrt(m+p)``."""
    if c4 is None:
        if m_plus_p is None:
            raise ValueError("give c4 or m_plus_p")
        c4 = math.sqrt(m_plus_p)
    return bool(inv_norm(coeffs, "Bhat", k) ** 3 <= c4 / ((2 * k + 1) * math.sqrt(EPS)))


@dataclass
class DiagnosticsReport:
    """Per-step series, index ``k - 1`` for step k.

    Orthogonality levels refer to ``U_{k+1}``, ``Vt_k`` and ``Uh_k``.  Series
    needing ``Q`` are NaN for an lsqr projector.
    """

    k: list = field(default_factory=list)
    kappa_u: list = field(default_factory=list)
    xi_u: list = field(default_factory=list)
    kappa_vt: list = field(default_factory=list)
    xi_vt: list = field(default_factory=list)
    kappa_uh: list = field(default_factory=list)
    xi_uh: list = field(default_factory=list)
    hk: list = field(default_factory=list)
    ek: list = field(default_factory=list)
    ehat: list = field(default_factory=list)
    vdev: list = field(default_factory=list)
    bhat_inv: list = field(default_factory=list)
    bunder_inv: list = field(default_factory=list)
    guard48: list = field(default_factory=list)
    kappa_v: list = field(default_factory=list)
    reorth_ops: list = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name))

    def rows(self) -> list[dict]:
        """Records with the fixed CSV schema."""
        return [{name: getattr(self, name)[j] for name in DIAG_COLUMNS} for j in range(len(self.k))]

    def __len__(self):
        return len(self.k)


def _leading_norms(mat: np.ndarray, steps) -> dict:
    """Spectral norms of the leading ``k x k`` blocks of ``mat``."""
    return {k: float(np.linalg.norm(mat[:k, :k], 2)) for k in steps}


def _leading_col_norms(gram: np.ndarray, steps) -> dict:
    """Spectral norms of ``X[:, :k]`` given ``gram = X^T X``."""
    return {k: math.sqrt(max(0.0, float(np.linalg.eigvalsh(gram[:k, :k])[-1]))) for k in steps}


def build_report(
    state: JbdState,
    provider: ProjectionProvider,
    steps=None,
    c4: float | None = None,
    residuals: bool = True,
) -> DiagnosticsReport:
    """Diagnostics for every k in ``steps`` (default 1..state.k).

    Uses one factorization of the final bases: a compact QR with
    nonnegative ``diag(R)`` is unique, so the leading k columns of the
    factor of ``U_K`` are the factor of ``U_k``, and every E_k is a
    leading block of one matrix.  ``residuals=False`` skips E_k and Eh_k.
    """
    steps = list(range(1, state.k + 1)) if steps is None else list(steps)
    for k in steps:
        _check_k(state, k)
    explicit = provider.mode == "explicit-qr"
    kmax = max(steps, default=0)
    gu = state.u[:, : kmax + 1].T @ state.u[:, : kmax + 1]
    gv = state.vt[:, :kmax].T @ state.vt[:, :kmax]
    gh = state.uh[:, :kmax].T @ state.uh[:, :kmax]
    if c4 is None:
        c4 = math.sqrt(state.m + state.p)
    nan = {k: math.nan for k in steps}
    kappa_v, vdev, ek, ehat = nan, nan, nan, nan
    if explicit and kmax:
        v = provider.q.T @ state.vt[:, :kmax]
        dev = state.vt[:, :kmax] - provider.q @ v
        vdev = _leading_col_norms(dev.T @ dev, steps)
        gvv = v.T @ v
        kappa_v = {k: _levels_from_gram(gvv[:k, :k])[0] for k in steps}
        if residuals:
            mk = _nonneg_qr(state.u[:, :kmax])
            nk = _nonneg_qr(v)
            ek = _leading_norms(mk.T @ (provider.q_a @ nk) - state.coeffs.b_matrix(kmax)[:kmax], steps)
            mh = _nonneg_qr(state.uh[:, :kmax])
            nh = _nonneg_qr(v * state.sign_parity(kmax))
            ehat = _leading_norms(mh.T @ (provider.q_l @ nh) - state.coeffs.bhat_matrix(kmax), steps)
    rep = DiagnosticsReport()
    for k in steps:
        rep.k.append(k)
        for name, gram in (("u", gu[: k + 1, : k + 1]), ("vt", gv[:k, :k]), ("uh", gh[:k, :k])):
            kap, xi = _levels_from_gram(gram)
            getattr(rep, f"kappa_{name}").append(kap)
            getattr(rep, f"xi_{name}").append(xi)
        rep.hk.append(hk_residual(state.coeffs, k))
        rep.kappa_v.append(kappa_v[k])
        rep.vdev.append(vdev[k])
        rep.ek.append(ek[k])
        rep.ehat.append(ehat[k])
        bhat = inv_norm(state.coeffs, "Bhat", k)
        rep.bhat_inv.append(bhat)
        rep.bunder_inv.append(inv_norm(state.coeffs, "B", k))
        rep.guard48.append(bool(bhat**3 <= c4 / ((2 * k + 1) * math.sqrt(EPS))))
        rep.reorth_ops.append(
            state.reorth.u_ops[k - 1] + state.reorth.v_ops[k - 1] + state.reorth.uhat_ops[k - 1]
        )
    return rep
