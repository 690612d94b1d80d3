"""Orthogonal projection onto range([A; L]).

Algorithm steps that need ``Q Q^T (u; 0)`` get it from a
:class:`ProjectionProvider`, either through an explicit stacked QR or
through an inner LSQR solve of ``min ||[A; L] x - (u; 0)||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .linalg import QrFactors, householder_qr
from .sparse_io import CsrMatrix

__all__ = [
    "SparsePair",
    "ProjectionProvider",
    "LsqrConvergenceError",
    "UnsupportedModeError",
    "stacked_matvec",
    "stacked_rmatvec",
    "lsqr_solve",
    "project",
]


class LsqrConvergenceError(RuntimeError):
    """LSQR hit its iteration limit; carries the best iterate."""

    def __init__(self, x, residual_norm, iters):
        super().__init__(
            f"LSQR did not converge in {iters} iterations (residual {residual_norm:.3e})"
        )
        self.x = x
        self.residual_norm = residual_norm
        self.iters = iters


class UnsupportedModeError(RuntimeError):
    """The requested quantity needs the explicit Q factor."""


@dataclass(frozen=True)
class SparsePair:
    """The matrix pair {A, L} with ``A`` m-by-n and ``L`` p-by-n."""

    a: CsrMatrix
    l: CsrMatrix

    def __post_init__(self):
        if self.a.ncols != self.l.ncols:
            raise ValueError(
                f"A and L need the same column count, got {self.a.ncols} and {self.l.ncols}"
            )

    @property
    def m(self) -> int:
        return self.a.nrows

    @property
    def n(self) -> int:
        return self.a.ncols

    @property
    def p(self) -> int:
        return self.l.nrows

    def stacked_dense(self) -> np.ndarray:
        return np.vstack([self.a.toarray(), self.l.toarray()])

    def swapped(self) -> "SparsePair":
        return SparsePair(self.l, self.a)


def stacked_matvec(pair: SparsePair, x) -> np.ndarray:
    """``[A; L] @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (pair.n,):
        raise ValueError(f"expected vector of length {pair.n}, got {x.shape}")
    return np.concatenate([pair.a.matvec(x), pair.l.matvec(x)])


def stacked_rmatvec(pair: SparsePair, y) -> np.ndarray:
    """``[A; L]^T @ y`` with ``y`` of length m + p."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (pair.m + pair.p,):
        raise ValueError(f"expected vector of length {pair.m + pair.p}, got {y.shape}")
    return pair.a.rmatvec(y[: pair.m]) + pair.l.rmatvec(y[pair.m :])


def lsqr_solve(pair: SparsePair, rhs, atol: float = 1e-14, max_iters: int | None = None):
    """Solve ``min ||[A; L] x - rhs||`` by LSQR.

    Stops when ``||[A;L]^T r|| <= atol * ||[A;L]|| * ||r||`` (with the norm of
    the stacked operator estimated from the bidiagonal coefficients) or, for
    compatible systems, when ``||r|| <= atol * (||rhs|| + ||[A;L]|| ||x||)``.

    Returns ``(x, residual_norm, iters)``; raises
    :class:`LsqrConvergenceError` after ``max_iters`` iterations.
    """
    if atol <= 0:
        raise ValueError("atol must be positive")
    if max_iters is None:
        max_iters = 4 * pair.n
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    b = np.asarray(rhs, dtype=np.float64)
    x = np.zeros(pair.n)

    u = b.copy()
    beta = np.linalg.norm(u)
    if beta == 0:
        return x, 0.0, 0
    u /= beta
    v = stacked_rmatvec(pair, u)
    alpha = np.linalg.norm(v)
    if alpha == 0:
        # rhs orthogonal to range: x = 0 is the solution
        return x, float(beta), 0
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    anorm_sq = 0.0
    xnorm_sq = 0.0
    bnorm = beta
    rnorm = beta

    for itn in range(1, max_iters + 1):
        u = stacked_matvec(pair, v) - alpha * u
        beta = np.linalg.norm(u)
        anorm_sq += alpha * alpha + beta * beta
        if beta > 0:
            u /= beta
            v = stacked_rmatvec(pair, u) - beta * v
            alpha = np.linalg.norm(v)
            if alpha > 0:
                v /= alpha
        else:
            alpha = 0.0

        rho = math.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar

        x += (phi / rho) * w
        xnorm_sq += (phi / rho) ** 2
        w = v - (theta / rho) * w

        rnorm = phibar
        arnorm = phibar * alpha * abs(c)
        anorm = math.sqrt(anorm_sq)
        if arnorm <= atol * anorm * rnorm:
            return x, float(rnorm), itn
        if rnorm <= atol * (bnorm + anorm * math.sqrt(xnorm_sq)):
            return x, float(rnorm), itn
    raise LsqrConvergenceError(x, float(rnorm), max_iters)


@dataclass(frozen=True, eq=False)
class ProjectionProvider:
    """Source of ``Q Q^T (u; 0)`` for one matrix pair.

    Build with :meth:`explicit` (stacked QR, the reference path) or
    :meth:`iterative` (inner LSQR solves, no factorization).
    """

    mode: str
    pair: SparsePair
    qr: QrFactors | None = None
    lsqr_atol: float = 1e-14
    lsqr_max_iters: int | None = None

    def __post_init__(self):
        if self.mode == "explicit-qr":
            if self.qr is None:
                raise ValueError("explicit-qr mode needs QR factors")
        elif self.mode == "lsqr":
            if not (0 < self.lsqr_atol <= 1e-8):
                raise ValueError("lsqr_atol must lie in (0, 1e-8]")
            if self.lsqr_max_iters is None:
                object.__setattr__(self, "lsqr_max_iters", 4 * self.pair.n)
        else:
            raise ValueError(f"unknown projector mode {self.mode!r}")

    @classmethod
    def explicit(cls, pair: SparsePair) -> "ProjectionProvider":
        return cls("explicit-qr", pair, householder_qr(pair.stacked_dense()))

    @classmethod
    def iterative(
        cls, pair: SparsePair, atol: float = 1e-14, max_iters: int | None = None
    ) -> "ProjectionProvider":
        return cls("lsqr", pair, None, atol, max_iters)

    @property
    def m(self) -> int:
        return self.pair.m

    @property
    def p(self) -> int:
        return self.pair.p

    def _require_q(self, what: str) -> QrFactors:
        if self.qr is None:
            raise UnsupportedModeError(f"{what} needs the explicit-qr projector")
        return self.qr

    @property
    def q(self) -> np.ndarray:
        return self._require_q("Q").q

    @property
    def q_a(self) -> np.ndarray:
        return self._require_q("Q_A").q[: self.m]

    @property
    def q_l(self) -> np.ndarray:
        return self._require_q("Q_L").q[self.m :]

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.m,):
            raise ValueError(f"expected vector of length {self.m}, got {u.shape}")
        if self.mode == "explicit-qr":
            q = self.qr.q
            return q @ (q[: self.m].T @ u)
        rhs = np.concatenate([u, np.zeros(self.p)])
        x, _, _ = lsqr_solve(self.pair, rhs, self.lsqr_atol, self.lsqr_max_iters)
        return stacked_matvec(self.pair, x)

    def solve(self, rhs) -> np.ndarray:
        """Least-squares solution of ``[A; L] x = rhs`` (R^{-1} never formed)."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.mode == "explicit-qr":
            return solve_triangular(self.qr.r, self.qr.q.T @ rhs, lower=False)
        x, _, _ = lsqr_solve(self.pair, rhs, self.lsqr_atol, self.lsqr_max_iters)
        return x


def project(provider: ProjectionProvider, u) -> np.ndarray:
    """``Q Q^T (u; 0)`` as a vector of length m + p."""
    return provider.project(u)

