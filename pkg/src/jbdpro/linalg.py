"""Dense kernels: stacked QR, Gram-Schmidt reorthogonalization, Jacobi SVD."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

EPS = np.finfo(np.float64).eps

__all__ = [
    "EPS",
    "QrFactors",
    "RankDeficientError",
    "householder_qr",
    "mgs_orthogonalize",
    "dense_svd_oracle",
]


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when the stacked matrix is (numerically) column rank deficient."""

    def __init__(self, column: int, rii: float, threshold: float):
        super().__init__(
            f"column {column} is numerically dependent: |r_ii| = {rii:.3e} <= {threshold:.3e}"
        )
        self.column = column


@dataclass(frozen=True)
class QrFactors:
    """Compact QR factors ``stacked = q @ r`` with ``diag(r) >= 0``."""

    q: np.ndarray
    r: np.ndarray

    def split(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Row blocks ``(Q_A, Q_L)`` of ``q`` for a pair whose first block has ``m`` rows."""
        return self.q[:m], self.q[m:]


def householder_qr(stacked) -> QrFactors:
    """Compact Householder QR with the sign of ``r``'s diagonal absorbed into ``q``.

    Raises :class:`RankDeficientError` naming the first column whose
    diagonal entry falls below ``nrows * eps * ||column||``.
    """
    a = np.asarray(stacked, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    nrows, ncols = a.shape
    if nrows < ncols:
        raise ValueError(f"need nrows >= ncols, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    r = np.triu(r * signs[:, None])
    col_norms = np.linalg.norm(a, axis=0)
    thresholds = nrows * EPS * col_norms
    diag = np.diag(r)
    bad = np.nonzero(~(diag > thresholds))[0]
    if bad.size:
        j = int(bad[0])
        raise RankDeficientError(j, float(diag[j]), float(thresholds[j]))
    return QrFactors(q, r)


def mgs_orthogonalize(
    vec, basis, indices: Sequence[int], refine: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract from ``vec`` its projections on ``basis[:, j]`` for ``j`` in ``indices``.

    Projections are removed one column at a time in ascending index order
    (modified Gram-Schmidt).  With ``refine`` a second pass runs whenever an
    inner product left after the first pass exceeds ``10 * eps * ||vec||``.

    Returns the orthogonalized vector and the projection coefficients, one
    per index (summed over passes).
    """
    out = np.array(vec, dtype=np.float64, copy=True)
    idx = sorted(int(j) for j in indices)
    coeffs = np.zeros(len(idx))
    for pos, j in enumerate(idx):
        col = basis[:, j]
        h = col @ out
        out -= h * col
        coeffs[pos] = h
    if refine and idx:
        residual = np.asarray(basis[:, idx].T @ out)
        if np.max(np.abs(residual)) > 10 * EPS * np.linalg.norm(out):
            for pos, j in enumerate(idx):
                col = basis[:, j]
                h = col @ out
                out -= h * col
                coeffs[pos] += h
    return out, coeffs


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def dense_svd_oracle(mat, max_sweeps: int = 60):
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Test oracle only: slow but free of shift heuristics.  Returns
    ``(sigma, u, v)`` with ``sigma`` nonincreasing and
    ``mat ~= u @ diag(sigma) @ v.T``.
    """
    a = np.array(mat, dtype=np.float64, copy=True)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T.copy()
    m, n = a.shape
    if n == 0:
        return np.zeros(0), np.zeros((m, 0)), np.zeros((0, 0))
    npad = n + (n % 2)
    work = np.zeros((m, npad))
    work[:, :n] = a
    v = np.eye(npad)
    rounds = _round_robin(npad) if npad > 1 else []

    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            ap, aq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            scale = np.sqrt(alpha * beta)
            active = np.abs(gamma) > EPS * scale
            active &= scale > 0
            if not np.any(active):
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = np.where(active, (beta - alpha) / (2.0 * g), 0.0)
            t = np.where(
                active, np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta)), 0.0
            )
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            work[:, p], work[:, q] = c * ap - s * aq, s * ap + c * aq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break

    work, v = work[:, :n], v[:n, :n]
    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, work, v = sigma[order], work[:, order], v[:, order]
    u = np.zeros((m, n))
    nonzero = sigma > 0
    u[:, nonzero] = work[:, nonzero] / sigma[nonzero]
    if not np.all(nonzero):
        # complete the left basis for zero singular values
        k = int(np.count_nonzero(nonzero))
        fill, _ = np.linalg.qr(np.hstack([u[:, :k], np.eye(m)]))
        u[:, k:] = fill[:, k:n]
    if transposed:
        return sigma, v, u
    return sigma, u, v
