"""SVD of the small bidiagonal matrices ``B_k`` and ``Bh_k``.

Implicit QR on an upper bidiagonal (Demmel-Kahan): a zero-shift sweep
whenever the shift is negligible relative to the top diagonal entry,
keeping tiny singular values to high relative accuracy, and a shifted
sweep otherwise.  The lower (k+1) x k ``B_k`` is first reduced to
upper form by left Givens rotations.  The sweeps are compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .jbd import BidiagPair
from .linalg import EPS

__all__ = [
    "RitzDecomposition",
    "SingularMatrixError",
    "BidiagConvergenceError",
    "svd_bidiagonal",
    "svd_upper_bidiagonal",
    "inv_norm",
    "SIDES",
]

SIDES = ("B", "Bhat")


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class BidiagConvergenceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RitzDecomposition:
    """``matrix = left @ diag(thetas) @ right.T`` with ``thetas`` nonincreasing."""

    side: str
    thetas: np.ndarray
    left: np.ndarray | None
    right: np.ndarray | None

    @property
    def k(self) -> int:
        return self.thetas.size


@numba.njit(cache=True)
def _lartg(f, g):
    if g == 0.0:
        return 1.0, 0.0, f
    if f == 0.0:
        return 0.0, 1.0, g
    r = math.hypot(f, g)
    return f / r, g / r, r


@numba.njit(cache=True)
def _las2(f, g, h):
    """Smaller singular value of ``[[f, g], [0, h]]``."""
    fa, ga, ha = abs(f), abs(g), abs(h)
    fhmn, fhmx = min(fa, ha), max(fa, ha)
    if fhmn == 0.0:
        return 0.0
    if ga < fhmx:
        as_ = 1.0 + fhmn / fhmx
        at = (fhmx - fhmn) / fhmx
        au = (ga / fhmx) ** 2
        c = 2.0 / (math.sqrt(as_ * as_ + au) + math.sqrt(at * at + au))
        return fhmn * c
    au = fhmx / ga
    if au == 0.0:
        return fhmn * fhmx / ga
    as_ = 1.0 + fhmn / fhmx
    at = (fhmx - fhmn) / fhmx
    c = 1.0 / (math.sqrt(1.0 + (as_ * au) ** 2) + math.sqrt(1.0 + (at * au) ** 2))
    return 2.0 * (fhmn * c) * au


@numba.njit(cache=True)
def _rot_cols(a, i, c, s):
    # col_i <- c col_i + s col_{i+1}; col_{i+1} <- c col_{i+1} - s col_i
    for r in range(a.shape[0]):
        x, y = a[r, i], a[r, i + 1]
        a[r, i] = c * x + s * y
        a[r, i + 1] = c * y - s * x


@numba.njit(cache=True)
def _rot_rows(a, i, c, s):
    for col in range(a.shape[1]):
        x, y = a[i, col], a[i + 1, col]
        a[i, col] = c * x + s * y
        a[i + 1, col] = c * y - s * x


@numba.njit(cache=True)
def _bdsqr(d, e, u, vt, want, tol, maxit):
    """In-place QR iteration; ``u @ B @ vt`` is invariant.  Returns sweeps or -1."""
    n = d.size
    sweeps = 0
    hi = n - 1
    while hi > 0:
        if abs(e[hi - 1]) <= tol * (abs(d[hi - 1]) + abs(d[hi])):
            e[hi - 1] = 0.0
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and abs(e[lo - 1]) > tol * (abs(d[lo - 1]) + abs(d[lo])):
            lo -= 1
        if lo > 0:
            e[lo - 1] = 0.0
        sweeps += 1
        if sweeps > maxit:
            return -1

        shift = _las2(d[hi - 1], e[hi - 1], d[hi])
        sll = abs(d[lo])
        if sll == 0.0 or (shift / sll) ** 2 < tol:
            shift = 0.0

        if shift == 0.0:
            cs = 1.0
            oldcs = 1.0
            oldsn = 0.0
            for i in range(lo, hi):
                cs, sn, r = _lartg(d[i] * cs, e[i])
                if i > lo:
                    e[i - 1] = oldsn * r
                oldcs, oldsn, d[i] = _lartg(oldcs * r, d[i + 1] * sn)
                if want:
                    _rot_rows(vt, i, cs, sn)
                    _rot_cols(u, i, oldcs, oldsn)
            h = d[hi] * cs
            d[hi] = h * oldcs
            e[hi - 1] = h * oldsn
        else:
            sgn = 1.0 if d[lo] >= 0 else -1.0
            f = (abs(d[lo]) - shift) * (sgn + shift / d[lo])
            g = e[lo]
            for i in range(lo, hi):
                cosr, sinr, r = _lartg(f, g)
                if i > lo:
                    e[i - 1] = r
                f = cosr * d[i] + sinr * e[i]
                e[i] = cosr * e[i] - sinr * d[i]
                g = sinr * d[i + 1]
                d[i + 1] = cosr * d[i + 1]
                cosl, sinl, r = _lartg(f, g)
                d[i] = r
                f = cosl * e[i] + sinl * d[i + 1]
                d[i + 1] = cosl * d[i + 1] - sinl * e[i]
                if i < hi - 1:
                    g = sinl * e[i + 1]
                    e[i + 1] = cosl * e[i + 1]
                if want:
                    _rot_rows(vt, i, cosr, sinr)
                    _rot_cols(u, i, cosl, sinl)
            e[hi - 1] = f
    return sweeps


@numba.njit(cache=True)
def _lower_to_upper(alpha, beta, x, want):
    """QR of the lower (k+1) x k bidiagonal by left rotations; ``x`` collects Q[:, :k]."""
    k = alpha.size
    d = np.empty(k)
    e = np.empty(max(k - 1, 0))
    a = alpha[0]
    for i in range(k):
        c, s, r = _lartg(a, beta[i])
        d[i] = r
        if i < k - 1:
            e[i] = s * alpha[i + 1]
            a = c * alpha[i + 1]
        if want:
            _rot_cols(x, i, c, s)
    return d, e


def svd_upper_bidiagonal(d, e, left=None, want_vectors: bool = True):
    """SVD of the upper bidiagonal with diagonal ``d`` and superdiagonal ``e``.

    ``left`` (default identity) is an orthonormal factor already applied on
    the left, so the returned left vectors are ``left @ U_B``.  Returns
    ``(thetas, left_vectors, right_vectors)``, vectors ``None`` if not wanted.
    """
    d = np.array(d, dtype=np.float64)
    e = np.array(e, dtype=np.float64)
    n = d.size
    if e.size != max(n - 1, 0):
        raise ValueError(f"superdiagonal needs {max(n - 1, 0)} entries, got {e.size}")
    if n == 0:
        raise ValueError("empty bidiagonal")
    if want_vectors:
        u = np.eye(n) if left is None else np.array(left, dtype=np.float64)
        vt = np.eye(n)
    else:
        u = np.zeros((0, 0))
        vt = np.zeros((0, 0))
    sweeps = _bdsqr(d, e, u, vt, want_vectors, EPS, 6 * n * n)
    if sweeps < 0:
        raise BidiagConvergenceError(f"bidiagonal QR did not converge in {6 * n * n} sweeps")
    neg = d < 0
    d[neg] = -d[neg]
    order = np.argsort(-d, kind="stable")
    thetas = d[order]
    if not want_vectors:
        return thetas, None, None
    vt[neg] *= -1.0
    return thetas, u[:, order], vt[order].T.copy()


def _coeff_array(coeffs: BidiagPair, name: str, count: int, k: int) -> np.ndarray:
    arr = np.asarray(getattr(coeffs, name)[:count], dtype=np.float64)
    if arr.size < count:
        raise ValueError(f"k = {k} needs {count} entries of {name}, have {arr.size}")
    return arr


def svd_bidiagonal(
    coeffs: BidiagPair, side: str, k: int, want_vectors: bool = True
) -> RitzDecomposition:
    """Ritz decomposition of ``B_k`` (side ``"B"``) or ``Bh_k`` (side ``"Bhat"``)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if side == "B":
        alpha = _coeff_array(coeffs, "alpha", k, k)
        beta = _coeff_array(coeffs, "beta", k + 1, k)[1:]
        x = np.eye(k + 1) if want_vectors else np.zeros((0, 0))
        d, e = _lower_to_upper(alpha, beta, x, want_vectors)
        left = x[:, :k] if want_vectors else None
        thetas, lv, rv = svd_upper_bidiagonal(d, e, left, want_vectors)
    elif side == "Bhat":
        d = _coeff_array(coeffs, "alpha_hat", k, k)
        e = _coeff_array(coeffs, "beta_hat", k - 1, k)
        thetas, lv, rv = svd_upper_bidiagonal(d, e, None, want_vectors)
    else:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    return RitzDecomposition(side, thetas, lv, rv)


def inv_norm(coeffs: BidiagPair, side: str, k: int) -> float:
    """``1 / theta_min`` of ``Bh_k`` (side ``"Bhat"``) or of the square ``B_k`` part (side ``"B"``)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if side == "Bhat":
        d = _coeff_array(coeffs, "alpha_hat", k, k)
        e = _coeff_array(coeffs, "beta_hat", k - 1, k)
    elif side == "B":
        d = _coeff_array(coeffs, "alpha", k, k)
        e = _coeff_array(coeffs, "beta", k, k)[1:]
    else:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    thetas, _, _ = svd_upper_bidiagonal(d, e, want_vectors=False)
    smin = thetas[-1]
    if smin == 0:
        raise SingularMatrixError(f"{side}_{k} is singular")
    return float(1.0 / smin)
