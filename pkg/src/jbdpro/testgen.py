"""Synthetic matrix pairs with known generalized singular values.

Every pair here has the form ``A = diag(c) D``, ``L = diag(s) D`` with
``D`` symmetric orthogonal and ``s = sqrt(1 - c**2)``, so ``[A; L]`` has
orthonormal columns, ``R = I`` and the generalized singular values are the
pairs ``{c_i, s_i}`` with right vectors given by the columns of ``D``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .projector import SparsePair
from .sparse_io import CsrMatrix

__all__ = [
    "KnownGsvd",
    "sine_orthogonal",
    "orthog2",
    "random_symmetric_orthogonal",
    "symmetric_orthogonal",
    "make_cs_pair",
    "cs800_values",
    "mult800_values",
    "make_multiplicity_pair",
    "make_first_derivative",
    "builtin_pair",
    "BUILTIN_PAIRS",
]


@dataclass(frozen=True)
class KnownGsvd:
    """Ground truth for a synthetic pair, sorted by nonincreasing ``c``."""

    c: np.ndarray
    s: np.ndarray
    right_vectors: np.ndarray
    multiplicities: dict

    def multiplicity(self, value: float) -> int:
        return self.multiplicities.get(float(value), 0)


def sine_orthogonal(n: int) -> np.ndarray:
    """``sqrt(2/(n+1)) * sin(i j pi / (n+1))``: symmetric and orthogonal."""
    idx = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(idx, idx) * np.pi / (n + 1))


def orthog2(n: int) -> np.ndarray:
    """``2/sqrt(2n+1) * sin(2 i j pi / (2n+1))``, the other classic sine matrix."""
    idx = np.arange(1, n + 1)
    return 2.0 / np.sqrt(2 * n + 1) * np.sin(2.0 * np.outer(idx, idx) * np.pi / (2 * n + 1))


def random_symmetric_orthogonal(n: int, seed: int) -> np.ndarray:
    """Reflector ``I - 2 W W^T`` for a random orthonormal ``W`` with ``n // 2`` columns."""
    rng = np.random.default_rng(seed)
    w, _ = np.linalg.qr(rng.standard_normal((n, max(1, n // 2))))
    d = np.eye(n) - 2.0 * (w @ w.T)
    return 0.5 * (d + d.T)


def symmetric_orthogonal(n: int, seed=None) -> np.ndarray:
    """Resolve an orthogonal-generator choice: ``None``/``"sine"``, ``"orthog2"`` or an int seed."""
    if seed is None or seed == "sine":
        return sine_orthogonal(n)
    if seed == "orthog2":
        return orthog2(n)
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        return random_symmetric_orthogonal(n, int(seed))
    raise ValueError(f"unknown orthogonal generator {seed!r}")


def make_cs_pair(n: int, c, seed=None) -> tuple[SparsePair, KnownGsvd]:
    """Pair ``A = diag(c) D``, ``L = diag(sqrt(1 - c^2)) D`` stored as dense-pattern CSR."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (n,):
        raise ValueError(f"expected {n} cosines, got shape {c.shape}")
    if np.any(~((c > 0) & (c < 1))):
        raise ValueError("every c_i must lie in (0, 1)")
    s = np.sqrt(1.0 - c * c)
    d = symmetric_orthogonal(n, seed)
    a = c[:, None] * d
    l = s[:, None] * d
    pair = SparsePair(CsrMatrix.from_dense(a, keep_zeros=True), CsrMatrix.from_dense(l, keep_zeros=True))

    order = np.argsort(-c, kind="stable")
    counts = Counter(float(x) for x in c)
    truth = KnownGsvd(c[order], s[order], d[:, order], dict(counts))
    return pair, truth


def cs800_values(n: int = 800) -> np.ndarray:
    """``(3n/2, 3n/2 - 1, ..., n/2 + 1) / 2n``."""
    return (1.5 * n - np.arange(n)) / (2.0 * n)


def mult800_values() -> np.ndarray:
    """Cosines with the double values 0.86 and 0.15 (n = 800)."""
    c = np.empty(800)
    c[0] = 0.90
    c[1] = c[2] = 0.86
    c[3] = 0.82
    c[4] = 0.78
    c[5:795] = np.linspace(0.80, 0.30, 790)
    c[795] = 0.22
    c[796] = 0.20
    c[797] = c[798] = 0.15
    c[799] = 0.10
    return c


def make_multiplicity_pair(seed=None) -> tuple[SparsePair, KnownGsvd]:
    return make_cs_pair(800, mult800_values(), seed)


def make_first_derivative(n: int) -> CsrMatrix:
    """Forward-difference operator with rows ``(..., 1, -1, ...)``, shape (n-1, n)."""
    if n < 2:
        raise ValueError("first-derivative operator needs n >= 2")
    rows = np.repeat(np.arange(n - 1), 2)
    cols = (np.arange(n - 1)[:, None] + np.array([0, 1])).ravel()
    vals = np.tile([1.0, -1.0], n - 1)
    return CsrMatrix.from_coo(n - 1, n, rows, cols, vals)


BUILTIN_PAIRS = ("cs800", "mult800")


def builtin_pair(name: str, seed=None) -> tuple[SparsePair, KnownGsvd]:
    if name == "cs800":
        return make_cs_pair(800, cs800_values(800), seed)
    if name == "mult800":
        return make_multiplicity_pair(seed)
    raise ValueError(f"unknown builtin pair {name!r}; choose from {', '.join(BUILTIN_PAIRS)}")
