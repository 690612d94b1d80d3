"""Running estimates of the orthogonality levels of the Lanczos vectors.

The estimates follow the coupled recurrences satisfied by
``mu[j, i] = u_j^T u_i`` and ``nu[j, i] = v_j^T v_i``::

    beta[i+1] mu[j, i+1] = alpha[j] nu[j, i] + beta[j] nu[j-1, i] - alpha[i] mu[j, i] + err
    alpha[i+1] nu[j, i+1] = beta[j+1] mu[j+1, i+1] + alpha[j] mu[j, i+1] - beta[i+1] nu[j, i] + err

where ``err`` is an O(eps) rounding term.  It is modelled by a magnitude
``err_scale * eps * (coefficient sum)`` added with the sign that enlarges
the estimate, so the monitor errs towards reorthogonalizing too often.

Indices in the docstrings are 1-based like the recurrences; the arrays
are 0-based (row position ``j - 1`` holds ``mu[j, .]``).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .linalg import EPS

__all__ = [
    "OrthoTracker",
    "select_indices",
    "default_omega0",
    "default_eta",
    "default_err_scale",
    "replay_estimates",
]


def default_omega0(steps: int) -> float:
    """Semiorthogonality threshold ``sqrt(eps / (2k + 1))`` for a k-step budget."""
    return math.sqrt(EPS / (2 * steps + 1))


def default_eta() -> float:
    return EPS**0.75


def default_err_scale(m: int, p: int) -> float:
    return 1.3 * math.sqrt(m + p)


def _enlarge(rec: np.ndarray, theta: float) -> np.ndarray:
    return rec + np.where(rec >= 0, theta, -theta)


@dataclass
class OrthoTracker:
    """Estimates of ``mu[., i]`` and ``nu[., i]`` for the current step.

    ``mu_curr`` holds ``mu[1..i, i]`` (so ``mu_curr[-1] == 1``) and likewise
    ``nu_curr``; the ``*_prev`` rows are the ones they replaced.
    """

    omega0: float
    eta: float
    err_scale: float
    noise_seed: int = 0
    mu_curr: np.ndarray = field(default_factory=lambda: np.ones(1))
    nu_curr: np.ndarray = field(default_factory=lambda: np.ones(1))
    mu_prev: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu_prev: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not (EPS < self.eta < self.omega0 < 1):
            raise ValueError(f"need eps < eta < omega0 < 1, got eta={self.eta}, omega0={self.omega0}")
        self._rng = np.random.default_rng(self.noise_seed)

    def update_mu(self, i: int, alpha: Sequence[float], beta: Sequence[float]) -> "OrthoTracker":
        """Advance ``mu[., i] -> mu[., i+1]``; needs ``alpha[1..i]``, ``beta[1..i+1]``."""
        if len(self.mu_curr) != i or len(self.nu_curr) != i:
            raise ValueError(f"tracker holds row {len(self.mu_curr)}, asked to advance row {i}")
        a = np.asarray(alpha[:i], dtype=np.float64)
        b = np.asarray(beta[: i + 1], dtype=np.float64)
        b_next = b[i]
        if not b_next > 0:
            raise ZeroDivisionError("beta[i+1] vanished: orthogonality estimate undefined")
        mu, nu = self.mu_curr, self.nu_curr
        theta = self.err_scale * EPS * (b_next + a[i - 1])
        new = np.empty(i + 1)
        if i > 1:
            # j = 1 .. i-1; nu[0, i] == 0
            nu_shift = np.concatenate([[0.0], nu[: i - 2]])
            rec = a[: i - 1] * nu[: i - 1] + b[: i - 1] * nu_shift - a[i - 1] * mu[: i - 1]
            new[: i - 1] = _enlarge(rec, theta) / b_next
        # local term j = i: the alpha[i] contributions cancel exactly
        local = b[i - 1] * nu[i - 2] if i > 1 else 0.0
        new[i - 1] = _enlarge(np.array([local]), theta)[0] / b_next
        new[i] = 1.0
        self.mu_prev, self.mu_curr = mu, new
        return self

    def update_nu(self, i: int, alpha: Sequence[float], beta: Sequence[float]) -> "OrthoTracker":
        """Advance ``nu[., i] -> nu[., i+1]``; call after :meth:`update_mu` for the same ``i``."""
        if len(self.mu_curr) != i + 1 or len(self.nu_curr) != i:
            raise ValueError("update_nu needs the mu row of step i+1 and the nu row of step i")
        a = np.asarray(alpha[: i + 1], dtype=np.float64)
        b = np.asarray(beta[: i + 1], dtype=np.float64)
        a_next = a[i]
        if not a_next > 0:
            raise ZeroDivisionError("alpha[i+1] vanished: orthogonality estimate undefined")
        mu, nu = self.mu_curr, self.nu_curr
        theta = self.err_scale * EPS * (a_next + b[i])
        new = np.empty(i + 1)
        if i > 1:
            # j = 1 .. i-1; only mu entries with j+1 <= i+1 are ever read
            rec = b[1:i] * mu[1:i] + a[: i - 1] * mu[: i - 1] - b[i] * nu[: i - 1]
            new[: i - 1] = _enlarge(rec, theta) / a_next
        # local term j = i: the beta[i+1] contributions cancel exactly
        local = a[i - 1] * mu[i - 1]
        new[i - 1] = _enlarge(np.array([local]), theta)[0] / a_next
        new[i] = 1.0
        self.nu_prev, self.nu_curr = nu, new
        return self

    def candidates(self, side: str) -> np.ndarray:
        """``|estimate[j, i+1]|`` for ``j = 1..i-1``: the entries eligible for reorthogonalization."""
        row = self.mu_curr if side == "mu" else self.nu_curr
        return np.abs(row[:-2])

    def select(self, side: str) -> list[int]:
        return select_indices(self.candidates(side), self.omega0, self.eta)

    def reset_entries(self, side: str, indices: Sequence[int]) -> "OrthoTracker":
        """Replace the selected current-row estimates by seeded noise of size ~1.5 eps."""
        if side not in ("mu", "nu"):
            raise ValueError(f"side must be 'mu' or 'nu', got {side!r}")
        idx = np.asarray(sorted(indices), dtype=np.int64)
        if idx.size == 0:
            return self
        row = (self.mu_curr if side == "mu" else self.nu_curr).copy()
        mags = self._rng.uniform(0.5, 1.0, size=idx.size)
        signs = np.where(self._rng.random(idx.size) < 0.5, -1.0, 1.0)
        row[idx] = 1.5 * EPS * signs * mags
        if side == "mu":
            self.mu_curr = row
        else:
            self.nu_curr = row
        return self

    @property
    def mu_level(self) -> float:
        return float(np.max(np.abs(self.mu_curr[:-1]), initial=0.0))

    @property
    def nu_level(self) -> float:
        return float(np.max(np.abs(self.nu_curr[:-1]), initial=0.0))


def select_indices(row, omega0: float, eta: float) -> list[int]:
    """Indices to reorthogonalize against (the eta-criterion), 0-based.

    Every entry above ``omega0`` pulls in the maximal run of neighbours
    around it that stay above ``eta``; entries above ``eta`` that are not
    connected to an entry above ``omega0`` are left alone.
    """
    row = np.abs(np.asarray(row, dtype=np.float64))
    n = row.size
    chosen: list[int] = []
    above_eta = row > eta
    covered_until = -1
    for j in np.nonzero(row > omega0)[0]:
        if j <= covered_until:
            continue
        lo = j
        while lo > 0 and above_eta[lo - 1]:
            lo -= 1
        hi = j
        while hi < n - 1 and above_eta[hi + 1]:
            hi += 1
        chosen.extend(range(max(lo, covered_until + 1), hi + 1))
        covered_until = hi
    return chosen


def replay_estimates(alpha, beta, steps: int, omega0: float, eta: float, err_scale: float):
    """Run the recurrences over stored coefficients without any resets.

    Returns lists ``mu_rows[i-1] = mu[1..i+1, i+1]`` and
    ``nu_rows[i-1] = nu[1..i+1, i+1]`` for ``i = 1..steps``; meant for
    runs without reorthogonalization, where no reset ever happens.
    """
    tracker = OrthoTracker(omega0, eta, err_scale)
    mu_rows, nu_rows = [], []
    for i in range(1, steps + 1):
        tracker.update_mu(i, alpha, beta)
        tracker.update_nu(i, alpha, beta)
        mu_rows.append(tracker.mu_curr.copy())
        nu_rows.append(tracker.nu_curr.copy())
    return mu_rows, nu_rows
