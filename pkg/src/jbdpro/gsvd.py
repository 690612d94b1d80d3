"""Approximate GSVD components from Ritz decompositions, and Ritz-value traces.

A trace follows the sorted Ritz values of one side over consecutive
steps.  A value is *converged* at step k when every one of the next
``window`` steps holds a Ritz value within ``ctol`` of it.  Ghosts are
found by rank: the r-th largest (or smallest) Ritz value that had
converged to one target later reconverges at a different target that
had already converged elsewhere.  Without outside knowledge a genuine
multiple value produces exactly the same pattern, so callers that know
the multiplicities can pass them and such jumps are then classified as
ghosts only when they create more converged copies than exist.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .bidiag_svd import RitzDecomposition
from .jbd import JbdState
from .projector import ProjectionProvider

__all__ = [
    "GsvdApprox",
    "extract_gsvd",
    "gsvd_residual",
    "GhostEvent",
    "RitzTrace",
    "InsufficientHistoryError",
    "ritz_trace",
]


@dataclass(frozen=True)
class GsvdApprox:
    c: float
    s: float
    right_vector: np.ndarray
    left_vector_a: np.ndarray | None = None
    left_vector_l: np.ndarray | None = None


def extract_gsvd(
    state: JbdState,
    decomposition: RitzDecomposition,
    index: int,
    provider: ProjectionProvider,
    want_left: tuple[bool, bool] = (False, False),
) -> GsvdApprox:
    """The ``index``-th (0-based, by decreasing theta) approximate GSVD component.

    ``want_left = (a, l)`` asks for ``U_{k+1} p`` (side B only) and
    ``Uh_k p`` (side Bhat only).
    """
    k = decomposition.k
    if decomposition.right is None:
        raise ValueError("decomposition was computed without vectors")
    if not 0 <= index < k:
        raise IndexError(f"index {index} out of range for k = {k}")
    if k > state.k:
        raise ValueError(f"decomposition has k = {k} but the run only has {state.k} steps")
    theta = float(decomposition.thetas[index])
    w = decomposition.right[:, index]
    p = decomposition.left[:, index]
    other = math.sqrt(max(0.0, 1.0 - theta * theta))
    if decomposition.side == "B":
        c, s = theta, other
        rhs = state.vt[:, :k] @ w
    elif decomposition.side == "Bhat":
        c, s = other, theta
        rhs = state.vt[:, :k] @ (state.sign_parity(k) * w)
    else:
        raise ValueError(f"unknown side {decomposition.side!r}")
    x = provider.solve(rhs)
    left_a = left_l = None
    if want_left[0] and decomposition.side == "B":
        left_a = state.u[:, : k + 1] @ p
    if want_left[1] and decomposition.side == "Bhat":
        left_l = state.uh[:, :k] @ p
    return GsvdApprox(c, s, x, left_a, left_l)


def gsvd_residual(provider: ProjectionProvider, approx: GsvdApprox) -> float:
    """``||s^2 A^T A x - c^2 L^T L x|| / ||x||``."""
    pair = provider.pair
    x = approx.right_vector
    ax = pair.a.rmatvec(pair.a.matvec(x))
    lx = pair.l.rmatvec(pair.l.matvec(x))
    return float(np.linalg.norm(approx.s**2 * ax - approx.c**2 * lx) / np.linalg.norm(x))


class InsufficientHistoryError(ValueError):
    pass


@dataclass(frozen=True)
class GhostEvent:
    step: int
    rank: int
    end: str
    value: float
    previous: float
    kind: str


@dataclass
class RitzTrace:
    """Ritz values per step (``thetas[k-1]`` nonincreasing) with convergence flags.

    Flags exist for steps ``1..evaluable``; later steps lack the
    look-ahead window.  ``copy_events`` holds rank jumps judged genuine
    because the caller's multiplicities allow the extra copy.
    """

    thetas: list
    converged: list
    ctol: float
    window: int
    ghosts: list = field(default_factory=list)
    copy_events: list = field(default_factory=list)

    @property
    def evaluable(self) -> int:
        return len(self.converged)

    def converged_values(self, step: int) -> np.ndarray:
        return self.thetas[step - 1][self.converged[step - 1]]

    def copies(self, target: float, tol: float = 1e-8) -> np.ndarray:
        """Converged copies of ``target`` at each evaluable step."""
        return np.array(
            [int(np.count_nonzero(np.abs(self.converged_values(k) - target) <= tol)) for k in range(1, self.evaluable + 1)]
        )


def _nearest_distance(sorted_vals: np.ndarray, queries: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(sorted_vals, queries)
    lo = np.clip(pos - 1, 0, sorted_vals.size - 1)
    hi = np.clip(pos, 0, sorted_vals.size - 1)
    return np.minimum(np.abs(queries - sorted_vals[lo]), np.abs(queries - sorted_vals[hi]))


def _allowed(multiplicities, value: float, tol: float):
    for key, count in multiplicities.items():
        if abs(float(key) - value) <= tol:
            return int(count)
    return 1


def ritz_trace(
    history: Sequence,
    ctol: float | None = None,
    window: int = 3,
    ranks: int = 10,
    multiplicities: Mapping | None = None,
    value_tol: float = 1e-8,
) -> RitzTrace:
    """Build a :class:`RitzTrace` from consecutive decompositions (or theta arrays).

    ``ctol`` defaults to ``1e-10`` times the largest final Ritz value.
    Ghost tracking covers the ``ranks`` largest and smallest values.
    ``multiplicities`` maps known values to their multiplicity (matched
    within ``value_tol``); unknown values count as simple.
    """
    thetas = [
        np.asarray(h.thetas if isinstance(h, RitzDecomposition) else h, dtype=np.float64) for h in history
    ]
    if len(thetas) < 5:
        raise InsufficientHistoryError(f"need at least 5 steps of history, got {len(thetas)}")
    if window < 1:
        raise ValueError("window must be at least 1")
    if ctol is None:
        ctol = 1e-10 * float(thetas[-1][0])
    ascending = [t[::-1] for t in thetas]

    converged = []
    for k in range(len(thetas) - window):
        ok = np.ones(thetas[k].size, dtype=bool)
        for s in range(1, window + 1):
            ok &= _nearest_distance(ascending[k + s], thetas[k]) <= ctol
        converged.append(ok)
    trace = RitzTrace(thetas, converged, ctol, window)

    jump = 100.0 * ctol
    seen: list[float] = []
    last = {("top", r): None for r in range(ranks)}
    last.update({("bottom", r): None for r in range(ranks)})
    for k, flags in enumerate(converged, start=1):
        vals = thetas[k - 1]
        conv_now = vals[flags]
        for end in ("top", "bottom"):
            for r in range(min(ranks, vals.size)):
                j = r if end == "top" else vals.size - 1 - r
                if not flags[j]:
                    continue
                value = float(vals[j])
                prev = last[(end, r)]
                last[(end, r)] = value
                if prev is None or abs(value - prev) <= jump:
                    continue
                if not any(abs(value - t) <= ctol for t in seen):
                    continue
                kind = "jump-up" if value > prev else "jump-down"
                event = GhostEvent(k, r + 1, end, value, prev, kind)
                if multiplicities is not None:
                    copies = int(np.count_nonzero(np.abs(conv_now - value) <= value_tol))
                    if copies <= _allowed(multiplicities, value, value_tol):
                        trace.copy_events.append(event)
                        continue
                trace.ghosts.append(event)
        for value in conv_now:
            if not any(abs(value - t) <= ctol for t in seen):
                seen.append(float(value))
    return trace
