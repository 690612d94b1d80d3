"""Joint bidiagonalization of a matrix pair with optional reorthogonalization.

One run produces ``U_{k+1}``, ``Vt_{k+1}`` (the stacked vectors ``v~_i``) and
``Uh_{k+1}`` together with the coefficients of the lower bidiagonal
``B_k`` (alpha, beta) and the upper bidiagonal ``Bh_k`` (alpha_hat,
beta_hat).  Three strategies are available:

* ``none``: the plain recurrences, local orthogonality only;
* ``full``: every new u, v~ and u^ is made orthogonal to all earlier ones;
* ``partial``: u and v~ are reorthogonalized only when the running
  estimates of :class:`~jbdpro.ortho_monitor.OrthoTracker` cross ``omega0``,
  against the neighbourhoods picked by the eta-criterion; u^ never is.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import EPS, mgs_orthogonalize
from .ortho_monitor import OrthoTracker, default_err_scale, default_eta, default_omega0
from .projector import ProjectionProvider

__all__ = [
    "Breakdown",
    "BreakdownInfo",
    "BidiagPair",
    "ReorthRecord",
    "StrategyConfig",
    "JbdState",
    "jbd_init",
    "jbd_step",
    "jbd_run",
    "STRATEGIES",
]

log = logging.getLogger(__name__)

STRATEGIES = ("none", "full", "partial")


@dataclass(frozen=True)
class BreakdownInfo:
    step: int
    coefficient: str
    value: float
    threshold: float


class Breakdown(ArithmeticError):
    """A recurrence coefficient became negligible (an invariant subspace was found)."""

    def __init__(self, info: BreakdownInfo, state: "JbdState | None" = None):
        super().__init__(
            f"breakdown at step {info.step}: {info.coefficient} = {info.value:.3e}"
            f" <= {info.threshold:.3e}"
        )
        self.info = info
        self.state = state


@dataclass
class BidiagPair:
    """Coefficients of ``B_k`` (lower, (k+1) x k) and ``Bh_k`` (upper, k x k).

    Lists are 0-based: ``alpha[0]`` is alpha_1.  After k steps ``alpha``,
    ``beta`` and ``alpha_hat`` hold k+1 entries and ``beta_hat`` holds k.
    """

    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    alpha_hat: list = field(default_factory=list)
    beta_hat: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.beta_hat)

    def _check(self, k: int):
        if k < 1:
            raise ValueError("k must be at least 1")
        if k > self.steps:
            raise ValueError(f"only {self.steps} steps available, asked for {k}")

    def b_matrix(self, k: int) -> np.ndarray:
        """``B_k``: diagonal alpha_1..alpha_k, subdiagonal beta_2..beta_{k+1}."""
        self._check(k)
        b = np.zeros((k + 1, k))
        idx = np.arange(k)
        b[idx, idx] = self.alpha[:k]
        b[idx + 1, idx] = self.beta[1 : k + 1]
        return b

    def bhat_matrix(self, k: int) -> np.ndarray:
        """``Bh_k``: diagonal alpha_hat_1..alpha_hat_k, superdiagonal beta_hat_1..beta_hat_{k-1}."""
        self._check(k)
        b = np.diag(np.asarray(self.alpha_hat[:k], dtype=np.float64))
        idx = np.arange(k - 1)
        b[idx, idx + 1] = self.beta_hat[: k - 1]
        return b

    def bunder_matrix(self, k: int) -> np.ndarray:
        """The square ``k x k`` upper bidiagonal with diagonal alpha_1..alpha_k and superdiagonal beta_2..beta_k."""
        self._check(k)
        b = np.diag(np.asarray(self.alpha[:k], dtype=np.float64))
        idx = np.arange(k - 1)
        b[idx, idx + 1] = self.beta[1:k]
        return b

    def arrays(self) -> dict:
        return {
            name: np.asarray(getattr(self, name), dtype=np.float64)
            for name in ("alpha", "beta", "alpha_hat", "beta_hat")
        }


@dataclass
class ReorthRecord:
    """Per-step reorthogonalization index sets (0-based) and coefficients.

    ``t_sets[i-1]`` and ``s_sets[i-1]`` are the sets used at step i for
    ``u_{i+1}`` and ``v~_{i+1}``; ``uhat_sets`` likewise for the full
    strategy.  The ``*_ops`` lists are cumulative counts of vector
    orthogonalizations after each step.
    """

    t_sets: list = field(default_factory=list)
    s_sets: list = field(default_factory=list)
    uhat_sets: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    xi_hat: list = field(default_factory=list)
    u_ops: list = field(default_factory=list)
    v_ops: list = field(default_factory=list)
    uhat_ops: list = field(default_factory=list)

    def _append(self, t, s, h, xi, eta, xi_hat):
        prev = (self.u_ops[-1], self.v_ops[-1], self.uhat_ops[-1]) if self.u_ops else (0, 0, 0)
        self.t_sets.append(list(t))
        self.s_sets.append(list(s))
        self.uhat_sets.append(list(h))
        self.xi.append(np.asarray(xi))
        self.eta.append(np.asarray(eta))
        self.xi_hat.append(np.asarray(xi_hat))
        self.u_ops.append(prev[0] + len(t))
        self.v_ops.append(prev[1] + len(s))
        self.uhat_ops.append(prev[2] + len(h))

    @property
    def total_ops(self) -> int:
        if not self.u_ops:
            return 0
        return self.u_ops[-1] + self.v_ops[-1] + self.uhat_ops[-1]

    @property
    def events(self) -> int:
        """Number of (step, side) pairs that reorthogonalized against at least one vector."""
        return sum(bool(t) for t in self.t_sets) + sum(bool(s) for s in self.s_sets) + sum(
            bool(h) for h in self.uhat_sets
        )


@dataclass(frozen=True)
class StrategyConfig:
    """Reorthogonalization settings; ``None`` fields are filled by :meth:`resolve`."""

    kind: str = "partial"
    eta: float | None = None
    omega0: float | None = None
    uhat_reorth: bool | None = None
    err_scale: float | None = None
    noise_seed: int = 0
    refine: bool = False

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {', '.join(STRATEGIES)}")
        if self.kind == "partial" and self.eta is not None and self.omega0 is not None:
            if not (EPS < self.eta < self.omega0 < 1):
                raise ValueError("partial strategy needs eps < eta < omega0 < 1")

    def resolve(self, steps: int, m: int, p: int) -> "StrategyConfig":
        return replace(
            self,
            eta=default_eta() if self.eta is None else self.eta,
            omega0=default_omega0(steps) if self.omega0 is None else self.omega0,
            uhat_reorth=(self.kind == "full") if self.uhat_reorth is None else self.uhat_reorth,
            err_scale=default_err_scale(m, p) if self.err_scale is None else self.err_scale,
        )


@dataclass
class JbdState:
    """Everything a run has produced after ``k`` steps.

    The bases are preallocated to ``capacity`` columns; the accessors return
    the filled part (k+1 columns).
    """

    k: int
    m: int
    p: int
    u: np.ndarray
    vt: np.ndarray
    uh: np.ndarray
    coeffs: BidiagPair
    reorth: ReorthRecord
    config: StrategyConfig
    tracker: OrthoTracker | None = None
    threshold: float = 0.0
    breakdown: BreakdownInfo | None = None
    forced_t: list | None = None
    forced_s: list | None = None

    @property
    def capacity(self) -> int:
        return self.u.shape[1]

    @property
    def u_basis(self) -> np.ndarray:
        """``U_{k+1}``."""
        return self.u[:, : self.k + 1]

    @property
    def vtilde_basis(self) -> np.ndarray:
        """``Vt_{k+1}`` (use ``[:, :k]`` for ``Vt_k``)."""
        return self.vt[:, : self.k + 1]

    @property
    def uhat_basis(self) -> np.ndarray:
        """``Uh_{k+1}``."""
        return self.uh[:, : self.k + 1]

    def sign_parity(self, k: int | None = None) -> np.ndarray:
        """Diagonal of ``P = diag(1, -1, 1, ...)`` of order k."""
        k = self.k if k is None else k
        return np.where(np.arange(k) % 2 == 0, 1.0, -1.0)

    def _grow(self, extra: int):
        self.u = np.hstack([self.u, np.zeros((self.u.shape[0], extra))])
        self.vt = np.hstack([self.vt, np.zeros((self.vt.shape[0], extra))])
        self.uh = np.hstack([self.uh, np.zeros((self.uh.shape[0], extra))])


def _check_coeff(state: JbdState, step: int, name: str, value: float):
    if not value > state.threshold:
        info = BreakdownInfo(step, name, float(value), state.threshold)
        state.breakdown = info
        raise Breakdown(info, state)


def jbd_init(
    provider: ProjectionProvider, b, config: StrategyConfig, steps: int | None = None
) -> JbdState:
    """Steps 1-3 of the process.  ``steps`` is the planned budget (sets omega0 and capacity)."""
    b = np.asarray(b, dtype=np.float64)
    m, p = provider.m, provider.p
    if b.shape != (m,):
        raise ValueError(f"starting vector must have length {m}, got {b.shape}")
    beta1 = float(np.linalg.norm(b))
    if not beta1 > 0 or not np.isfinite(beta1):
        raise ValueError("starting vector must be finite and nonzero")
    budget = 1 if steps is None else steps
    if budget < 1:
        raise ValueError("steps must be at least 1")
    config = config.resolve(budget, m, p)
    cap = budget + 1

    u1 = b / beta1
    vt1 = provider.project(u1)
    alpha1 = float(np.linalg.norm(vt1))
    state = JbdState(
        k=0,
        m=m,
        p=p,
        u=np.zeros((m, cap)),
        vt=np.zeros((m + p, cap)),
        uh=np.zeros((p, cap)),
        coeffs=BidiagPair([], [beta1], [], []),
        reorth=ReorthRecord(),
        config=config,
        threshold=(m + p) * EPS * max(alpha1, beta1),
    )
    _check_coeff(state, 0, "alpha_1", alpha1)
    vt1 = vt1 / alpha1
    w = vt1[m:]
    alpha_hat1 = float(np.linalg.norm(w))
    _check_coeff(state, 0, "alpha_hat_1", alpha_hat1)
    state.u[:, 0] = u1
    state.vt[:, 0] = vt1
    state.uh[:, 0] = w / alpha_hat1
    state.coeffs.alpha.append(alpha1)
    state.coeffs.alpha_hat.append(alpha_hat1)
    if config.kind == "partial":
        state.tracker = OrthoTracker(
            config.omega0, config.eta, config.err_scale, noise_seed=config.noise_seed
        )
    return state


def _partial_select(tracker: OrthoTracker, side: str, forced, i: int) -> tuple[list, list | None]:
    """Indices for step i and the set forced on step i+1.

    A step that reorthogonalizes on its own forces the next step to use
    the same set plus the newest old vector (0-based ``i - 1``); a forced
    step does not force again.
    """
    selected = sorted(set(tracker.select(side)) | set(forced or ()))
    if selected and forced is None:
        return selected, selected + [i - 1]
    return selected, None


def jbd_step(state: JbdState, provider: ProjectionProvider) -> JbdState:
    """One iteration: extends the bases by ``u_{i+1}``, ``v~_{i+1}``, ``u^_{i+1}`` (in place).

    Raises :class:`Breakdown` if beta_{i+1}, alpha_{i+1} or alpha_hat_{i+1}
    falls below the breakdown threshold; the state then keeps its previous
    step count and records the event in ``state.breakdown``.
    """
    if state.breakdown is not None:
        raise RuntimeError("cannot continue a run after breakdown")
    i = state.k + 1
    m = state.m
    cfg = state.config
    co = state.coeffs
    if i + 1 > state.capacity:
        state._grow(max(8, state.capacity))
    # full strategy: against every earlier vector, the newest one included
    prev = np.arange(i)

    # u_{i+1}
    r = state.vt[:m, i - 1] - co.alpha[i - 1] * state.u[:, i - 1]
    t_set: list = []
    if cfg.kind == "partial":
        tracker = state.tracker
        tracker.update_mu(i, co.alpha, co.beta + [float(np.linalg.norm(r))])
        t_set, state.forced_t = _partial_select(tracker, "mu", state.forced_t, i)
    elif cfg.kind == "full":
        t_set = list(prev)
    xi = np.zeros(0)
    if t_set:
        r, xi = mgs_orthogonalize(r, state.u, t_set, refine=cfg.refine)
        if cfg.kind == "partial":
            state.tracker.reset_entries("mu", t_set)
    beta_next = float(np.linalg.norm(r))
    _check_coeff(state, i, f"beta_{i + 1}", beta_next)
    u_next = r / beta_next

    # v~_{i+1}
    s = provider.project(u_next) - beta_next * state.vt[:, i - 1]
    s_set: list = []
    if cfg.kind == "partial":
        tracker = state.tracker
        tracker.update_nu(i, co.alpha + [float(np.linalg.norm(s))], co.beta + [beta_next])
        s_set, state.forced_s = _partial_select(tracker, "nu", state.forced_s, i)
    elif cfg.kind == "full":
        s_set = list(prev)
    eta = np.zeros(0)
    if s_set:
        s, eta = mgs_orthogonalize(s, state.vt, s_set, refine=cfg.refine)
        if cfg.kind == "partial":
            state.tracker.reset_entries("nu", s_set)
    alpha_next = float(np.linalg.norm(s))
    _check_coeff(state, i, f"alpha_{i + 1}", alpha_next)
    vt_next = s / alpha_next

    # u^_{i+1}; beta_hat by formula, never by orthogonalization
    beta_hat = alpha_next * beta_next / co.alpha_hat[i - 1]
    sign = -1.0 if i % 2 else 1.0
    w = sign * vt_next[m:] - beta_hat * state.uh[:, i - 1]
    h_set: list = list(prev) if cfg.uhat_reorth else []
    xi_hat = np.zeros(0)
    if h_set:
        w, xi_hat = mgs_orthogonalize(w, state.uh, h_set, refine=cfg.refine)
    alpha_hat_next = float(np.linalg.norm(w))
    _check_coeff(state, i, f"alpha_hat_{i + 1}", alpha_hat_next)

    state.u[:, i] = u_next
    state.vt[:, i] = vt_next
    state.uh[:, i] = w / alpha_hat_next
    co.beta.append(beta_next)
    co.alpha.append(alpha_next)
    co.beta_hat.append(beta_hat)
    co.alpha_hat.append(alpha_hat_next)
    state.reorth._append(t_set, s_set, h_set, xi, eta, xi_hat)
    state.k = i
    return state


def jbd_run(
    provider: ProjectionProvider,
    b,
    steps: int,
    config: StrategyConfig,
    callback=None,
) -> JbdState:
    """``jbd_init`` followed by up to ``steps`` calls of :func:`jbd_step`.

    Stops early on breakdown; ``state.breakdown`` then says where.
    ``callback(state)``, if given, runs after every completed step.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    try:
        state = jbd_init(provider, b, config, steps)
    except Breakdown as exc:
        log.info("%s", exc)
        return exc.state
    for _ in range(steps):
        try:
            jbd_step(state, provider)
        except Breakdown as exc:
            log.info("%s", exc)
            break
        if callback is not None:
            callback(state)
    return state
