"""Command-line front end: ``jbdpro run | compare | gen``.

Exit codes: 0 ok, 2 usage, 3 breakdown, 4 inner-solver failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bidiag_svd import inv_norm, svd_bidiagonal
from .diagnostics import DIAG_COLUMNS, build_report
from .gsvd import ritz_trace
from .jbd import STRATEGIES, StrategyConfig, jbd_run
from .linalg import EPS, RankDeficientError
from .projector import LsqrConvergenceError, ProjectionProvider, SparsePair
from .sparse_io import MatrixMarketError, load_matrix_market, write_csv_trace, write_matrix_market
from .testgen import BUILTIN_PAIRS, builtin_pair, make_first_derivative

EXIT_OK, EXIT_USAGE, EXIT_BREAKDOWN, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    pair_a: str | None
    pair_l: str | None
    builtin: str | None
    steps: int
    strategy: str
    eta: float | None
    projector: str
    lsqr_atol: float
    seed: int
    out: Path
    repeat: int = 1

    @property
    def omega0(self) -> float:
        return math.sqrt(EPS / (2 * self.steps + 1))


def _parse_eta(text: str):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eta must be 'auto' or a float, got {text!r}") from None
    return value


def _add_run_flags(p: argparse.ArgumentParser, with_strategy: bool):
    src = p.add_argument_group("pair source")
    src.add_argument("--pair-a", help="Matrix Market file for A")
    src.add_argument("--pair-l", help="Matrix Market file for L")
    src.add_argument("--builtin", choices=BUILTIN_PAIRS, help="built-in test pair")
    p.add_argument("--steps", type=int, default=200)
    if with_strategy:
        p.add_argument("--strategy", choices=STRATEGIES, default="partial")
    p.add_argument("--eta", type=_parse_eta, default=None, help="'auto' (eps^(3/4)) or a float")
    p.add_argument("--projector", choices=("qr", "lsqr"), default="qr")
    p.add_argument("--lsqr-atol", type=float, default=1e-14)
    p.add_argument("--seed", type=int, default=0, help="seed for the reset noise of the monitor")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--repeat", type=int, default=1, help="timing repetitions (median reported)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jbdpro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run one strategy and write diagnostics"), True)
    _add_run_flags(sub.add_parser("compare", help="run none, partial and full on one pair"), False)
    gen = sub.add_parser("gen", help="write a built-in pair as Matrix Market files")
    gen.add_argument("name", help="cs800, mult800 or deriv:<n>")
    gen.add_argument("--out", type=Path, default=Path("."))
    return parser


def _config(args, strategy: str) -> RunConfig:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    files = args.pair_a is not None or args.pair_l is not None
    if files and args.builtin:
        raise UsageError("give either --builtin or --pair-a/--pair-l, not both")
    if files and (args.pair_a is None or args.pair_l is None):
        raise UsageError("--pair-a and --pair-l go together")
    if not files and not args.builtin:
        raise UsageError("no pair given: use --builtin or --pair-a/--pair-l")
    if args.eta is not None and not (EPS < args.eta < math.sqrt(EPS / (2 * args.steps + 1))):
        raise UsageError("--eta must lie strictly between eps and omega0")
    if args.projector == "lsqr" and not (0 < args.lsqr_atol <= 1e-8):
        raise UsageError("--lsqr-atol must lie in (0, 1e-8]")
    return RunConfig(
        args.pair_a, args.pair_l, args.builtin, args.steps, strategy, args.eta,
        args.projector, args.lsqr_atol, args.seed, args.out, args.repeat,
    )


def _load_pair(cfg: RunConfig):
    if cfg.builtin:
        return builtin_pair(cfg.builtin)
    return SparsePair(load_matrix_market(cfg.pair_a), load_matrix_market(cfg.pair_l)), None


def _provider(cfg: RunConfig, pair: SparsePair) -> ProjectionProvider:
    if cfg.projector == "qr":
        return ProjectionProvider.explicit(pair)
    return ProjectionProvider.iterative(pair, cfg.lsqr_atol)


def _strategy(cfg: RunConfig, kind: str) -> StrategyConfig:
    return StrategyConfig(kind, eta=cfg.eta, noise_seed=cfg.seed)


def _ritz_rows(state, side: str):
    rows = []
    for k in range(1, state.k + 1):
        thetas = svd_bidiagonal(state.coeffs, side, k, want_vectors=False).thetas
        rows.extend({"step": k, "index": j + 1, "theta": float(t)} for j, t in enumerate(thetas))
    return rows


def _reorth_rows(state):
    rec = state.reorth
    rows = []
    for i in range(state.k):
        for side, sets in (("u", rec.t_sets), ("vt", rec.s_sets), ("uh", rec.uhat_sets)):
            rows.append({"step": i + 1, "side": side, "selected": len(sets[i])})
    return rows


def _multiplicities(truth, side: str):
    if truth is None:
        return None
    values = truth.c if side == "B" else truth.s
    return {float(v): truth.multiplicity(c) for v, c in zip(values, truth.c)}


def _ghosts(state, truth, side: str) -> int:
    if state.k < 5:
        return 0
    hist = [svd_bidiagonal(state.coeffs, side, k, want_vectors=False) for k in range(1, state.k + 1)]
    return len(ritz_trace(hist, multiplicities=_multiplicities(truth, side)).ghosts)


def cmd_run(cfg: RunConfig) -> int:
    pair, _ = _load_pair(cfg)
    provider = _provider(cfg, pair)
    state = jbd_run(provider, np.ones(pair.m), cfg.steps, _strategy(cfg, cfg.strategy))
    out = cfg.out
    rows = build_report(state, provider).rows() if state.k else []
    write_csv_trace(rows, out / "diag.csv", DIAG_COLUMNS)
    write_csv_trace(_ritz_rows(state, "B"), out / "ritz_b.csv", ("step", "index", "theta"))
    write_csv_trace(_ritz_rows(state, "Bhat"), out / "ritz_bhat.csv", ("step", "index", "theta"))
    write_csv_trace(_reorth_rows(state), out / "reorth.csv", ("step", "side", "selected"))
    if state.k:
        if inv_norm(state.coeffs, "B", state.k) > 1e3:
            print(
                "warning: the square part of B_k is ill conditioned; consider swapping A and L",
                file=sys.stderr,
            )
    if state.breakdown is not None:
        b = state.breakdown
        print(f"breakdown at step {b.step}: {b.coefficient} = {b.value:.3e}", file=sys.stderr)
        return EXIT_BREAKDOWN
    print(f"{cfg.strategy}: {state.k} steps, {state.reorth.total_ops} reorthogonalizations -> {out}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    pair, truth = _load_pair(cfg)
    provider = _provider(cfg, pair)
    b = np.ones(pair.m)
    rows = []
    broke = False
    for kind in ("none", "partial", "full"):
        times = []
        for _ in range(cfg.repeat):
            t0 = time.perf_counter()
            state = jbd_run(provider, b, cfg.steps, _strategy(cfg, kind))
            times.append(time.perf_counter() - t0)
        broke |= state.breakdown is not None
        report = build_report(state, provider, steps=[state.k], residuals=False) if state.k else None
        rows.append(
            {
                "strategy": kind,
                "steps": state.k,
                "wall_time": float(np.median(times)),
                "reorth_ops": state.reorth.total_ops,
                "kappa_u": report.kappa_u[-1] if report else math.nan,
                "kappa_vt": report.kappa_vt[-1] if report else math.nan,
                "kappa_uh": report.kappa_uh[-1] if report else math.nan,
                "ghosts_b": _ghosts(state, truth, "B"),
                "ghosts_bhat": _ghosts(state, truth, "Bhat"),
            }
        )
    write_csv_trace(rows, cfg.out / "compare.csv")
    for row in rows:
        print(
            f"{row['strategy']:>8}: {row['wall_time']:.3f} s, {row['reorth_ops']} reorth ops,"
            f" ghosts {row['ghosts_b']}/{row['ghosts_bhat']}"
        )
    return EXIT_BREAKDOWN if broke else EXIT_OK


def cmd_gen(name: str, out: Path) -> int:
    if name.startswith("deriv:"):
        try:
            n = int(name.split(":", 1)[1])
            mat = make_first_derivative(n)
        except ValueError as exc:
            raise UsageError(f"bad derivative size in {name!r}: {exc}") from None
        out.mkdir(parents=True, exist_ok=True)
        write_matrix_market(mat, out / f"deriv{n}.mtx", comment=f"first-derivative operator, n = {n}")
        return EXIT_OK
    if name not in BUILTIN_PAIRS:
        raise UsageError(f"unknown generator {name!r}; choose cs800, mult800 or deriv:<n>")
    pair, truth = builtin_pair(name)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(pair.a, out / f"{name}_A.mtx", comment=f"{name}: A = diag(c) D")
    write_matrix_market(pair.l, out / f"{name}_L.mtx", comment=f"{name}: L = diag(s) D")
    rows = [
        {"index": i + 1, "c": float(c), "s": float(s), "multiplicity": truth.multiplicity(c)}
        for i, (c, s) in enumerate(zip(truth.c, truth.s))
    ]
    write_csv_trace(rows, out / f"{name}_truth.csv", ("index", "c", "s", "multiplicity"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "gen":
            return cmd_gen(args.name, args.out)
        cfg = _config(args, getattr(args, "strategy", "partial"))
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_compare(cfg)
    except UsageError as exc:
        print(f"jbdpro: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LsqrConvergenceError as exc:
        print(f"jbdpro: inner solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, MatrixMarketError) as exc:
        print(f"jbdpro: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RankDeficientError, ValueError) as exc:
        print(f"jbdpro: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
