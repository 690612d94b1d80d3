import csv
import math

import numpy as np
import pytest

from jbdpro import cli
from jbdpro.projector import LsqrConvergenceError
from jbdpro.sparse_io import CsrMatrix, load_matrix_market, write_matrix_market
from jbdpro.testgen import make_cs_pair, sine_orthogonal


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def cs800_run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = cli.main(["run", "--builtin", "cs800", "--steps", "200", "--strategy", "partial", "--out", str(out)])
    assert code == 0
    return out


def test_run_cs800_diag(cs800_run_dir):
    rows = _read(cs800_run_dir / "diag.csv")
    assert len(rows) == 200
    assert tuple(rows[0]) == cli.DIAG_COLUMNS
    assert all(r["guard48"] == "true" for r in rows)
    assert max(float(r["hk"]) for r in rows) <= 100 * np.finfo(float).eps


def test_run_artifacts_schema(cs800_run_dir):
    ritz = _read(cs800_run_dir / "ritz_b.csv")
    assert tuple(ritz[0]) == ("step", "index", "theta")
    assert len(ritz) == 200 * 201 // 2
    last = [float(r["theta"]) for r in ritz if r["step"] == "200"]
    assert abs(last[0] - 0.75) <= 1e-10
    assert len(_read(cs800_run_dir / "ritz_bhat.csv")) == len(ritz)
    reorth = _read(cs800_run_dir / "reorth.csv")
    assert tuple(reorth[0]) == ("step", "side", "selected")
    assert len(reorth) == 600
    assert {r["side"] for r in reorth} == {"u", "vt", "uh"}
    assert any(int(r["selected"]) > 0 for r in reorth)


def test_run_is_byte_identical(tmp_path):
    dirs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli.main(["run", "--builtin", "mult800", "--steps", "40", "--seed", "7", "--out", str(out)]) == 0
        dirs.append(out)
    for name in ("diag.csv", "ritz_b.csv", "ritz_bhat.csv", "reorth.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--builtin", "cs800", "--steps", "0"],
        ["run", "--builtin", "cs800", "--repeat", "0"],
        ["run", "--steps", "5"],
        ["run", "--builtin", "cs800", "--pair-a", "a.mtx", "--pair-l", "l.mtx"],
        ["run", "--pair-a", "a.mtx"],
        ["run", "--builtin", "cs800", "--eta", "1e-3"],
        ["run", "--builtin", "cs800", "--eta", "1e-17"],
        ["run", "--builtin", "cs800", "--eta", "fast"],
        ["run", "--builtin", "cs800", "--strategy", "some"],
        ["run", "--builtin", "nope"],
        ["run", "--builtin", "cs800", "--projector", "lsqr", "--lsqr-atol", "1e-3"],
        ["gen", "nope"],
        ["gen", "deriv:x"],
        ["gen", "deriv:1"],
        [],
    ],
)
def test_usage_errors(argv, tmp_path, capsys):
    assert cli.main(argv + ([] if not argv or argv[0] != "gen" else ["--out", str(tmp_path)])) == 2


def test_eta_auto_and_explicit(tmp_path):
    assert cli.main(["run", "--builtin", "cs800", "--steps", "5", "--eta", "auto", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--builtin", "cs800", "--steps", "5", "--eta", "1e-12", "--out", str(tmp_path / "b")]) == 0


def test_run_config_omega0():
    args = cli.build_parser().parse_args(["run", "--builtin", "cs800", "--steps", "200"])
    cfg = cli._config(args, args.strategy)
    assert cfg.omega0 == pytest.approx(math.sqrt(np.finfo(float).eps / 401))
    assert cfg.projector == "qr" and cfg.eta is None


def test_compare_cs800(tmp_path):
    code = cli.main(["compare", "--builtin", "cs800", "--steps", "200", "--out", str(tmp_path)])
    assert code == 0
    rows = {r["strategy"]: r for r in _read(tmp_path / "compare.csv")}
    assert set(rows) == {"none", "partial", "full"}
    assert int(rows["none"]["reorth_ops"]) == 0
    assert 0 < int(rows["partial"]["reorth_ops"]) < int(rows["full"]["reorth_ops"])
    assert all(float(r["wall_time"]) > 0 for r in rows.values())
    assert float(rows["partial"]["kappa_u"]) <= 2 * math.sqrt(np.finfo(float).eps / 401)
    assert int(rows["partial"]["ghosts_b"]) == 0


def test_compare_mult800_ghosts(tmp_path):
    code = cli.main(["compare", "--builtin", "mult800", "--steps", "300", "--out", str(tmp_path)])
    assert code == 0
    rows = {r["strategy"]: r for r in _read(tmp_path / "compare.csv")}
    assert int(rows["none"]["ghosts_b"]) >= 1
    assert int(rows["partial"]["ghosts_b"]) == 0 and int(rows["full"]["ghosts_b"]) == 0


def test_gen_cs800(tmp_path):
    assert cli.main(["gen", "cs800", "--out", str(tmp_path)]) == 0
    a = load_matrix_market(tmp_path / "cs800_A.mtx")
    l = load_matrix_market(tmp_path / "cs800_L.mtx")
    assert (a.nrows, a.ncols) == (800, 800) and (l.nrows, l.ncols) == (800, 800)
    truth = _read(tmp_path / "cs800_truth.csv")
    assert tuple(truth[0]) == ("index", "c", "s", "multiplicity")
    assert len(truth) == 800
    assert float(truth[0]["c"]) == 0.75
    c, s = float(truth[5]["c"]), float(truth[5]["s"])
    assert abs(c * c + s * s - 1) <= 1e-15


def test_gen_mult800_multiplicities(tmp_path):
    assert cli.main(["gen", "mult800", "--out", str(tmp_path)]) == 0
    truth = _read(tmp_path / "mult800_truth.csv")
    mult = {float(r["c"]): int(r["multiplicity"]) for r in truth}
    assert mult[0.86] == 2 and mult[0.15] == 2 and mult[0.9] == 1


def test_gen_deriv(tmp_path):
    assert cli.main(["gen", "deriv:5", "--out", str(tmp_path)]) == 0
    mat = load_matrix_market(tmp_path / "deriv5.mtx")
    assert (mat.nrows, mat.ncols) == (4, 5)
    assert len(mat.values) == 8


def test_files_match_builtin(tmp_path):
    gen = tmp_path / "gen"
    assert cli.main(["gen", "cs800", "--out", str(gen)]) == 0
    args = ["--steps", "20", "--seed", "3"]
    assert cli.main(["run", "--builtin", "cs800", *args, "--out", str(tmp_path / "b")]) == 0
    files = ["--pair-a", str(gen / "cs800_A.mtx"), "--pair-l", str(gen / "cs800_L.mtx")]
    assert cli.main(["run", *files, *args, "--out", str(tmp_path / "f")]) == 0
    bi = _read(tmp_path / "b" / "ritz_b.csv")
    fi = _read(tmp_path / "f" / "ritz_b.csv")
    # files are written at full precision, so the runs agree to rounding
    assert max(abs(float(x["theta"]) - float(y["theta"])) for x, y in zip(bi, fi)) <= 1e-13


def _breakdown_files(tmp_path):
    # rank-3 A: the Krylov space is exhausted after 3 vectors
    c = np.array([0.6, 0.7, 0.8, 0, 0, 0, 0, 0])
    d = sine_orthogonal(8)
    write_matrix_market(CsrMatrix.from_dense(c[:, None] * d), tmp_path / "a.mtx")
    write_matrix_market(CsrMatrix.from_dense(np.sqrt(1 - c * c)[:, None] * d), tmp_path / "l.mtx")
    return ["--pair-a", str(tmp_path / "a.mtx"), "--pair-l", str(tmp_path / "l.mtx")]


def test_breakdown_exit_code(tmp_path, capsys):
    files = _breakdown_files(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["run", *files, "--steps", "6", "--out", str(out)]) == 3
    err = capsys.readouterr().err
    assert "breakdown at step 3" in err
    # partial artifacts are flushed
    assert len(_read(out / "diag.csv")) == 2
    assert (out / "reorth.csv").exists()
    assert cli.main(["compare", *files, "--steps", "6", "--out", str(out)]) == 3


def test_io_errors(tmp_path, capsys):
    missing = ["--pair-a", str(tmp_path / "none_A.mtx"), "--pair-l", str(tmp_path / "none_L.mtx")]
    assert cli.main(["run", *missing, "--steps", "3", "--out", str(tmp_path)]) == 5
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
    assert cli.main(["run", "--pair-a", str(bad), "--pair-l", str(bad), "--steps", "3"]) == 5
    assert "line 3" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--builtin", "cs800", "--steps", "3", "--out", str(blocker / "sub")]) == 5
    assert cli.main(["gen", "deriv:4", "--out", str(blocker)]) == 5


def test_mismatched_pair_is_usage_error(tmp_path):
    write_matrix_market(CsrMatrix.from_dense(np.eye(3)), tmp_path / "a.mtx")
    write_matrix_market(CsrMatrix.from_dense(np.eye(4)), tmp_path / "l.mtx")
    argv = ["run", "--pair-a", str(tmp_path / "a.mtx"), "--pair-l", str(tmp_path / "l.mtx"), "--steps", "2"]
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def failing(*args, **kwargs):
        raise LsqrConvergenceError(np.zeros(3), 1.0, 12)

    monkeypatch.setattr(cli, "jbd_run", failing)
    argv = ["run", "--builtin", "cs800", "--projector", "lsqr", "--steps", "3", "--out", str(tmp_path)]
    assert cli.main(argv) == 4


def test_lsqr_run(tmp_path):
    argv = ["run", "--builtin", "cs800", "--projector", "lsqr", "--steps", "10", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    rows = _read(tmp_path / "diag.csv")
    assert len(rows) == 10 and rows[0]["ek"] == "nan"


def test_ill_conditioned_warning(tmp_path, capsys):
    n = 300
    c = np.concatenate([np.linspace(0.9, 0.3, n - 10), np.logspace(-4, -7, 10)])
    pair, _ = make_cs_pair(n, c)
    write_matrix_market(pair.a, tmp_path / "a.mtx")
    write_matrix_market(pair.l, tmp_path / "l.mtx")
    files = ["--pair-a", str(tmp_path / "a.mtx"), "--pair-l", str(tmp_path / "l.mtx")]
    assert cli.main(["run", *files, "--steps", "60", "--out", str(tmp_path / "o")]) == 0
    assert "swapping" in capsys.readouterr().err
    swapped = ["--pair-a", files[3], "--pair-l", files[1]]
    assert cli.main(["run", *swapped, "--steps", "60", "--out", str(tmp_path / "s")]) == 0
    assert "swapping" not in capsys.readouterr().err
