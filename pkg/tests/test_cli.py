import io
import json

import numpy as np
import pytest

from qsurf import cli
from qsurf import dataset as ds
from qsurf import harness as H
from qsurf.errors import SolverError
from qsurf.models import Hyperparams


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


@pytest.fixture
def data_csv(tmp_path):
    p = tmp_path / "d.csv"
    assert run("gen-data", "quadratic", "--m", 40, "--seed", 7, "--out", p)[0] == 0
    return p


def test_gen_data_is_deterministic(tmp_path):
    for gen in ("quadratic", "normal", "linear"):
        a, b = tmp_path / f"{gen}a.csv", tmp_path / f"{gen}b.csv"
        assert run("gen-data", gen, "--m", 100, "--seed", 7, "--out", a)[0] == 0
        assert run("gen-data", gen, "--m", 100, "--seed", 7, "--out", b)[0] == 0
        assert a.read_bytes() == b.read_bytes()
    d = ds.load_csv(tmp_path / "quadratica.csv", "y", "1")
    assert d.class_counts() == (100, 100)
    code, text = run("gen-data", "normal", "--m", 3, "--n", 4)
    assert code == 0 and text.splitlines()[0] == "x1,x2,x3,x4,y"


def test_train_ls_writes_model(data_csv, tmp_path):
    out = tmp_path / "model.json"
    code, _ = run("train", "--model", "ls-l1-u-sqssvm", "--data", data_csv, "--label", "y",
                  "--mu", 65536, "--lambda", 4, "--cu", 16, "--eps", 0.05, "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "ls-l1-u-sqssvm" and doc["hyperparams"]["c_u"] == 16.0


def test_eps_defaults_depend_on_kind(data_csv, tmp_path):
    run("train", "--model", "ls-l1-u-sqssvm", "--data", data_csv, "--out", tmp_path / "a.json")
    run("train", "--model", "u-sqssvm", "--data", data_csv, "--out", tmp_path / "b.json")
    assert json.loads((tmp_path / "a.json").read_text())["hyperparams"]["eps"] == 0.0
    assert json.loads((tmp_path / "b.json").read_text())["hyperparams"]["eps"] == 0.01


@pytest.mark.parametrize("kind", ["sqssvm", "l1-sqssvm"])
def test_predict_then_accuracy_reproduces_cv_fold(tmp_path, kind):
    data = ds.synth_quadratic(40, noise=0.3, separable=False, rng_seed=2)
    h = Hyperparams(2.0 ** 6, 0.5 if kind == "l1-sqssvm" else 0.0)
    res = H.cross_validate(kind, data, h, 5, 0)
    fold = res.folds[2]
    tr, te = tmp_path / "tr.csv", tmp_path / "te.csv"
    tr.write_text(ds.dataset_to_csv(data.subset(fold.train_idx)))
    te.write_text(ds.dataset_to_csv(data.subset(fold.test_idx)))
    model, preds = tmp_path / "m.json", tmp_path / "p.csv"
    assert run("train", "--model", kind, "--data", tr, "--mu", h.mu, "--lambda", h.lam,
               "--out", model)[0] == 0
    assert run("predict", "--model", model, "--data", te, "--label", "y", "--out", preds)[0] == 0
    code, text = run("accuracy", "--pred", preds, "--data", te)
    assert code == 0
    assert float(text) == pytest.approx(fold.accuracy, abs=1e-9)


def test_universum_subcommand(data_csv, tmp_path):
    out = tmp_path / "u.csv"
    assert run("universum", "--data", data_csv, "--fraction", 0.1, "--seed", 1, "--out", out)[0] == 0
    pts = ds.read_points_csv(out)
    assert pts.shape == (4, 2)
    model = tmp_path / "m.json"
    assert run("train", "--model", "u-sqssvm", "--data", data_csv, "--universum", out,
               "--mu", 1024, "--cu", 2, "--out", model)[0] == 0


def test_validate_config():
    ok = cli.RunConfig("train", hyperparams=Hyperparams(1.0, 0.0, 0.0, 0.0), k=5)
    assert cli.validate_config(ok) == []
    one = cli.validate_config(cli.RunConfig("train", hyperparams=Hyperparams(0.0)))
    assert len(one) == 1 and "--mu" in one[0]
    two = cli.validate_config(cli.RunConfig("cv", hyperparams=Hyperparams(1.0, -1.0), k=1))
    assert len(two) == 2 and any("--lambda" in p for p in two) and any("--k" in p for p in two)


def test_usage_errors_exit_1(data_csv, capsys):
    assert run("bogus")[0] == cli.EXIT_USAGE
    assert run("train", "--model", "sqssvm")[0] == cli.EXIT_USAGE
    assert run("cv", "--model", "nope", "--data", data_csv, "--out-dir", "x")[0] == cli.EXIT_USAGE
    code, _ = run("train", "--model", "sqssvm", "--data", data_csv, "--mu", 0, "--eps", -1,
                  "--out", "m.json")
    assert code == cli.EXIT_USAGE
    err = capsys.readouterr().err
    assert "--mu" in err and "--eps" in err


def test_data_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\n1,1\nnan,-1\n")
    assert run("train", "--model", "sqssvm", "--data", bad, "--out", tmp_path / "m")[0] == 2
    assert run("train", "--model", "sqssvm", "--data", tmp_path / "none.csv",
               "--out", tmp_path / "m")[0] == 2
    assert run("predict", "--model", tmp_path / "none.json", "--data", bad)[0] == 2


def test_solver_failure_exits_3(data_csv, tmp_path, monkeypatch):
    def boom(*a, **kw):
        raise SolverError("singular")

    monkeypatch.setattr(cli, "train_model", boom)
    assert run("train", "--model", "sqssvm", "--data", data_csv,
               "--out", tmp_path / "m.json")[0] == cli.EXIT_SOLVER


def test_dump_qp(data_csv, tmp_path):
    dump = tmp_path / "qp.txt"
    assert run("train", "--model", "l1-u-sqssvm", "--data", data_csv, "--lambda", 1, "--cu", 1,
               "--out", tmp_path / "m.json", "--dump-qp", dump)[0] == 0
    assert "# Q" in dump.read_text()
    assert run("train", "--model", "ls-l1-u-sqssvm", "--data", data_csv,
               "--out", tmp_path / "m.json", "--dump-qp", dump)[0] == cli.EXIT_USAGE


def test_reports_are_idempotent(data_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("cv", "--model", "u-sqssvm", "--data", data_csv, "--mu", 1024, "--cu", 4,
                   "--out-dir", d)[0] == 0
        assert run("grid", "--model", "l1-sqssvm", "--data", data_csv, "--mu-grid", "0,10",
                   "--lambda-grid", "zero,2", "--k", 3, "--out-dir", d)[0] == 0
        assert run("sweep-colormap", "--model", "u-sqssvm", "--data", data_csv, "--mu", 1024,
                   "--cu-grid", "0,2", "--eps-grid=-4,-2", "--k", 3, "--out-dir", d)[0] == 0
        assert run("sweep-urate", "--model", "u-sqssvm", "--data", data_csv, "--mu", 1024,
                   "--cu", 4, "--rates", "0.1,0.3", "--repeats", 2, "--k", 3,
                   "--out-dir", d)[0] == 0
    for name in ("cv_table.csv", "grid_table.csv", "colormap.csv", "urate_curve.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "timings.csv").exists()
    grid = H.Table.from_csv((a / "grid_table.csv").read_text(), H.GRID_TYPES)
    assert len(grid.rows) == 4
    cmap = H.Table.from_csv((a / "colormap.csv").read_text(), H.COLORMAP_TYPES)
    assert [r[:2] for r in cmap.rows] == [(1.0, 0.0625), (1.0, 0.25), (4.0, 0.0625), (4.0, 0.25)]


def test_exponent_parser():
    assert cli._exponents("-2:1") == [-2, -1, 0, 1]
    assert cli._exponents("0:8:4") == [0, 4, 8]
    assert cli._exponents("zero,3") == [None, 3]
    with pytest.raises(Exception):
        cli._exponents("a:b")


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    out = tmp_path / "d.csv"
    r = subprocess.run([sys.executable, "-m", "qsurf", "gen-data", "linear", "--m", "5",
                        "--out", str(out)], capture_output=True)
    assert r.returncode == 0 and out.exists()
    r = subprocess.run([sys.executable, "-m", "qsurf", "nope"], capture_output=True)
    assert r.returncode == 1 and b"usage" in r.stderr
