import io
from pathlib import Path

import numpy as np
import pytest

from sdpcomp.cli import SWEEP_COLUMNS, main, read_pairs_csv, read_test_csv
from sdpcomp.core import validate_pair_dataset
from sdpcomp.model import Scorer
from sdpcomp.train_eval import REPORT_COLUMNS, TrialReport

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def _kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    code, out, _ = run("generate", "--pi-plus", 0.7, "--n-pairs", 10_000, "--n-test", 500, "--seed", 0, "--out-dir", d)
    assert code == 0
    return d, _kv(out)


def test_generate_similar_fraction(data):
    _, info = data
    assert 0.56 <= float(info["similar_fraction"]) <= 0.60
    assert int(info["n_S"]) + int(info["n_D"]) == 10_000


def test_generate_round_trip(data):
    d, _ = data
    pairs = read_pairs_csv(d / "pairs.csv")
    assert len(pairs) == 10_000
    validate_pair_dataset(pairs)
    raw = (d / "pairs.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"s,x0,xp0"
    assert (d / "test.csv").read_bytes().splitlines()[0] == b"y,x0"


def test_golden_files(tmp_path):
    code, _, _ = run("generate", "--pi-plus", 0.6, "--n-pairs", 6, "--n-test", 4, "--dim", 2, "--seed", 3,
                     "--rho-c", 0.2, "--out-dir", tmp_path)
    assert code == 0
    assert (tmp_path / "pairs.csv").read_bytes() == (GOLDEN / "pairs_d2.csv").read_bytes()
    assert (tmp_path / "test.csv").read_bytes() == (GOLDEN / "test_d2.csv").read_bytes()


def test_frozen_columns():
    assert ",".join(REPORT_COLUMNS) == (GOLDEN / "report_columns.txt").read_text().strip()
    assert ",".join(SWEEP_COLUMNS) == (GOLDEN / "sweep_columns.txt").read_text().strip()


def test_generate_bad_rate(tmp_path):
    code, out, err = run("generate", "--pi-plus", 0.7, "--n-pairs", 10, "--rho-s", 1.1, "--out-dir", tmp_path)
    assert code == 1 and out == "" and "rho-s" in err


def test_generate_deterministic(tmp_path):
    args = ["generate", "--pi-plus", 0.7, "--n-pairs", 300, "--n-test", 50, "--seed", 5, "--rho-s", 0.1]
    run(*args, "--out-dir", tmp_path / "a")
    run(*args, "--out-dir", tmp_path / "b")
    for name in ("pairs.csv", "test.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def _train(d, tmp, tag, *extra):
    code, out, err = run("train", "--pairs", d / "pairs.csv", "--out-model", tmp / f"{tag}.model",
                         "--out-report", tmp / f"{tag}.txt", "--epochs", 3, *extra)
    return code, out, err


def test_convex_one_equals_sd(data, tmp_path):
    d, _ = data
    assert _train(d, tmp_path, "sd", "--estimator", "sd", "--pi-plus", 0.7)[0] == 0
    assert _train(d, tmp_path, "cx", "--estimator", "convex", "--gamma", 1.0, "--pi-plus", 0.7)[0] == 0
    a = TrialReport.parse_kv((tmp_path / "sd.txt").read_text())
    b = TrialReport.parse_kv((tmp_path / "cx.txt").read_text())
    assert abs(float(a["final_risk"]) - float(b["final_risk"])) <= 1e-12


def test_estimated_prior(data, tmp_path):
    d, _ = data
    code, _, _ = _train(d, tmp_path, "est", "--estimate-prior", "ge")
    assert code == 0
    kv = TrialReport.parse_kv((tmp_path / "est.txt").read_text())
    assert 0.68 <= float(kv["pi_hat"]) <= 0.72
    assert kv["pi_plus"] == ""


def test_degenerate_prior_error(data, tmp_path):
    d, _ = data
    code, out, err = _train(d, tmp_path, "bad", "--estimator", "sdpc", "--pi-plus", 0.5)
    assert code == 2 and out == ""
    assert "undefined at pi_plus=0.5" in err


def test_prior_flags_exclusive(data, tmp_path):
    d, _ = data
    code, _, err = _train(d, tmp_path, "x", "--pi-plus", 0.7, "--estimate-prior", "ge")
    assert code == 1 and "not allowed" in err
    code, _, err = _train(d, tmp_path, "x", "--estimator", "convex", "--pi-plus", 0.7)
    assert code == 1 and "--gamma" in err


def test_missing_file(tmp_path):
    code, out, err = run("eval", "--model", tmp_path / "nope", "--test", tmp_path / "nope.csv")
    assert code == 2 and out == "" and err


def test_train_deterministic(data, tmp_path):
    d, _ = data
    for tag in ("a", "b"):
        _train(d, tmp_path, tag, "--estimator", "sdpc", "--correction", "abs", "--pi-plus", 0.7,
               "--arch", "mlp:4", "--test", d / "test.csv", "--seed", 2)
    assert (tmp_path / "a.model").read_bytes() == (tmp_path / "b.model").read_bytes()
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("wall_seconds")]
    assert strip(tmp_path / "a.txt") == strip(tmp_path / "b.txt")


def _write_test(path, X, y):
    lines = ["y," + ",".join(f"x{i}" for i in range(X.shape[1]))]
    lines += [f"{int(t)}," + ",".join(repr(float(v)) for v in x) for x, t in zip(X, y)]
    path.write_text("\n".join(lines) + "\n")


def test_eval_cases(tmp_path):
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    _write_test(tmp_path / "t.csv", X, [-1, -1, 1, 1])
    Scorer.linear(1).save(tmp_path / "zero.model")
    code, out, _ = run("eval", "--model", tmp_path / "zero.model", "--test", tmp_path / "t.csv")
    assert code == 0 and "accuracy=0.0000" in out and "auc=0.5000" in out
    Scorer(1, (), [1.0, 0.0]).save(tmp_path / "id.model")
    code, out, _ = run("eval", "--model", tmp_path / "id.model", "--test", tmp_path / "t.csv",
                       "--append", tmp_path / "rows.csv")
    assert "accuracy=1.0000" in out and "auc=1.0000" in out
    _write_test(tmp_path / "one.csv", X, [1, 1, 1, 1])
    code, out, _ = run("eval", "--model", tmp_path / "id.model", "--test", tmp_path / "one.csv",
                       "--append", tmp_path / "rows.csv")
    assert code == 0 and "auc=n/a" in out and "accuracy=0.5000" in out
    rows = (tmp_path / "rows.csv").read_text().splitlines()
    assert rows[0] == ",".join(REPORT_COLUMNS) and len(rows) == 3


def test_malformed_pair_file(tmp_path):
    (tmp_path / "p.csv").write_text("s,x0,xp0\n1,0.5\n")
    code, _, err = run("train", "--pairs", tmp_path / "p.csv", "--pi-plus", 0.7,
                       "--out-model", tmp_path / "m", "--out-report", tmp_path / "r")
    assert code == 2 and "expected 3 fields" in err


def _grid(path, **kw):
    import json

    base = {"estimators": ["sd", "pc"], "seeds": [0, 1], "n_pairs": 300, "n_test": 100, "epochs": 3}
    base.update(kw)
    path.write_text(json.dumps(base))
    return path


def test_sweep_rows_and_determinism(tmp_path):
    g = _grid(tmp_path / "grid.json")
    assert run("sweep", "--grid", g, "--out", tmp_path / "a.csv")[0] == 0
    assert run("sweep", "--grid", g, "--out", tmp_path / "b.csv")[0] == 0
    a = (tmp_path / "a.csv").read_text().splitlines()
    b = (tmp_path / "b.csv").read_text().splitlines()
    assert len(a) == 5 and a[0] == ",".join(SWEEP_COLUMNS)
    col = SWEEP_COLUMNS.index("wall_seconds")
    drop = lambda rows: [r.split(",")[:col] + r.split(",")[col + 1 :] for r in rows]
    assert drop(a) == drop(b)
    assert [r.split(",")[:2] for r in a[1:]] == [["0", "sd"], ["1", "sd"], ["0", "pc"], ["1", "pc"]]


def test_sweep_isolates_failing_cell(tmp_path):
    g = _grid(tmp_path / "grid.json", pi_plus=[0.5, 0.7], seeds=[0])
    code, out, _ = run("sweep", "--grid", g, "--out", tmp_path / "s.csv")
    assert code == 0 and "errors=1" in out
    rows = [r.split(",") for r in (tmp_path / "s.csv").read_text().splitlines()[1:]]
    errors = [r[-1] for r in rows]
    assert "DegeneratePrior" in errors[0]
    assert errors[1:] == ["", "", ""]


def test_sweep_bad_grid(tmp_path):
    (tmp_path / "g.json").write_text('{"colour": [1]}')
    code, _, err = run("sweep", "--grid", tmp_path / "g.json", "--out", tmp_path / "o.csv")
    assert code == 2 and "unknown grid keys" in err
