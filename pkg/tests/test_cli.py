import json
import math
from pathlib import Path

import numpy as np
import pytest

from selinf import cli
from selinf.errors import NumericalError
from selinf.serialize import parse_intervals_csv

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "fig_ci_comparison.json"


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    y = X @ [3.0, -2.0, 0, 0, 0] + rng.standard_normal(40)
    lines = ["a,b,c,d,e,y"] + [",".join(repr(float(v)) for v in [*row, t]) for row, t in zip(X, y)]
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def run(args):
    # argparse usage errors exit through SystemExit; fold them into the return code
    try:
        return cli.main([str(a) for a in args])
    except SystemExit as exc:
        return exc.code


def infer_args(data, out, *extra):
    return ["infer", "--data", data, "--response", "y", "--lambda", "3", "--out-dir", out,
            "--lambda-draws", "500", *extra]


def test_infer_writes_all_artifacts(data_csv, tmp_path):
    out = tmp_path / "run"
    assert run(infer_args(data_csv, out)) == 0
    for name in ("intervals.json", "intervals.csv", "intervals.png", "manifest.json"):
        assert (out / name).stat().st_size > 0
    doc = json.loads((out / "intervals.json").read_text())
    assert doc["model"][:2] == ["a", "b"]
    assert set(doc["baselines"]) == {"ols", "split"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["sigma"]["source"] == "estimated"
    assert len(manifest["inputs"]["sha256"]) == 64
    assert "elapsed_seconds" in manifest["timing"]
    assert "timing" not in doc["manifest"]


def test_user_sigma_recorded(data_csv, tmp_path):
    assert run(infer_args(data_csv, tmp_path, "--sigma", "1.0", "--no-plot")) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["sigma"] == {"source": "user", "sigma2": 1.0}


def test_csv_and_json_agree_at_full_precision(data_csv, tmp_path):
    assert run(infer_args(data_csv, tmp_path, "--no-plot", "--mode", "model")) == 0
    doc = json.loads((tmp_path / "intervals.json").read_text())
    rows = parse_intervals_csv((tmp_path / "intervals.csv").read_text())
    assert rows == doc["intervals"]


def test_auto_lambda_run_is_byte_identical_and_replayable(data_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["infer", "--data", data_csv, "--response", "y", "--lambda-draws", "500", "--seed", "3"]
    assert run(args + ["--out-dir", a]) == 0
    assert run(args + ["--out-dir", b]) == 0
    for name in ("intervals.json", "intervals.csv", "intervals.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    assert run(["replay", a / "manifest.json", "--out-dir", c]) == 0
    for name in ("intervals.json", "intervals.csv", "intervals.png"):
        assert (a / name).read_bytes() == (c / name).read_bytes()


def test_replay_refuses_changed_data(data_csv, tmp_path):
    out = tmp_path / "run"
    assert run(infer_args(data_csv, out, "--no-plot")) == 0
    data_csv.write_text(data_csv.read_text() + "0,0,0,0,0,0\n")
    assert run(["replay", out / "manifest.json"]) == 2


def test_null_model_exit_code_and_empty_artifact(data_csv, tmp_path, capsys):
    code = run(["infer", "--data", data_csv, "--response", "y", "--lambda", "1e9",
                "--out-dir", tmp_path])
    assert code == 4
    doc = json.loads((tmp_path / "intervals.json").read_text())
    assert doc["null_model"] is True and doc["intervals"] == []
    assert "no variables" in capsys.readouterr().err


def test_numerical_failure_exit_code(data_csv, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("forced")

    monkeypatch.setattr(cli, "infer", boom)
    assert run(infer_args(data_csv, tmp_path, "--no-plot")) == 3


@pytest.mark.parametrize("extra", [
    ["--alpha", "1.5"],
    ["--sigma", "-1"],
    ["--lambda", "banana"],
    ["--mode", "both"],
])
def test_invalid_arguments_exit_2(data_csv, tmp_path, extra):
    assert run(infer_args(data_csv, tmp_path, "--no-plot", *extra)) == 2


def test_malformed_csv_names_line_and_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,y\n1,2,3\n4,oops,6\n")
    assert run(["infer", "--data", bad, "--response", "y", "--out-dir", tmp_path]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "'b'" in err
    assert run(["infer", "--data", bad, "--response", "z", "--out-dir", tmp_path]) == 2
    assert run(["infer", "--data", tmp_path / "missing.csv", "--response", "y"]) == 2


def tnci_rows(capsys, *args):
    assert run(["tnci", *args]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x,lower,upper"
    return [tuple(map(float, line.split(","))) for line in lines[1:]]


def test_tnci_symmetry_and_widening_near_boundary(capsys):
    rows = tnci_rows(capsys, "--a", "-3", "--b", "3", "--x=-2.9,-1,0,1,2.9")
    by_x = {x: (lo, hi) for x, lo, hi in rows}
    for x in (2.9, 1.0):
        assert by_x[x][0] == pytest.approx(-by_x[-x][1], abs=1e-8)
        assert by_x[x][1] == pytest.approx(-by_x[-x][0], abs=1e-8)
    width = {x: hi - lo for x, (lo, hi) in by_x.items()}
    assert width[2.9] > width[0.0]
    assert by_x[0.0][0] == pytest.approx(-by_x[0.0][1], abs=1e-8)


def test_tnci_grid_and_artifacts(tmp_path, capsys):
    rows = tnci_rows(capsys, "--a", "0", "--b", "1", "--grid", "0:1:0.25")
    assert [r[0] for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert run(["tnci", "--a", "-1", "--b", "1", "--out-dir", tmp_path]) == 0
    assert (tmp_path / "tnci.csv").read_text().count("\n") == 100
    lo, hi = tnci_rows(capsys, "--a", "0", "--b", "1", "--x", "0")[0][1:]
    assert lo == -math.inf and hi == math.inf
    assert (tmp_path / "tnci.png").stat().st_size > 0


@pytest.mark.parametrize("args", [
    ["--a", "1", "--b", "1"],
    ["--a", "2", "--b", "1"],
    ["--a", "0", "--b", "1", "--x", "2"],
    ["--a", "0", "--b", "1", "--grid", "1:0:0.1"],
])
def test_tnci_rejects_bad_input(args):
    assert run(["tnci", *args]) == 2


def test_simulate_from_flags_and_replay(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--n", "10", "--p", "5", "--k", "2", "--amplitude", "1",
            "--lambda", "2", "--replications", "30", "--seed", "1"]
    assert run(args + ["--out-dir", a]) == 0
    report = json.loads((a / "report.json").read_text())
    assert report["valid"] is True and set(report["regimes"]) == {"main"}
    for name in ("replications.csv", "summary.csv", "pivots.png", "manifest.json"):
        assert (a / name).exists()
    assert run(["replay", a / "manifest.json", "--out-dir", b]) == 0
    for name in ("report.json", "replications.csv", "summary.csv", "pivots.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_bundled_config_with_override(tmp_path):
    assert run(["simulate", "--config", CONFIG, "--replications", "10", "--out-dir", tmp_path]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["regimes"]) == {"strong", "weak"}
    for regime in ("strong", "weak"):
        assert report["regimes"][regime]["config"]["replications"] == 10
        for suffix in ("replications.csv", "split.csv", "ci_comparison.png"):
            assert (tmp_path / f"{regime}_{suffix}").exists()
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("regime,lambda") and len(summary) == 3


def test_simulate_failure_budget_exit_code(tmp_path, monkeypatch):
    from selinf import simulation

    monkeypatch.setattr(simulation, "infer", lambda *a, **k: (_ for _ in ()).throw(NumericalError("x")))
    code = run(["simulate", "--n", "10", "--p", "5", "--k", "1", "--amplitude", "1",
                "--lambda", "2", "--replications", "20", "--out-dir", tmp_path, "--no-plot"])
    assert code == 3
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["valid"] is False and report["regimes"]["main"]["valid"] is False


def test_simulate_validation_errors(tmp_path):
    assert run(["simulate", "--out-dir", tmp_path]) == 2
    assert run(["simulate", "--n", "10", "--p", "5", "--replications", "0"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", "--config", bad]) == 2
    assert run(["simulate", "--config", tmp_path / "nope.json"]) == 2


def test_unknown_command_exit_2():
    assert run(["frobnicate"]) == 2
