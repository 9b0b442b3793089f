import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from countyrisk.cli import main
from countyrisk.config import RunConfig
from countyrisk.errors import InvalidValue
from countyrisk.synth import write_synthetic

TINY_GRIDS = {
    "rf": {"n_estimators": [8], "min_samples_leaf": [5]},
    "gbm": {"n_estimators": [15], "learning_rate": [0.1], "max_depth": [2]},
}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    paths = write_synthetic(d, n=240, seed=2)
    cfg = dict(paths, grids=TINY_GRIDS, cv_folds=3, explain_max_rows=60, top_k=4)
    (d / "config.json").write_text(json.dumps(cfg))
    return d


def run_cli(*args):
    return main([str(a) for a in args])


def numeric_outputs(out: Path):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "run-manifest.json"}


def test_report_outputs(data, tmp_path):
    out = tmp_path / "o"
    assert run_cli("report", "--config", data / "config.json", "--out", out) == 0
    for rel in ("ingest/summary.json", "preprocess/preprocess_report.json", "preprocess/split.json",
                "hotspots/lc_mortality_hotspots.geojson", "hotspots/lc_mortality_hotspots.csv",
                "models/rf.json", "models/gbm.json", "models/lr.json", "models/comparison.csv",
                "models/cv_rf.json", "explain/ranking_rf.csv", "explain/summary_rf.csv",
                "explain/rank_correlation.json", "run-manifest.json"):
        assert (out / rel).is_file(), rel
    rows = list(csv.reader(open(out / "models/comparison.csv")))
    assert rows[0] == ["learner", "r2", "rmse", "mae", "n_test"]
    assert [r[0] for r in rows[1:]] == ["rf", "gbm", "lr"]
    manifest = json.loads((out / "run-manifest.json").read_text())
    assert manifest["command"] == "report" and manifest["seed"] == 42
    assert len(manifest["inputs"]["features"]["sha256"]) == 64
    summary = list(csv.reader(open(out / "explain/summary_rf.csv")))
    assert len(summary) == 1 + 4 * 60


def test_report_deterministic_across_runs_and_threads(data, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("report", "--config", data / "config.json", "--out", a, "--threads", 1) == 0
    assert run_cli("report", "--config", data / "config.json", "--out", b, "--threads", 0) == 0
    assert numeric_outputs(a) == numeric_outputs(b)


def test_stepwise_equals_report(data, tmp_path):
    whole, steps = tmp_path / "whole", tmp_path / "steps"
    assert run_cli("report", "--config", data / "config.json", "--out", whole) == 0
    for cmd in ("ingest", "preprocess", "hotspots", "train", "explain"):
        assert run_cli(cmd, "--config", data / "config.json", "--out", steps) == 0
    assert numeric_outputs(whole) == numeric_outputs(steps)


def test_seed_flag_changes_split(data, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, seed in ((a, 1), (b, 2)):
        assert run_cli("ingest", "--config", data / "config.json", "--out", out) == 0
        assert run_cli("preprocess", "--config", data / "config.json", "--out", out, "--seed", seed) == 0
    assert (a / "preprocess/split.json").read_text() != (b / "preprocess/split.json").read_text()


def test_missing_centroids_exit_1(data, tmp_path, capsys):
    code = run_cli("ingest", "--features", data / "features.csv", "--centroids", tmp_path / "nope.csv",
                   "--out", tmp_path / "o")
    assert code == 1
    err = capsys.readouterr().err
    assert "nope.csv" in err and err.startswith("error [dataset]")


def test_step_out_of_order_exit_1(data, tmp_path, capsys):
    assert run_cli("train", "--config", data / "config.json", "--out", tmp_path / "o") == 1
    assert "preprocess" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"sede": 1}')
    assert run_cli("report", "--config", tmp_path / "c.json") == 1
    assert "sede" in capsys.readouterr().err


def test_bad_csv_exit_1(data, tmp_path, capsys):
    bad = tmp_path / "f.csv"
    text = (data / "features.csv").read_text().splitlines()
    cells = text[3].split(",")
    cells[5] = "abc"
    text[3] = ",".join(cells)
    bad.write_text("\n".join(text) + "\n")
    code = run_cli("report", "--config", data / "config.json", "--features", bad, "--out", tmp_path / "o")
    assert code == 1
    assert "line 4" in capsys.readouterr().err


def test_model_error_exit_2(data, tmp_path, capsys):
    cfg = json.loads((data / "config.json").read_text())
    cfg["preprocess"] = {"knn_k": 10_000}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run_cli("report", "--config", tmp_path / "c.json", "--out", tmp_path / "o") == 2
    assert capsys.readouterr().err.startswith("error [preprocess]")


def test_synth_subcommand(tmp_path):
    assert run_cli("synth", "--out", tmp_path / "s", "--n", 50, "--seed", 1) == 0
    assert (tmp_path / "s" / "features.csv").read_text().count("\n") == 51


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "countyrisk.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "report" in proc.stdout


def test_config_defaults_and_validation():
    c = RunConfig()
    assert (c.preprocess.knn_k, c.preprocess.max_missing_per_county, c.test_fraction, c.cv_folds,
            c.seed, c.top_k, c.weights) == (20, 5, 0.25, 5, 42, 6, "knn:8")
    with pytest.raises(InvalidValue):
        RunConfig(weights="rook")
    with pytest.raises(InvalidValue):
        RunConfig.from_dict({"learners": ["svm"]})
    assert RunConfig.from_dict(c.to_dict()).to_dict() == c.to_dict()
