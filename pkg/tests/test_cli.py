import csv
import dataclasses
import json

import numpy as np
import pytest

from solarcast.cli import main
from solarcast.dataio import TimeFrame


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ingested(synthetic_paths, tmp_path_factory):
    out = tmp_path_factory.mktemp("ingest")
    pv, weather = synthetic_paths
    assert run("ingest", "--pv", pv, "--weather", weather, "--out", out) == 0
    return out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_ingest_outputs(ingested):
    for h in ("30min", "1h", "4h"):
        assert (ingested / f"frame_{h}.csv").exists()
    log = json.loads((ingested / "ingest_log.json").read_text())
    assert log["pv"]["rows_read"] > 0 and set(log["frames"]) == {"30min", "1h", "4h"}
    assert log["frames"]["1h"]["meter_resets"] >= 0


def test_ingest_single_horizon(synthetic_paths, tmp_path):
    pv, weather = synthetic_paths
    assert run("ingest", "--pv", pv, "--weather", weather, "--horizon", "4h", "--out", tmp_path) == 0
    assert sorted(p.name for p in tmp_path.glob("frame_*.csv")) == ["frame_4h.csv"]


def test_missing_weather_file(synthetic_paths, tmp_path, capsys):
    pv, _ = synthetic_paths
    missing = tmp_path / "nope.csv"
    assert run("ingest", "--pv", pv, "--weather", missing, "--out", tmp_path) == 2
    assert str(missing) in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert run("ingest", "--out", tmp_path) == 2
    assert run("train", "--model", "lstm", "--out", tmp_path) == 2
    assert run("train", "--n-priors", "7", "--out", tmp_path) == 2
    assert run("train", "--data", tmp_path, "--out", tmp_path) == 2  # no frame file


def test_analyze_outputs(ingested, tmp_path):
    assert run("analyze", "--data", ingested, "--out", tmp_path) == 0
    for name in ("correlation.csv", "importance.csv", "skewness.json", "outliers.json"):
        assert (tmp_path / name).exists(), name
    imp = rows(tmp_path / "importance.csv")
    header = rows(ingested / "frame_1h.csv")[0]
    assert len(imp) == len(header) - 2 + 2 + 1  # weather, month and hour, one prior
    corr = rows(tmp_path / "correlation.csv")
    assert set(corr[0]) == {"feature_a", "feature_b", "r"}


def test_analyze_symmetric_target_has_no_skew(synthetic_frames, tmp_path):
    af = synthetic_frames[TimeFrame.ONE_HOUR]
    n = len(af) - len(af) % 24
    phase = 2 * np.pi * np.arange(n) / 24
    sym = dataclasses.replace(af, timestamps=af.timestamps[:n], features=af.features[:n],
                              target=2 + np.sin(phase))
    sym.to_csv(tmp_path / "frame_1h.csv")
    assert run("analyze", "--data", tmp_path, "--out", tmp_path) == 0
    skew = json.loads((tmp_path / "skewness.json").read_text())
    assert abs(skew["raw"]) < 1e-6


def test_train_and_evaluate(ingested, tmp_path):
    assert run("train", "--data", ingested, "--model", "knn", "--features", "reduced",
               "--out", tmp_path) == 0
    for name in ("model.json", "metrics.json", "metrics_table.csv", "scatter.csv"):
        assert (tmp_path / name).exists(), name
    trained = json.loads((tmp_path / "metrics.json").read_text())
    assert trained["model"] == "knn" and trained["features"] == "reduced"
    assert trained["metrics"]["r2"] > 0.8

    ev_dir = tmp_path / "eval"
    assert run("evaluate", "--data", ingested, "--model-file", tmp_path / "model.json",
               "--out", ev_dir) == 0
    again = json.loads((ev_dir / "metrics.json").read_text())
    assert again["metrics"] == trained["metrics"]


def test_evaluate_schema_mismatch(ingested, tmp_path):
    assert run("train", "--data", ingested, "--model", "knn", "--out", tmp_path) == 0
    assert run("evaluate", "--data", ingested, "--n-priors", "3", "--out", tmp_path) == 3


def test_cv_output(ingested, tmp_path):
    assert run("cv", "--data", ingested, "--model", "knn", "--folds", "4", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "cv.json").read_text())
    assert len(doc["scores"]) == 4 and doc["k"] == 4
    assert run("cv", "--data", ingested, "--folds", "1", "--out", tmp_path) == 2


def test_ablate_single_model(ingested, tmp_path):
    assert run("ablate", "--data", ingested, "--model", "knn", "--out", tmp_path) == 0
    table = rows(tmp_path / "ablation.csv")
    assert len(table) == 3 * 7
    assert {r["n_priors"] for r in table} == {str(k) for k in range(7)}


def test_seed_from_environment(ingested, tmp_path, monkeypatch):
    monkeypatch.setenv("SOLARCAST_SEED", "7")
    assert run("train", "--data", ingested, "--model", "knn", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "metrics.json").read_text())["seed"] == 7
    monkeypatch.setenv("SOLARCAST_SEED", "seven")
    assert run("train", "--data", ingested, "--model", "knn", "--out", tmp_path) == 2


def test_outputs_do_not_depend_on_jobs(ingested, tmp_path):
    outs = []
    for jobs in (1, 3, 1):
        out = tmp_path / f"jobs{jobs}_{len(outs)}"
        assert run("train", "--data", ingested, "--model", "rf", "--jobs", jobs, "--out", out) == 0
        outs.append(out)
    for name in ("metrics.json", "model.json", "scatter.csv"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:]), name
