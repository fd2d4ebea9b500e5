import csv
import json

import numpy as np
import pytest
import yaml

from streamdro.benchmark import TIME_COLUMNS, BenchmarkConfig, apply_overrides, read_metrics, write_metrics
from streamdro.cli import main

TOY = {"portfolio": {"d": 4, "gamma": 2, "T": 20, "solve_every": 10, "repetitions": 3, "K": 3,
                     "N_val": 40, "N_test": 40}}


@pytest.fixture
def toy_cfg(tmp_path):
    p = tmp_path / "toy.yaml"
    p.write_text(yaml.safe_dump(TOY))
    return p


def _strip_times(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [{k: v for k, v in r.items() if k not in TIME_COLUMNS} for r in rows]


def test_run_twice_identical(tmp_path, toy_cfg):
    for name in ("a", "b"):
        assert main(["run", "--config", str(toy_cfg), "--seed", "7", "--out-dir", str(tmp_path / name)]) == 0
    a, b = _strip_times(tmp_path / "a/metrics.csv"), _strip_times(tmp_path / "b/metrics.csv")
    assert a == b and len(a) == 3 * 3 * 20
    manifest = json.loads((tmp_path / "a/manifest.json").read_text())
    assert manifest["config"]["seed"] == 7


def test_report_percentiles_bracket_mean(tmp_path, toy_cfg, capsys):
    out = tmp_path / "run"
    main(["run", "--config", str(toy_cfg), "--methods", "compressed,saa", "--out-dir", str(out)])
    assert main(["report", "--metrics", str(out / "metrics.csv"), "--out-dir", str(tmp_path / "rep")]) == 0
    with open(tmp_path / "rep/plotdata/certificate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["method"] for r in rows} == {"compressed", "saa"}
    # with three repetitions the interpolated quartiles always bracket the mean
    for r in rows:
        lo, mid, hi = float(r["p25"]), float(r["mean"]), float(r["p75"])
        assert lo - 1e-12 * abs(mid) <= mid <= hi + 1e-12 * abs(mid)
    conf = list(csv.DictReader(open(tmp_path / "rep/plotdata/confidence.csv")))
    assert all(0 <= float(r["confidence"]) <= 1 for r in conf)


def test_elbow_two_blobs(tmp_path, capsys):
    rng = np.random.default_rng(0)
    data = np.vstack([rng.normal(size=(20, 2)) * 0.05, rng.normal(size=(20, 2)) * 0.05 + 5])
    p = tmp_path / "blobs.csv"
    np.savetxt(p, data, delimiter=",", header="a,b", comments="")
    assert main(["elbow", "--grid", "1..10", "--data", str(p)]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "K=2"


def test_cross_validate_small_grid(tmp_path, toy_cfg):
    assert main(["cross-validate", "--config", str(toy_cfg), "--reps", "1", "--grid", "0.0025:0.025,0.05:0",
                 "--out-dir", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "cross_validation.json").read_text())
    assert len(res["scores"]) == 2 and res["label"] in res["scores"]


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("bogus_key: 1\n")
    assert main(["run", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    for nested in ("schedule: {e: 1}\n", "portfolio: {dim: 3}\n", "clustering: {algorithm: online, k: 3}\n"):
        bad.write_text(nested)
        assert main(["run", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
        assert "unknown" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_metrics_roundtrip(tmp_path):
    rows = [{"rep": 0, "method": "saa", "t": 1, "n_t": 6, "K_t": 6, "solved": 1, "status": "optimal",
             "carried": 0, "nodes": 3, "eps": 0.1 + 0.2, "value": float("nan"), "certificate": 1e-17}]
    write_metrics(rows, tmp_path / "m.csv")
    back = read_metrics(tmp_path / "m.csv")[0]
    assert back["eps"] == 0.1 + 0.2 and back["certificate"] == 1e-17 and np.isnan(back["value"])
    assert back["method"] == "saa" and back["t"] == 1


def test_overrides_keep_K_in_sync():
    cfg = apply_overrides(BenchmarkConfig.for_scale("desk"), {"portfolio": {"K": 5}})
    assert cfg.clustering["compressed"].K == 5
    cfg = BenchmarkConfig.for_scale("paper")
    assert cfg.portfolio.d == 50 and cfg.portfolio.T == 2000
