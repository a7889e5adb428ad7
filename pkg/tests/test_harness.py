import csv
import json
import os

import numpy as np
import pytest

from stoplab.errors import ConfigError
from stoplab.harness import (CHECK_NAMES, load_config, parse_config,
                             run_experiment)
from stoplab.cli import main


def _base_raw(tmp_path, **over):
    raw = {
        "objective": {"kind": "quadratic", "diag": [1.0, 2.0]},
        "noise": {"kind": "gaussian-isotropic", "sigma": 1.0},
        "schedule": {"variant": "theorem-main"},
        "K": 50,
        "R": 8,
        "base_seed": 11,
        "x0": [2.0, -1.0],
        "betas": [0.05],
        "rules": [],
        "checks": ["descent", "decomposition", "coverage"],
        "output_dir": str(tmp_path / "out"),
        "options": {"csv_trajectories": 2},
    }
    raw.update(over)
    return raw


def test_parse_config_happy_path(tmp_path):
    cfg = parse_config(_base_raw(tmp_path))
    assert cfg.K == 50 and cfg.R == 8
    assert cfg.objective.dim == 2
    assert cfg.checks == ("descent", "decomposition", "coverage")
    assert cfg.options["csv_trajectories"] == 2
    # unspecified options fall back to defaults
    assert cfg.options["ville_bound"] == 0.1


def test_parse_config_collects_every_violation(tmp_path):
    raw = _base_raw(
        tmp_path,
        K=0,
        R=-3,
        betas=[0.7],
        checks=["descent", "nonsense"],
    )
    raw["objective"] = {"kind": "mystery"}
    raw["bogus_key"] = 1
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    text = "\n".join(exc.value.problems)
    # one pass reports all of them, not just the first
    assert len(exc.value.problems) >= 5
    for frag in ("K", "R", "beta", "nonsense", "mystery", "bogus_key"):
        assert frag in text


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_run_experiment_smoke_artifacts(tmp_path):
    cfg = parse_config(_base_raw(tmp_path))
    rep = run_experiment(cfg)
    assert rep.passed
    outdir = tmp_path / "out"
    doc = json.loads((outdir / "report.json").read_text())
    assert doc["schema_version"] == "1"
    assert doc["pass"] is True
    names = [c["name"] for c in doc["checks"]]
    assert set(names) >= {"descent", "decomposition", "coverage"}
    assert all(n in CHECK_NAMES for n in names)
    # coverage rows exist for the sup statement and the adversarial rule
    with open(outdir / "coverage.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    kinds = {r["rule"] for r in rows}
    assert {"sup", "adversarial"} <= kinds
    for r in rows:
        assert 0.0 <= float(r["frequency"]) <= 1.0


def test_trajectory_csv_schema_and_roundtrip(tmp_path):
    cfg = parse_config(_base_raw(tmp_path))
    run_experiment(cfg)
    path = tmp_path / "out" / "trajectory_0.csv"
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == ["k", "fgap", "E", "S", "M", "residual_lemma",
                      "residual_decomp"]
    assert len(rows) == cfg.K + 1
    # row k = 0 has no step residuals; later rows round-trip exactly via repr
    assert rows[0][0] == "0" and rows[0][5] == "" and rows[0][6] == ""
    for row in rows[1:]:
        for field in row[1:]:
            v = float(field)
            assert repr(v) == field
    assert not (tmp_path / "out" / f"trajectory_{cfg.R - 1}.csv").exists()


def test_worker_count_does_not_change_results(tmp_path):
    old = os.environ.get("STOPLAB_WORKERS")
    try:
        os.environ["STOPLAB_WORKERS"] = "1"
        run_experiment(parse_config(_base_raw(tmp_path / "w1")))
        os.environ["STOPLAB_WORKERS"] = "3"
        run_experiment(parse_config(_base_raw(tmp_path / "w3")))
    finally:
        if old is None:
            os.environ.pop("STOPLAB_WORKERS", None)
        else:
            os.environ["STOPLAB_WORKERS"] = old
    for name in ("trajectory_0.csv", "trajectory_1.csv", "coverage.csv"):
        a = (tmp_path / "w1" / "out" / name).read_bytes()
        b = (tmp_path / "w3" / "out" / name).read_bytes()
        assert a == b, name
    da = json.loads((tmp_path / "w1" / "out" / "report.json").read_text())
    db = json.loads((tmp_path / "w3" / "out" / "report.json").read_text())
    assert da["checks"] == db["checks"]
    assert da["summary"] == db["summary"]


def test_rules_appear_in_coverage(tmp_path):
    raw = _base_raw(tmp_path)
    raw["rules"] = [
        {"kind": "fixed-k", "k_max": 10},
        {"kind": "iterate-delta", "k_max": 50, "epsilon": 1e-6},
    ]
    run_experiment(parse_config(raw))
    with open(tmp_path / "out" / "coverage.csv", newline="") as fh:
        kinds = {r["rule"] for r in csv.DictReader(fh)}
    assert {"fixed-k", "iterate-delta"} <= kinds


def test_constants_check_writes_table(tmp_path):
    raw = _base_raw(tmp_path, checks=["constants"])
    rep = run_experiment(parse_config(raw))
    assert rep.passed
    with open(tmp_path / "out" / "constants.csv", newline="") as fh:
        (row,) = list(csv.DictReader(fh))
    assert float(row["gamma1_lo"]) <= float(row["gamma1_hi"])
    assert float(row["gamma2_lo"]) <= float(row["gamma2_hi"])
    assert float(row["C1"]) > 0.0 and float(row["C2"]) > 0.0


def test_cli_run_and_verify(tmp_path, capsys):
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps(_base_raw(tmp_path)))
    assert main(["run", str(cfgpath)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] descent" in out and "overall: PASS" in out
    assert main(["verify", "descent", str(cfgpath)]) == 0
    assert main(["report", str(tmp_path / "out")]) == 0


def test_cli_constants_and_sweep(tmp_path, capsys):
    assert main(["constants", "theorem-main", "--sigma", "1.0"]) == 0
    assert "gamma1 in [" in capsys.readouterr().out
    raw = _base_raw(tmp_path, checks=["descent"], K=20, R=4)
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps(raw))
    assert main(["sweep", str(cfgpath), "--param", "noise.sigma",
                 "--values", "0.5", "1.0"]) == 0
    assert main(["sweep", str(cfgpath), "--param", "no.such.path",
                 "--values", "1"]) == 2


def test_cli_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "config error" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_base_raw(tmp_path, K=0)))
    assert main(["run", str(bad)]) == 2
