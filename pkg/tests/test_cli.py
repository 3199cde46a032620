import csv
import json

import numpy as np
import pytest

from reeblab.cli import emit_report, main, read_manifest

SMALL = {
    "census": {"T_max": 5.0, "window": [3.0, 5.0]},
    "orbits": {"seeds": 20, "min_orbits": 1, "min_one_sided": 1},
    "entropy": {"T_grid": [2.0, 3.0, 4.0, 5.0], "deltas": [0.2, 0.1], "seeds": 200, "orbit_count": 10},
}


@pytest.fixture
def config(tmp_path):
    def make(**extra):
        tree = dict(SMALL, output_dir=str(tmp_path / "out"), **extra)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(tree))
        return p

    return make


def manifest(tmp_path):
    return json.loads((tmp_path / "out" / "manifest.json").read_text())


def test_malformed_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["census", "--config", str(p)]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_unknown_key_exits_2(config):
    assert main(["census", "--config", str(config()), "--set", "surgery.nope=1"]) == 2


def test_unknown_subcommand_exits_2(config):
    assert main(["integrate", "--config", str(config())]) == 2


def test_missing_config_flag_exits_2():
    assert main(["census"]) == 2


def test_bad_thread_setting_exits_2(config, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "zero")
    assert main(["suspend", "--config", str(config())]) == 2


def test_suspend(config, tmp_path):
    assert main(["suspend", "--config", str(config())]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "necklaces.csv")))
    assert [int(r["k"]) for r in rows] == list(range(1, 21))
    run = manifest(tmp_path)["runs"][0]
    assert run["exit_code"] == 0 and run["checks"]["equivariance"] is True
    assert run["checks"]["necklace_growth"] is True
    assert {o["file"] for o in run["outputs"]} == {"necklaces.csv", "suspension_periods.csv", "suspension.jsonl"}


def test_demo_torus(config, tmp_path):
    assert main(["demo-torus", "--config", str(config())]) == 0
    lines = [json.loads(x) for x in open(tmp_path / "out" / "torus.jsonl")]
    assert lines[0]["class"] != lines[1]["class"]
    assert lines[2]["sup_distance"] < 0.05


def test_census_rows_follow_the_grid(config, tmp_path):
    assert main(["census", "--config", str(config()), "--set", "census.step=0.5"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "census_counts.csv")))
    assert len(rows) == 10
    assert [float(r["T"]) for r in rows] == list(np.arange(0.5, 5.01, 0.5))
    n = [int(r["N"]) for r in rows]
    assert n == sorted(n)
    assert sum(1 for _ in open(tmp_path / "out" / "census.jsonl")) == n[-1]


def test_surgery_without_twist_is_degenerate(config, tmp_path):
    assert main(["surgery", "--config", str(config(surgery={"q": 0}))]) == 0
    run = manifest(tmp_path)["runs"][0]
    assert run["summary"]["surgery"]["degenerate"].startswith("degenerate")
    assert run["checks"]["periods_match_census"] is True
    assert "degenerate" in (tmp_path / "out" / "report.md").read_text()


def test_entropy_artifacts(config, tmp_path):
    code = main(["entropy", "--config", str(config())])
    run = manifest(tmp_path)["runs"][0]
    assert code == (1 if False in run["checks"].values() else 0)
    rows = list(csv.DictReader(open(tmp_path / "out" / "entropy_grid.csv")))
    assert len(rows) == 2 * 4 * 2
    fits = [json.loads(x) for x in open(tmp_path / "out" / "entropy_fits.jsonl")]
    assert any("K_tilde_estimate" in f for f in fits)


def test_runs_are_deterministic_and_accumulate(config, tmp_path):
    cfg = str(config())
    main(["census", "--config", cfg])
    first = (tmp_path / "out" / "census.jsonl").read_bytes()
    main(["census", "--config", cfg])
    assert (tmp_path / "out" / "census.jsonl").read_bytes() == first
    runs = manifest(tmp_path)["runs"]
    assert len(runs) == 2 and runs[0]["outputs"] == runs[1]["outputs"]
    assert runs[0]["config_hash"] == runs[1]["config_hash"]
    assert {"reeblab", "numpy", "python"} <= set(runs[0]["versions"])
    assert "Run 2: census" in (tmp_path / "out" / "report.md").read_text()


def test_empty_manifest_gives_empty_report(tmp_path):
    assert emit_report({"runs": []}) == ""
    assert read_manifest(tmp_path) == {"runs": []}
