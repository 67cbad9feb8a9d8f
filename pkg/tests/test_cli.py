import math

import numpy as np
import yaml

from sagebench.channel import (
    load_bundled_scenario,
    load_channel,
    save_scenario,
)
from sagebench.cli import main


def write_scenario(tmp_path, number=3):
    spec, geom = load_bundled_scenario(number)
    path = tmp_path / f"scenario{number}.yaml"
    save_scenario(path, spec, geom)
    return path


def test_synth_writes_channel(tmp_path):
    scenario = write_scenario(tmp_path)
    out = tmp_path / "chan.npz"
    rc = main(["synth", "--scenario", str(scenario), "--out", str(out), "--seed", "5"])
    assert rc == 0
    data = load_channel(out)
    assert data.matrix.shape == (64, 401)
    assert data.truth is not None and len(data.truth) == 3


def test_synth_subarray_and_estimate(tmp_path):
    scenario = write_scenario(tmp_path)
    chan = tmp_path / "chan.npz"
    assert main([
        "synth", "--scenario", str(scenario), "--out", str(chan),
        "--columns", "4", "--rotation", "1", "--seed", "2",
    ]) == 0
    data = load_channel(chan)
    assert data.matrix.shape == (16, 401)

    result = tmp_path / "res.yaml"
    rc = main([
        "estimate", "--channel", str(chan), "--scenario", str(scenario),
        "--out", str(result), "--max-cycles", "4",
        "--delay-range-ns", "12", "28",
    ])
    assert rc == 0
    doc = yaml.safe_load(result.read_text())
    assert len(doc["paths"]) == 3
    est_el = sorted(math.degrees(p["elevation"]) for p in doc["paths"])
    assert np.allclose(est_el, [72.0, 113.0, 122.0], atol=3.0)


def test_experiment_report_csv_and_plot(tmp_path):
    scenario_dir = tmp_path
    write_scenario(scenario_dir, 1)
    report = tmp_path / "report.yaml"
    csv_out = tmp_path / "cells.csv"
    rc = main([
        "experiment", "--scenario-dir", str(scenario_dir), "--scenarios", "1",
        "--schemes", "columns:4", "--seeds", "0,1", "--out", str(report),
        "--csv", str(csv_out),
    ])
    assert rc == 0
    assert yaml.safe_load(report.read_text())["kind"] == "sagebench-experiment-report"
    assert len(csv_out.read_text().strip().splitlines()) == 2

    plot = tmp_path / "errors.svg"
    rc = main(["report", "--report", str(report), "--plot", str(plot)])
    assert rc == 0
    assert plot.stat().st_size > 0


def test_experiment_partial_failure_exit_code(tmp_path):
    scenario_dir = tmp_path
    write_scenario(scenario_dir, 1)
    report = tmp_path / "report.yaml"
    rc = main([
        "experiment", "--scenario-dir", str(scenario_dir), "--scenarios", "1",
        "--schemes", "columns:4,rows:9", "--seeds", "0", "--out", str(report),
    ])
    assert rc == 2


def test_hard_error_exit_code(tmp_path):
    rc = main(["estimate", "--channel", str(tmp_path / "missing.npz")])
    assert rc == 1
