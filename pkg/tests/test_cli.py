import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from helpers import BUNDLE_CONFIG
from roiedge.cam import ClassWeights, save_class_weights
from roiedge.cli import main
from roiedge.config import RunConfig
from roiedge.tensor import Tensor, save_tensor


@pytest.fixture
def blob_setup(tmp_path):
    """Four-channel features where channel 0 is hot in three 2x2 blobs outside P5."""
    w = np.zeros((3, 4), dtype=np.float32)
    w[:, 0] = 1.0
    save_class_weights(ClassWeights(w), tmp_path / "w.tnsr")
    cfg = RunConfig().with_overrides(["extractor.channels=4", f'io.class_weights="{tmp_path}/w.tnsr"'])
    cfg.save(tmp_path / "cfg.json")
    data = np.zeros((4, 23, 40), dtype=np.float32)
    for y, x in [(18, 2), (19, 15), (18, 35)]:
        data[0, y : y + 2, x : x + 2] = 1.0
    save_tensor(Tensor(data), tmp_path / "hot.tnsr")
    save_tensor(Tensor(np.zeros_like(data)), tmp_path / "cold.tnsr")
    return tmp_path


def test_extract_three_blobs(blob_setup, capsys):
    d = blob_setup
    assert main(["extract", "--config", str(d / "cfg.json"), "--tensor", str(d / "hot.tnsr"), "--out", str(d / "b.jsonl")]) == 0
    rows = [json.loads(line) for line in (d / "b.jsonl").read_text().splitlines()]
    assert len(rows) == 3
    assert {tuple((r["x"], r["y"], r["w"], r["h"])) for r in rows} == {(56, 568, 80, 80), (472, 600, 80, 80), (1112, 568, 80, 80)}
    out = capsys.readouterr().out
    assert out.startswith("3 boxes") and "covered area" in out


def test_extract_cold(blob_setup, capsys):
    d = blob_setup
    assert main(["extract", "--config", str(d / "cfg.json"), "--tensor", str(d / "cold.tnsr"), "--out", str(d / "b.jsonl")]) == 0
    assert (d / "b.jsonl").read_text() == ""
    assert capsys.readouterr().out.startswith("0 boxes")


def test_extract_missing_file(blob_setup, capsys):
    missing = blob_setup / "nope.ppm"
    assert main(["extract", "--config", str(blob_setup / "cfg.json"), "--image", str(missing)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_extract_from_image(tmp_path):
    from roiedge.sim import Scenario
    from roiedge.tensor import write_ppm

    scn = Scenario.from_config(RunConfig.load(BUNDLE_CONFIG))
    write_ppm(scn.frame_image(5), tmp_path / "f.ppm")
    assert main(["extract", "--config", BUNDLE_CONFIG, "--image", str(tmp_path / "f.ppm"), "--out", str(tmp_path / "a.jsonl")]) == 0
    assert main(["extract", "--config", BUNDLE_CONFIG, "--frame", "5", "--out", str(tmp_path / "b.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_text() == (tmp_path / "b.jsonl").read_text()


def test_simulate_writes_outputs_and_config_reruns(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", BUNDLE_CONFIG, "--out", str(out), "--set", "scenario.frames=10"]) == 0
    for name in ("reports.jsonl", "summary.csv", "summary.json", "config.json"):
        assert (out / name).exists()
    again = tmp_path / "again"
    assert main(["simulate", "--config", str(out / "config.json"), "--out", str(again)]) == 0
    for name in ("reports.jsonl", "summary.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_sweep_rows(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", "--config", BUNDLE_CONFIG, "--out", str(out), "--bandwidths", "100,50,20", "--set", "scenario.frames=6"]
    assert main(args) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["bandwidth_mbps"]) for r in rows] == [100, 50, 20]
    assert {"mean_f1", "mean_bytes", "mean_utility"} <= set(rows[0])
    assert (out / "bw_50mbps" / "summary.csv").exists()


def test_gen_scenario_and_stats(tmp_path, capsys):
    out = tmp_path / "bundle"
    assert main(["gen-scenario", "--out", str(out), "--seed", "4", "--frames", "30"]) == 0
    assert main(["stats", "--config", str(out / "config.json"), "--json"]) == 0
    text = capsys.readouterr().out
    stats = json.loads(text[text.index("{") :])
    assert stats["frames"] == 30 and stats["probabilities"]["top"] < 0.05


def test_bad_override_exit_code(capsys):
    assert main(["simulate", "--config", BUNDLE_CONFIG, "--set", "roi.nope=1"]) == 2
    assert "roi.nope" in capsys.readouterr().err


def test_serve_edge_and_run_device(tmp_path):
    env = dict(os.environ)
    server = subprocess.Popen(
        [sys.executable, "-m", "roiedge", "serve-edge", "--config", BUNDLE_CONFIG, "--port", "0"],
        stdout=subprocess.PIPE, text=True, env=env,
    )
    try:
        line = server.stdout.readline()
        port = int(line.rsplit(":", 1)[1])
        out = tmp_path / "dev"
        assert main(["run-device", "--config", BUNDLE_CONFIG, "--port", str(port), "--out", str(out), "--set", "scenario.frames=8"]) == 0
        assert main(["simulate", "--config", BUNDLE_CONFIG, "--out", str(tmp_path / "loc"), "--set", "scenario.frames=8"]) == 0
        assert (out / "reports.jsonl").read_bytes() == (tmp_path / "loc" / "reports.jsonl").read_bytes()
    finally:
        server.terminate()
        server.wait(10)
