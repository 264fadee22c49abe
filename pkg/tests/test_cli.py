import csv
import json
import subprocess

import pytest


def odcal_cmd(*args):
    return subprocess.run(["odcal", *args], capture_output=True, text=True)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    net = root / "network.json"
    gt = root / "gt.json"
    r = odcal_cmd("gen-network", "--archetype", "simple-ramp", "--out", str(net))
    assert r.returncode == 0, r.stderr
    r = odcal_cmd("gen-gt", "--network", str(net), "--seed", "5",
                  "--replications", "1", "--out", str(gt))
    assert r.returncode == 0, r.stderr
    return root, net, gt


class TestGenNetwork:
    def test_writes_valid_document(self, workspace):
        _, net, _ = workspace
        doc = json.loads(net.read_text())
        assert set(doc) >= {"nodes", "links", "tazs", "sensors"}

    def test_unknown_archetype_exits_validation(self, tmp_path):
        r = odcal_cmd("gen-network", "--archetype", "spiral",
                      "--out", str(tmp_path / "x.json"))
        assert r.returncode == 1

    def test_zero_scale_exits_validation(self, tmp_path):
        r = odcal_cmd("gen-network", "--archetype", "one-way-corridor",
                      "--scale", "0", "--out", str(tmp_path / "x.json"))
        assert r.returncode == 1


class TestGenGt:
    def test_ground_truth_schema(self, workspace):
        _, _, gt = workspace
        doc = json.loads(gt.read_text())
        assert set(doc) == {"x_star", "targets", "gt_seed", "replications", "mode"}
        assert len(doc["x_star"]) == 3

    def test_stochastic_mode_flag(self, workspace, tmp_path):
        _, net, _ = workspace
        out = tmp_path / "gt2.json"
        r = odcal_cmd("gen-gt", "--network", str(net), "--seed", "1",
                      "--mode", "stoch", "--replications", "4", "--out", str(out))
        assert r.returncode == 0
        doc = json.loads(out.read_text())
        assert doc["mode"] == "stochastic"
        assert doc["replications"] == 4


class TestRun:
    def test_run_and_report(self, workspace, tmp_path):
        _, net, gt = workspace
        out = tmp_path / "exp"
        r = odcal_cmd(
            "run", "--network", str(net), "--gt", str(gt),
            "--model", "random", "--model", "spsa",
            "--runs", "2", "--epochs", "3", "--init-points", "3",
            "--seed", "9", "--out", str(out),
        )
        assert r.returncode == 0, r.stderr
        assert (out / "aggregate.csv").exists()
        rows = list(csv.DictReader(open(out / "aggregate.csv")))
        assert {row["method"] for row in rows} == {"random", "spsa"}
        r2 = odcal_cmd("report", "--in", str(out))
        assert r2.returncode == 0

    def test_config_file_mirrors_flags(self, workspace, tmp_path):
        _, net, gt = workspace
        out = tmp_path / "exp-cfg"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "model": ["random"], "runs": 1, "epochs": 2, "init_points": 3,
            "seed": 4, "out": str(out),
        }))
        r = odcal_cmd("run", "--network", str(net), "--gt", str(gt),
                      "--config", str(cfg))
        assert r.returncode == 0, r.stderr
        rows = list(csv.DictReader(open(out / "runs" / "random_run0.csv")))
        assert len(rows) == 3 + 2 * 2

    def test_explicit_flag_overrides_config(self, workspace, tmp_path):
        _, net, gt = workspace
        out = tmp_path / "exp-ovr"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "model": ["random"], "runs": 1, "epochs": 9, "init_points": 3,
            "seed": 4, "out": str(out),
        }))
        r = odcal_cmd("run", "--network", str(net), "--gt", str(gt),
                      "--config", str(cfg), "--epochs", "2")
        assert r.returncode == 0, r.stderr
        rows = list(csv.DictReader(open(out / "runs" / "random_run0.csv")))
        assert len(rows) == 3 + 2 * 2


class TestFilterSensors:
    def test_verdict_csv(self, workspace, tmp_path):
        _, net, _ = workspace
        counts = tmp_path / "counts.csv"
        with open(counts, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sensor_id", "interval", "count"])
            for t in range(10):
                writer.writerow([0, t, 120])   # upstream exceeds merge
                writer.writerow([1, t, 100])
                writer.writerow([2, t, 100])
        r = odcal_cmd("filter-sensors", "--network", str(net),
                      "--counts", str(counts))
        assert r.returncode == 0, r.stderr
        lines = r.stdout.strip().splitlines()
        assert lines[0] == "sensor_id,verdict,violation_fraction,violation_margin"
        verdicts = {l.split(",")[0]: l.split(",")[1] for l in lines[1:]}
        assert verdicts["0"] == "conservation-violation"
        assert verdicts["1"] == "conservation-violation"
        assert verdicts["2"] == "retained"


class TestSensitivity:
    def test_summary_line(self, workspace):
        _, net, gt = workspace
        r = odcal_cmd("sensitivity", "--network", str(net), "--gt", str(gt),
                      "--probes", "4")
        assert r.returncode == 0, r.stderr
        assert "dominant=3" in r.stdout.strip().splitlines()[-1]
