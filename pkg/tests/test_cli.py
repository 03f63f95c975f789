import json

import pandas as pd
import pytest

from sdot import __version__
from sdot.cli import cli


def write_config(tmp_path, **overrides):
    payload = {
        "schema_version": 1,
        "name": "cli",
        "source": {"kind": "sampled", "base": {"kind": "uniform_hypercube", "dim": 3}, "size": 40, "seed": 6},
        "target": {"size": 4, "dim": 3, "seed": 2},
        "eps": [0.5],
        "algorithms": [{"algorithm": "sgn"}],
        "n_max": 0,
        "replications": 1,
        "seed": 3,
        "record_wall_time": False,
        "check": {"points": 10, "radius": 1.0, "seed": 1},
    }
    payload.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


class TestVersion:
    def test_prints_version(self, capsys):
        assert cli(["version"]) == 0
        assert capsys.readouterr().out.strip() == f"sdot {__version__}"

    def test_missing_command_is_usage_error(self):
        assert cli([]) == 2


class TestRun:
    def test_zero_budget_writes_initialization_row(self, tmp_path):
        out = tmp_path / "out"
        assert cli(["run", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
        lines = (out / "runs_eps=0.5.csv").read_text().splitlines()
        assert lines[0] == "replication,algorithm,n,wall_time_s,w_hat,sigma2_hat,v_err_sq,sbar_err_fro"
        assert len(lines) == 2
        assert lines[1].startswith("0,sgn,0,")
        assert (out / "manifest.json").exists()

    def test_snapshot_and_seed_flags(self, tmp_path):
        out = tmp_path / "out"
        config = write_config(tmp_path, n_max=1000)
        assert cli(["run", "--config", str(config), "--out", str(out), "--snapshots", "1e2,1e3", "--seed", "9"]) == 0
        runs = pd.read_csv(out / "runs_eps=0.5.csv")
        assert runs["n"].tolist() == [0, 100, 1000]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["config"]["snapshots"] == [100, 1000]

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        assert cli(["run", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_invalid_field(self, tmp_path):
        assert cli(["run", "--config", str(write_config(tmp_path, replications=0))]) == 2

    def test_bad_snapshot_flag(self, tmp_path):
        assert cli(["run", "--config", str(write_config(tmp_path, n_max=10)), "--snapshots", "1.5"]) == 2

    def test_invalid_thread_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SDOT_THREADS", "0")
        assert cli(["run", "--config", str(write_config(tmp_path))]) == 2

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        out = tmp_path / "from-env"
        monkeypatch.setenv("SDOT_OUTPUT_DIR", str(out))
        assert cli(["run", "--config", str(write_config(tmp_path))]) == 0
        assert (out / "manifest.json").exists()

    def test_manifest_is_accepted_as_config(self, tmp_path):
        first = tmp_path / "first"
        assert cli(["run", "--config", str(write_config(tmp_path, n_max=50)), "--out", str(first)]) == 0
        second = tmp_path / "second"
        assert cli(["run", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
        name = "runs_eps=0.5.csv"
        assert (first / name).read_bytes() == (second / name).read_bytes()


class TestSinkhorn:
    def test_truth_and_trace(self, tmp_path, capsys):
        cache = tmp_path / "truth.json"
        trace = tmp_path / "trace"
        code = cli(["sinkhorn", "--config", str(write_config(tmp_path)), "--truth", str(cache), "--trace-out", str(trace)])
        assert code == 0
        assert "W_eps=" in capsys.readouterr().out
        assert len(json.loads(cache.read_text())) == 1
        frame = pd.read_csv(trace / "sinkhorn_trace_eps=0.5.csv")
        assert frame["residual"].iloc[-1] <= 1e-9


class TestCheck:
    def test_uniform_desk_instance_passes(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert cli(["check", "--config", str(write_config(tmp_path)), "--json-out", str(report)]) == 0
        assert "all required checks passed" in capsys.readouterr().out
        checks = json.loads(report.read_text())[0]["checks"]
        assert {"name", "value", "bound", "passed"} <= set(checks[0])

    def test_invalid_point_count(self, tmp_path):
        assert cli(["check", "--config", str(write_config(tmp_path)), "--points", "0"]) == 2


class TestNormality:
    def test_histograms_from_run(self, tmp_path):
        out = tmp_path / "out"
        config = write_config(tmp_path, n_max=200, replications=5)
        assert cli(["run", "--config", str(config), "--out", str(out)]) == 0
        assert cli(["normality", "--run-dir", str(out), "--bins", "4"]) == 0
        summary = pd.read_csv(out / "normality_summary.csv")
        assert set(summary["statistic"]) == {"w_tilde", "scaled_v_err"}
        assert (summary["count"] == 5).all()
        histogram = pd.read_csv(out / "normality_eps=0.5_sgn_w_tilde.csv")
        assert histogram["count"].sum() == 5

    def test_unknown_snapshot(self, tmp_path):
        out = tmp_path / "out"
        assert cli(["run", "--config", str(write_config(tmp_path, n_max=20)), "--out", str(out)]) == 0
        assert cli(["normality", "--run-dir", str(out), "--n", "7"]) == 2
