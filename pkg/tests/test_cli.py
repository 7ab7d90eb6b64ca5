import json
import os
import subprocess
import sys

import numpy as np
import pytest

from otselect.features import write_evf
from otselect.fixtures import planted_instance


def run_cli(args, **kwargs):
    env = dict(os.environ)
    env.update(kwargs.pop("env", {}))
    return subprocess.run(
        [sys.executable, "-m", "otselect.cli", *args],
        capture_output=True, text=True, env=env, **kwargs,
    )


@pytest.fixture(scope="module")
def planted_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("planted")
    train, val = planted_instance()
    write_evf(train, str(base / "train.evf"))
    write_evf(val, str(base / "val.evf"))
    return base


class TestProjectCommand:
    def test_csv_to_evf_round(self, tmp_path, rng):
        raw = rng.standard_normal((12, 40))
        csv = tmp_path / "raw.csv"
        csv.write_text("\n".join(",".join(repr(float(x)) for x in row) for row in raw) + "\n")
        out = tmp_path / "proj.evf"
        proc = run_cli(["project", "--in", str(csv), "--out", str(out),
                        "--d-out", "16", "--seed", "7"])
        assert proc.returncode == 0, proc.stderr
        from otselect.features import read_evf

        m = read_evf(str(out))
        assert (m.n, m.d) == (12, 16)

    def test_missing_input_exits_one(self, tmp_path):
        proc = run_cli(["project", "--in", str(tmp_path / "nope.csv"),
                        "--out", str(tmp_path / "x.evf")])
        assert proc.returncode == 1
        assert proc.stderr.strip()


class TestSelectCommand:
    def test_evoselect_contract(self, planted_files, tmp_path):
        out = tmp_path / "sel.json"
        proc = run_cli([
            "select", "--train", str(planted_files / "train.evf"),
            "--val", str(planted_files / "val.evf"), "--out", str(out),
            "--method", "evoselect", "--rho", "0.5", "--steps", "10",
        ])
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(out.read_text())
        assert doc["k"] == 10
        assert doc["selected"] == list(range(10))
        assert len(doc["weights"]) == 20
        assert len(doc["trace"]) == 10
        assert doc["method"] == "evoselect"

    def test_unknown_method_exits_two(self, planted_files, tmp_path):
        proc = run_cli([
            "select", "--train", str(planted_files / "train.evf"),
            "--val", str(planted_files / "val.evf"),
            "--out", str(tmp_path / "x.json"), "--method", "bogus", "--rho", "0.5",
        ])
        assert proc.returncode == 2

    def test_infeasible_budget_exits_three(self, planted_files, tmp_path):
        proc = run_cli([
            "select", "--train", str(planted_files / "train.evf"),
            "--val", str(planted_files / "val.evf"),
            "--out", str(tmp_path / "x.json"), "--method", "attrdiv", "--rho", "1.0",
        ])
        assert proc.returncode == 3

    def test_byte_identical_across_runs(self, planted_files, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            proc = run_cli([
                "select", "--train", str(planted_files / "train.evf"),
                "--val", str(planted_files / "val.evf"), "--out", str(out),
                "--method", "evoselect", "--rho", "0.5",
            ])
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("method", ["random", "tsds"])
    def test_seeded_methods_deterministic(self, planted_files, tmp_path, method):
        blobs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            proc = run_cli([
                "select", "--train", str(planted_files / "train.evf"),
                "--val", str(planted_files / "val.evf"), "--out", str(out),
                "--method", method, "--rho", "0.4", "--seed", "99",
            ])
            assert proc.returncode == 0, proc.stderr
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestScoreCommand:
    def test_report_fields(self, planted_files, tmp_path):
        out = tmp_path / "score.json"
        proc = run_cli([
            "score", "--sub", str(planted_files / "val.evf"),
            "--val", str(planted_files / "val.evf"), "--out", str(out),
            "--method", "self",
        ])
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(out.read_text())
        assert doc["method"] == "self" and doc["k"] == 10
        assert 1.0 <= doc["vendi"] <= 10.0
        assert doc["ot_to_val"] >= 0.0

    def test_missing_file_exits_one(self, tmp_path):
        proc = run_cli(["score", "--sub", str(tmp_path / "none.evf"),
                        "--val", str(tmp_path / "none.evf"),
                        "--out", str(tmp_path / "r.json")])
        assert proc.returncode == 1


class TestSimulateCommand:
    CONFIG = (
        "d = 8\nm_val = 12\nn_cand = 24\niterations = 2\nrho = 0.5\n"
        "method = random\nseed = 5\nn_seed = 4\nmixture = 20, 6\n"
    )

    def test_writes_json_and_csv(self, tmp_path):
        cfg = tmp_path / "loop.cfg"
        cfg.write_text(self.CONFIG)
        out = tmp_path / "report.json"
        proc = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(out.read_text())
        assert len(doc["records"]) == 2
        csv_lines = (tmp_path / "report.csv").read_text().strip().splitlines()
        assert csv_lines[0] == "iteration,method,ot_to_val,vendi,mean_attr,selected_count"
        assert len(csv_lines) == 3

    def test_shipped_fixture_config_satisfies_orderings(self, tmp_path):
        cfg = os.path.join(os.path.dirname(__file__), "..", "configs", "tradeoff.json")
        out = tmp_path / "fixture-report.json"
        proc = run_cli(["simulate", "--config", cfg, "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(out.read_text())
        by = {c["method"]: c for c in doc["comparison"]}
        attr, div, evo = by["attribution"], by["diversity"], by["evoselect"]
        assert attr["mean_attr"] > div["mean_attr"]
        assert div["vendi"] > attr["vendi"]
        assert div["mean_attr"] <= evo["mean_attr"] <= attr["mean_attr"]
        assert attr["vendi"] <= evo["vendi"] <= div["vendi"]

    def test_malformed_config_exits_one(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("garbage line without equals\n")
        proc = run_cli(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r.json")])
        assert proc.returncode == 1
        assert "line 1" in proc.stderr

    def test_zero_iterations_exits_one(self, tmp_path):
        cfg = tmp_path / "zero.cfg"
        cfg.write_text(self.CONFIG.replace("iterations = 2", "iterations = 0"))
        proc = run_cli(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r.json")])
        assert proc.returncode == 1
        assert "iterations" in proc.stderr


class TestThreadEnvInvariance:
    def test_outputs_identical_across_thread_caps(self, planted_files, tmp_path):
        blobs = {}
        for threads in ("1", "4"):
            out = tmp_path / f"t{threads}.json"
            proc = run_cli(
                ["select", "--train", str(planted_files / "train.evf"),
                 "--val", str(planted_files / "val.evf"), "--out", str(out),
                 "--method", "evoselect", "--rho", "0.5"],
                env={"OTSELECT_THREADS": threads},
            )
            assert proc.returncode == 0, proc.stderr
            blobs[threads] = out.read_bytes()
        assert blobs["1"] == blobs["4"]
