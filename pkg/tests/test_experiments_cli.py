import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from predkl.cli import DEFAULT_CONFIGS, main
from predkl.config import parse_config
from predkl.experiments import (
    EXIT_CHECK_FAILED,
    EXIT_ERROR,
    EXIT_PASS,
    SCHEMA_VERSION,
    RunRecord,
    emit_plotdata,
    read_csv,
    record_to_csv,
    reproduce,
    run,
)

SMALL_RISK = """\
experiment = dominance-scan
model.p = 3
model.v_x = 1
model.v_y = 1
prior.1.kind = harmonic
prior.2.kind = gaussian
prior.2.tau2 = 1
mu.radii = 0, 2
budget = 3000
seed = 5
"""


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestRun:
    def test_dominance_scan_record(self):
        record = run(parse_config(SMALL_RISK), write=False)
        assert record.status == "pass"
        assert record.schema_version == SCHEMA_VERSION
        assert {c["prior"] for c in record.cells} == {"harmonic", "gaussian(tau2=1)"}
        assert all({"mu_norm", "risk", "se"} <= set(c) for c in record.cells)

    def test_json_round_trip(self):
        record = run(parse_config(SMALL_RISK), write=False)
        again = RunRecord.from_json(record.to_json())
        assert again.to_json() == record.to_json()

    def test_reproduce_bit_exact(self):
        record = run(parse_config(SMALL_RISK.replace("seed = 5", "seed = 5\nworkers = 2")), write=False)
        same, diffs = reproduce(RunRecord.from_json(record.to_json()))
        assert same, diffs

    def test_worker_count_independent(self):
        a = run(parse_config(SMALL_RISK + "workers = 1\n"), write=False)
        b = run(parse_config(SMALL_RISK + "workers = 3\n"), write=False)
        assert [c["risk"] for c in a.cells] == [c["risk"] for c in b.cells]

    def test_numerical_error_recorded(self):
        text = "experiment = truncation-demo\nmodel.p = 1\nmodel.v_x = 1\nmodel.bound = 1\n" \
               "truncation.edges = 0, 0.5\ntruncation.values = 2\ntruncation.mu = 0\n"
        record = run(parse_config(text), write=False)
        assert record.status == "error" and record.exit_code == EXIT_ERROR
        assert "ValueError" in record.error

    def test_check_admissibility(self):
        record = run(parse_config(DEFAULT_CONFIGS["check-admissibility"]), write=False)
        assert [c["route"] is not None for c in record.cells] == [True, True, False]
        assert record.status == "pass"

    def test_truncation_demo(self):
        record = run(parse_config(DEFAULT_CONFIGS["truncation-demo"]), write=False)
        assert record.status == "pass"
        assert record.cells[0]["c"] == 2.0


class TestOutputs:
    def test_csv_round_trip(self):
        record = run(parse_config(SMALL_RISK), write=False)
        rows = read_csv(emit_plotdata(record, "risk-curve"))
        assert [r["schema_version"] for r in rows] == [SCHEMA_VERSION] * len(rows)
        got = np.array([r["risk"] for r in rows])
        expect = np.array([c["risk"] for c in record.cells])
        np.testing.assert_allclose(got, expect, rtol=1e-12)
        assert list(rows[0])[:4] == ["prior", "mu_norm", "risk", "se"]

    def test_record_csv_quotes(self):
        record = RunRecord("risk-table", {}, cells=[{"prior": "power(b=1), odd", "risk": 0.1}])
        text = record_to_csv(record)
        assert '"power(b=1), odd"' in text
        assert read_csv(text)[0]["prior"] == "power(b=1), odd"

    def test_wrong_plot_kind(self):
        record = run(parse_config(SMALL_RISK), write=False)
        with pytest.raises(ValueError):
            emit_plotdata(record, "blyth-gap")
        with pytest.raises(ValueError):
            emit_plotdata(record, "histogram")

    def test_schema_version_checked(self):
        data = json.loads(run(parse_config(SMALL_RISK), write=False).to_json())
        data["schema_version"] = 99
        with pytest.raises(ValueError):
            RunRecord.from_json(json.dumps(data))


class TestCLI:
    def test_truncation_demo_default(self, runner):
        result = runner.invoke(main, ["truncation-demo"])
        assert result.exit_code == EXIT_PASS
        assert json.loads(result.stdout)["experiment"] == "truncation-demo"

    def test_output_dir_override(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("PREDKL_OUTPUT_DIR", str(tmp_path / "out"))
        result = runner.invoke(main, ["truncation-demo", "--output", "elsewhere/demo.json"])
        assert result.exit_code == EXIT_PASS
        assert os.path.exists(tmp_path / "out" / "demo.json")

    def test_csv_format(self, runner, tmp_path):
        out = tmp_path / "demo.csv"
        result = runner.invoke(main, ["truncation-demo", "--output", str(out), "--format", "csv"])
        assert result.exit_code == EXIT_PASS
        assert out.read_text().splitlines()[0].endswith("schema_version")

    def test_config_error_exit_code(self, runner, tmp_path):
        cfg = write(tmp_path, "bad.cfg", SMALL_RISK.replace("budget = 3000", "budget = lots"))
        result = runner.invoke(main, ["dominance-scan", "--config", cfg])
        assert result.exit_code == EXIT_ERROR
        assert "line 9" in result.stderr and "budget" in result.stderr

    def test_mismatched_experiment(self, runner, tmp_path):
        cfg = write(tmp_path, "scan.cfg", SMALL_RISK)
        result = runner.invoke(main, ["risk-table", "--config", cfg])
        assert result.exit_code == EXIT_ERROR

    def test_failed_check_exit_code(self, runner, tmp_path):
        # a tight prior centred far from mu is worse than the uniform rule there
        text = SMALL_RISK.replace("prior.2.tau2 = 1", "prior.2.tau2 = 0.1").replace("mu.radii = 0, 2", "mu.radii = 8")
        cfg = write(tmp_path, "far.cfg", text)
        result = runner.invoke(main, ["dominance-scan", "--config", cfg])
        assert result.exit_code == EXIT_CHECK_FAILED

    def test_seed_and_rerun(self, runner, tmp_path):
        cfg = write(tmp_path, "scan.cfg", SMALL_RISK)
        out = tmp_path / "scan.json"
        result = runner.invoke(main, ["dominance-scan", "--config", cfg, "--seed", "17", "--workers", "2",
                                      "--output", str(out)])
        assert result.exit_code == EXIT_PASS, result.stderr
        record = json.loads(out.read_text())
        assert record["config"]["seed"] == "17" and record["config"]["workers"] == "2"
        rerun = runner.invoke(main, ["rerun", str(out)])
        assert rerun.exit_code == 0
        assert "identical" in rerun.stdout

    def test_plotdata_command(self, runner, tmp_path):
        cfg = write(tmp_path, "scan.cfg", SMALL_RISK)
        out = tmp_path / "scan.json"
        runner.invoke(main, ["dominance-scan", "--config", cfg, "--output", str(out)])
        result = runner.invoke(main, ["plotdata", str(out)])
        assert result.exit_code == 0
        assert result.stdout.splitlines()[0] == "prior,mu_norm,risk,se,schema_version"
        bad = runner.invoke(main, ["plotdata", str(out), "--kind", "bridge"])
        assert bad.exit_code == EXIT_ERROR

    def test_show_config_parses(self, runner):
        for name in DEFAULT_CONFIGS:
            result = runner.invoke(main, ["show-config", name])
            assert parse_config(result.stdout).experiment == name
