import json

import numpy as np
import pytest

from supobs.cli import main
from supobs.lmi import certificate_to_dict

SMALL_SCENARIO = {
    "policy": "static",
    "n_observers": 5,
    "forgetting": 0.99,
    "horizon": 300,
    "true_parameter": 20.0,
    "seed": 11,
    "input": {
        "components": [
            {"amplitude": 0.35, "frequency": 1.0, "phase": 0.7},
            {"amplitude": 0.15, "frequency": 2.7, "phase": 0.2},
        ],
        "budget": 1.0,
    },
}


@pytest.fixture
def small_scenario(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL_SCENARIO))
    return path


class TestCheck:
    def test_shipped_certificate_passes(self, tmp_path, capsys):
        code = main(["check", "--out", str(tmp_path)])
        assert code == 0
        report = json.loads((tmp_path / "certificate_check.json").read_text())
        assert report["passed"] is True
        assert (tmp_path / "certificate_check.txt").exists()
        assert "PASS" in capsys.readouterr().out

    def test_negated_p_fails(self, tmp_path, certificate):
        data = certificate_to_dict(certificate)
        data["P"] = (-np.asarray(data["P"])).tolist()
        bad = tmp_path / "bad_cert.json"
        bad.write_text(json.dumps(data))
        code = main(["check", "--certificate", str(bad), "--out", str(tmp_path)])
        assert code == 1
        report = json.loads((tmp_path / "certificate_check.json").read_text())
        assert report["positivity_ok"] is False

    def test_missing_certificate_file(self, tmp_path, capsys):
        code = main(["check", "--certificate", str(tmp_path / "nope.json")])
        assert code == 2
        assert "does not exist" in capsys.readouterr().err

    def test_malformed_certificate_names_problem(self, tmp_path, certificate, capsys):
        data = certificate_to_dict(certificate)
        del data["kappa_w"]
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(data))
        code = main(["check", "--certificate", str(broken)])
        assert code == 2
        assert "kappa_w" in capsys.readouterr().err


class TestRun:
    def test_small_scenario(self, small_scenario, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--scenario", str(small_scenario), "--out", str(out)])
        assert code == 0
        assert (out / "trace.csv").exists()
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["entry_time"] is not None
        assert "entry time" in capsys.readouterr().out

    def test_bundled_name_resolution(self, tmp_path):
        # bare names resolve to the bundled scenarios, so horizon-0 edits need a file
        code = main(["run", "--scenario", "definitely_not_bundled", "--out", str(tmp_path)])
        assert code == 2

    def test_horizon_zero(self, tmp_path):
        data = dict(SMALL_SCENARIO, horizon=0)
        path = tmp_path / "h0.json"
        path.write_text(json.dumps(data))
        code = main(["run", "--scenario", str(path), "--out", str(tmp_path / "out")])
        assert code == 0
        lines = (tmp_path / "out" / "trace.csv").read_text().strip().splitlines()
        assert len(lines) == 2  # header + initial row

    def test_guard_breach_exit_and_marker(self, tmp_path, capsys):
        data = dict(SMALL_SCENARIO, state_guard=2.0)
        path = tmp_path / "guard.json"
        path.write_text(json.dumps(data))
        out = tmp_path / "out"
        code = main(["run", "--scenario", str(path), "--out", str(out)])
        assert code == 1
        last = (out / "trace.csv").read_text().strip().splitlines()[-1]
        assert last.startswith("ABORTED,")
        assert "aborted" in capsys.readouterr().err

    def test_seed_reproducibility_and_override(self, small_scenario, tmp_path):
        out_a, out_b, out_c = (tmp_path / n for n in ("a", "b", "c"))
        assert main(["run", "--scenario", str(small_scenario), "--out", str(out_a), "--skip-check"]) == 0
        assert main(["run", "--scenario", str(small_scenario), "--out", str(out_b), "--skip-check"]) == 0
        assert main(
            ["run", "--scenario", str(small_scenario), "--out", str(out_c), "--seed", "77", "--skip-check"]
        ) == 0
        bytes_a = (out_a / "trace.csv").read_bytes()
        assert bytes_a == (out_b / "trace.csv").read_bytes()
        # the bundled small scenario is noiseless, so the seed only matters with noise
        noisy = json.loads(small_scenario.read_text())
        noisy["noise"] = {"delta_v": 0.01, "delta_w": 0.01}
        noisy_path = small_scenario.parent / "noisy.json"
        noisy_path.write_text(json.dumps(noisy))
        out_d, out_e = tmp_path / "d", tmp_path / "e"
        assert main(["run", "--scenario", str(noisy_path), "--out", str(out_d), "--skip-check"]) == 0
        assert main(
            ["run", "--scenario", str(noisy_path), "--out", str(out_e), "--seed", "77", "--skip-check"]
        ) == 0
        assert (out_d / "trace.csv").read_bytes() != (out_e / "trace.csv").read_bytes()


class TestSweep:
    def test_single_value_matches_run(self, small_scenario, tmp_path):
        run_out = tmp_path / "run"
        sweep_out = tmp_path / "sweep"
        assert main(["run", "--scenario", str(small_scenario), "--out", str(run_out), "--skip-check"]) == 0
        code = main(
            [
                "sweep",
                "--scenario",
                str(small_scenario),
                "--axis",
                "N",
                "--values",
                "5",
                "--out",
                str(sweep_out),
                "--skip-check",
            ]
        )
        assert code == 0
        assert (sweep_out / "run_000" / "trace.csv").read_bytes() == (run_out / "trace.csv").read_bytes()

    def test_observer_count_sweep(self, small_scenario, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--scenario",
                str(small_scenario),
                "--axis",
                "N",
                "--values",
                "2,5,10",
                "--out",
                str(out),
                "--skip-check",
            ]
        )
        assert code == 0
        lines = (out / "summary.csv").read_text().strip().splitlines()
        assert lines[0] == "value,entry_time,trailing_err_p,trailing_err_x,status"
        assert len(lines) == 4
        for line in lines[1:]:
            value, _entry, trailing_p, _trailing_x, status = line.split(",")
            assert status == "ok"
            assert float(trailing_p) <= 24.5 / float(value) + 1e-9

    def test_empty_values_usage_error(self, small_scenario, capsys):
        code = main(
            ["sweep", "--scenario", str(small_scenario), "--axis", "N", "--values", ",", "--skip-check"]
        )
        assert code == 2

    def test_parallel_sweep_matches_serial(self, small_scenario, tmp_path, monkeypatch):
        serial_out = tmp_path / "serial"
        parallel_out = tmp_path / "parallel"
        args = [
            "sweep",
            "--scenario",
            str(small_scenario),
            "--axis",
            "N",
            "--values",
            "2,5",
            "--skip-check",
        ]
        monkeypatch.setenv("SUPOBS_THREADS", "1")
        assert main(args + ["--out", str(serial_out)]) == 0
        monkeypatch.setenv("SUPOBS_THREADS", "2")
        assert main(args + ["--out", str(parallel_out)]) == 0
        assert (serial_out / "summary.csv").read_bytes() == (parallel_out / "summary.csv").read_bytes()
        for run in ("run_000", "run_001"):
            assert (serial_out / run / "trace.csv").read_bytes() == (
                parallel_out / run / "trace.csv"
            ).read_bytes()

    def test_failed_run_recorded_and_sweep_continues(self, small_scenario, tmp_path):
        out = tmp_path / "sweep"
        # lambda = 1.0 is invalid and must fail that row only
        code = main(
            [
                "sweep",
                "--scenario",
                str(small_scenario),
                "--axis",
                "lambda",
                "--values",
                "0.9,1.0",
                "--out",
                str(out),
                "--skip-check",
            ]
        )
        assert code == 1
        lines = (out / "summary.csv").read_text().strip().splitlines()
        assert lines[1].endswith("ok")
        assert "error" in lines[2]
