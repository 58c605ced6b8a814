"""Tests for config parsing, CSV emission, and the command-line interface."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from secfusion import ConfigurationError
from secfusion.cli import dispatch, load_scenario, parse_config
from secfusion.simulation import builtin_ieee4bus

MINIMAL_TOML = 'scenario = "ieee4bus"\n'

FULL_TOML = """
name = "two-sensor"

[system]
A = [[0.9, 0.0], [0.0, 0.8]]
Q = [[0.1, 0.0], [0.0, 0.1]]

[[sensors]]
id = 1
C = [[1.0, 0.0]]
R = [[0.2]]
defense = "weak"
strong = [2]
eta = 1.0

[[sensors]]
id = 2
C = [[0.0, 1.0]]
R = [[0.2]]
defense = "strong"

[[attacks]]
sensor = 1
kind = "pulse"
start = 5
end = 5
value = [2.0]

[estimator]
q_theta = 0.5

[montecarlo]
runs = 12
seed = 3
horizon = 20
"""


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestParseConfig:
    def test_minimal_builtin_reference(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(MINIMAL_TOML)
        cfg = parse_config(path)
        ref = builtin_ieee4bus()
        npt.assert_array_equal(cfg.system.A_at(0), ref.system.A_at(0))
        assert cfg.runs == 500 and cfg.horizon == 100
        assert cfg.strong_map == ref.strong_map

    def test_builtin_with_montecarlo_override(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(MINIMAL_TOML + "[montecarlo]\nruns = 7\nseed = 9\n")
        cfg = parse_config(path)
        assert cfg.runs == 7 and cfg.seed == 9 and cfg.horizon == 100

    def test_full_toml(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(FULL_TOML)
        cfg = parse_config(path)
        assert cfg.name == "two-sensor"
        assert cfg.weak_ids == [1]
        assert cfg.strong_map == {1: (2,)}
        assert cfg.attacks[1].kind == "pulse"
        assert cfg.q_theta == 0.5
        assert (cfg.runs, cfg.seed, cfg.horizon) == (12, 3, 20)

    def test_json_equivalent(self, tmp_path):
        doc = {
            "system": {"A": [[0.9, 0.0], [0.0, 0.8]],
                       "Q": [[0.1, 0.0], [0.0, 0.1]]},
            "sensors": [
                {"id": 1, "C": [[1.0, 0.0]], "R": [[0.2]],
                 "defense": "weak", "strong": [2]},
                {"id": 2, "C": [[0.0, 1.0]], "R": [[0.2]],
                 "defense": "strong"},
            ],
            "attacks": [{"sensor": 1, "kind": "constant", "value": [1.0]}],
            "montecarlo": {"runs": 4, "seed": 1, "horizon": 8},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = parse_config(path)
        assert cfg.runs == 4
        assert cfg.attacks[1].kind == "constant"

    def test_estimator_eta_list_and_init(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(MINIMAL_TOML + """
[estimator]
eta = [1.0, 20.0]

[estimator.init.1]
P_X0 = [[2,0,0,0,0],[0,2,0,0,0],[0,0,2,0,0],[0,0,0,2,0],[0,0,0,0,2]]
""")
        cfg = parse_config(path)
        assert cfg.eta == {1: 1.0, 2: 20.0}
        npt.assert_array_equal(cfg.local_init[1].P_X0, 2 * np.eye(5))

    def test_unknown_builtin(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('scenario = "nope"\n')
        with pytest.raises(ConfigurationError, match="nope"):
            parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            parse_config(tmp_path / "missing.toml")

    def test_bad_strong_reference_names_id(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(FULL_TOML.replace("strong = [2]", "strong = [4]"))
        with pytest.raises(ConfigurationError, match="4"):
            parse_config(path)

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("[system]\nA = [[1.0]]\n")
        with pytest.raises(ConfigurationError, match="Q"):
            parse_config(path)

    def test_load_scenario_by_name(self):
        cfg = load_scenario("scalar")
        assert cfg.name == "scalar"
        with pytest.raises(ConfigurationError, match="neither"):
            load_scenario("does-not-exist")


class TestCommands:
    def test_run_row_count(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code = dispatch(["run", "--scenario", "ieee4bus", "--seed", "1",
                         "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert len(rows) == 101
        assert header[0] == "k"
        assert "x_1" in header and "xfused_1" in header
        assert "thetahat2_1" in header and "pxtrace_1" in header

    def test_mc_columns(self, tmp_path):
        out = tmp_path / "mse.csv"
        code = dispatch(["mc", "--scenario", "ieee4bus", "--runs", "5",
                         "--seed", "7", "--horizon", "15",
                         "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["k", "mse_fused", "mse_local_1", "mse_local_2",
                          "mse_theta_1", "mse_theta_2"]
        assert len(rows) == 16

    def test_compare_columns(self, tmp_path):
        out = tmp_path / "cmp.csv"
        code = dispatch(["compare", "--scenario", "ieee4bus", "--runs", "5",
                         "--horizon", "10", "--out", str(out)])
        assert code == 0
        header, _ = read_csv(out)
        assert "mse_proposed_1" in header and "mse_akf_1" in header
        assert "mse_proposed_2" in header and "mse_akf_2" in header

    def test_csv_roundtrip_bit_exact(self, tmp_path):
        from secfusion.simulation import run_monte_carlo
        from dataclasses import replace
        out = tmp_path / "mse.csv"
        assert dispatch(["mc", "--scenario", "ieee4bus", "--runs", "3",
                         "--seed", "2", "--horizon", "12",
                         "--out", str(out)]) == 0
        cfg = replace(builtin_ieee4bus(), horizon=12)
        rep = run_monte_carlo(cfg, runs=3, seed=2)
        _, rows = read_csv(out)
        for k, row in enumerate(rows):
            assert float(row[1]) == rep.mse_fused[k]
            assert float(row[2]) == rep.mse_local[1][k]
            assert float(row[4]) == rep.mse_theta[1][k]

    def test_eta_override_echoed(self, tmp_path, capsys):
        out = tmp_path / "mse.csv"
        code = dispatch(["mc", "--scenario", "ieee4bus", "--runs", "2",
                         "--horizon", "5", "--eta", "2=20",
                         "--out", str(out)])
        assert code == 0
        err = capsys.readouterr().err
        assert "eta = [1.0, 20.0]" in err

    def test_check_reports_full_rank(self, capsys):
        assert dispatch(["check", "--scenario", "ieee4bus"]) == 0
        out = capsys.readouterr().out
        assert "sensor 1: rank 5/5" in out
        assert "full rank" in out

    def test_run_to_stdout(self, capsys):
        code = dispatch(["run", "--scenario", "scalar", "--horizon", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("k,")
        assert len(out.strip().split("\n")) == 5

    def test_probe_optimality(self, capsys):
        code = dispatch(["probe-optimality", "--scenario", "ieee4bus",
                         "--steps", "1,3", "--trials", "10"])
        assert code == 0
        assert "PASS" in capsys.readouterr().out

    def test_probe_consistency(self, capsys):
        code = dispatch(["probe-consistency",
                         "--scenario", "scalar-consistency",
                         "--runs", "500", "--checkpoints", "10"])
        assert code == 0
        assert "PASS" in capsys.readouterr().out


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert dispatch(["frobnicate"]) == 1
        assert dispatch([]) == 1

    def test_config_error_is_one(self, capsys):
        assert dispatch(["run", "--scenario", "missing.toml"]) == 1
        assert dispatch(["mc", "--scenario", "ieee4bus",
                         "--eta", "bogus"]) == 1
        assert dispatch(["mc", "--scenario", "ieee4bus",
                         "--eta", "7=1.0"]) == 1

    def test_numerical_failure_is_two(self, tmp_path, capsys):
        # a noiseless strong sensor measuring nothing contributes an
        # all-zero row to the innovation covariance, which is singular
        path = tmp_path / "bad.toml"
        path.write_text("""
[system]
A = [[1.0]]
Q = [[0.0]]

[[sensors]]
id = 1
C = [[1.0]]
R = [[0.1]]
defense = "weak"
strong = [2]

[[sensors]]
id = 2
C = [[0.0]]
R = [[0.0]]
defense = "strong"
""")
        code = dispatch(["run", "--scenario", str(path), "--horizon", "3"])
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_probe_failure_is_three(self, capsys):
        code = dispatch(["probe-consistency",
                         "--scenario", "scalar-consistency",
                         "--runs", "60", "--checkpoints", "5",
                         "--tol", "1e-9"])
        assert code == 3
        assert "FAIL" in capsys.readouterr().out


class TestDeterministicOutput:
    def test_repeated_invocations_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["mc", "--scenario", "ieee4bus", "--runs", "6", "--seed",
                "11", "--horizon", "18"]
        assert dispatch(args + ["--out", str(a)]) == 0
        assert dispatch(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_worker_count_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["mc", "--scenario", "ieee4bus", "--runs", "6", "--seed",
                "11", "--horizon", "18"]
        assert dispatch(args + ["--workers", "1", "--out", str(a)]) == 0
        assert dispatch(args + ["--workers", "2", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
