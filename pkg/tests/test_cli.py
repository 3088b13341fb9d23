import json
from pathlib import Path

import pytest

from mcbound.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

TWO_STATE = {"Q": [[0.9, 0.1], [0.2, 0.8]]}
SCALAR_TABLE = {"scalars": [1.0, -2.0]}


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestBoundsCommand:
    def test_documented_crude_value(self, tmp_path):
        cfg = write_config(tmp_path, "b.json", {
            "seed": 1,
            "params": {
                "theorems": ["crude_rosenthal"],
                "inputs": {"p": 2, "n": 100, "dim_factor": 2, "t_mix": 1,
                           "sup_norm": 1.0},
            },
        })
        rc = main(["bounds", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 0
        report = json.loads((tmp_path / "out" / "bounds_report.json").read_text())
        value = report["reports"][0]["value"]
        assert value == pytest.approx(192.93315612503125, abs=1e-9)
        assert report["constants"]["c_r1"] == 87.0

    def test_chain_derived_inputs(self, tmp_path):
        cfg = write_config(tmp_path, "b.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 3,
            "params": {"p": 2, "n": 1000,
                       "theorems": ["crude_rosenthal", "markov_rosenthal"]},
        })
        rc = main(["bounds", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 0
        report = json.loads((tmp_path / "out" / "bounds_report.json").read_text())
        assert report["certificates"]["t_mix"] == 4
        assert report["certificates"]["poisson_residual"] < 1e-10
        by_name = {r["theorem"]: r for r in report["reports"]}
        assert by_name["markov_rosenthal"]["inputs"]["sigma_norm"] == pytest.approx(
            34 / 3, abs=1e-8
        )

    def test_override_changes_constants(self, tmp_path):
        cfg = write_config(tmp_path, "b.json", {
            "params": {
                "theorems": ["crude_rosenthal"],
                "inputs": {"p": 2, "n": 100, "dim_factor": 2, "t_mix": 1,
                           "sup_norm": 1.0},
            },
        })
        out = str(tmp_path / "out")
        assert main(["bounds", "--config", cfg, "--out", out,
                     "--override", "C_R1=-1"]) == 2
        assert main(["bounds", "--config", cfg, "--out", out,
                     "--override", "C_R1=8.7"]) == 0
        report = json.loads((tmp_path / "out" / "bounds_report.json").read_text())
        assert report["constants"]["c_r1"] == 8.7


class TestBoundsGridAndDimensionFree:
    def test_n_grid_emits_one_row_per_n(self, tmp_path):
        cfg = write_config(tmp_path, "g.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "params": {"p": 2, "n_grid": [100, 1000, 10000],
                       "theorems": ["crude_rosenthal"]},
        })
        out = tmp_path / "out"
        assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "bounds_report.json").read_text())
        assert [r["inputs"]["n"] for r in report["reports"]] == [100, 1000, 10000]
        values = [r["value"] for r in report["reports"]]
        assert values[0] > values[1] > values[2]

    def test_dimension_free_toggle(self, tmp_path):
        base = {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "params": {"p": 2, "n": 1000, "theorems": ["markov_rosenthal"]},
        }
        cfg = write_config(tmp_path, "plain.json", base)
        out = tmp_path / "out"
        assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
        plain = json.loads((out / "bounds_report.json").read_text())
        dfree = dict(base)
        dfree["params"] = dict(base["params"], dimension_free=True,
                               upsilon=[[4.0]])
        cfg2 = write_config(tmp_path, "dfree.json", dfree)
        assert main(["bounds", "--config", cfg2, "--out", str(out)]) == 0
        free = json.loads((out / "bounds_report.json").read_text())
        assert free["dimension_free"] is True
        factor = free["certificates"]["dimension_free_factor"]
        assert factor >= 1.0
        # same inputs except the dimension replacement, and the RHS doubles
        assert free["reports"][0]["inputs"]["dim_factor"] == pytest.approx(factor)
        assert free["reports"][0]["value"] >= plain["reports"][0]["value"]

    def test_dimension_free_requires_envelope(self, tmp_path):
        cfg = write_config(tmp_path, "bad.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "params": {"p": 2, "n": 1000, "dimension_free": True,
                       "theorems": ["markov_rosenthal"]},
        })
        assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestExitCodes:
    def test_truncated_json_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"chain": {"Q": [[0.9, 0.1]')
        rc = main(["bounds", "--config", str(path), "--out", str(tmp_path)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_missing_config(self, tmp_path):
        assert main(["bounds", "--config", str(tmp_path / "nope.json")]) == 2

    def test_dimension_mismatch(self, tmp_path):
        cfg = write_config(tmp_path, "bad.json", {
            "chain": TWO_STATE,
            "table": {"scalars": [1.0, -2.0, 3.0]},
            "params": {"theorems": ["crude_rosenthal"]},
        })
        assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_evaluator_precondition_maps_to_exit_two(self, tmp_path, capsys):
        # hoeffding needs delta; a missing parameter is a config problem
        cfg = write_config(tmp_path, "nodelta.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "params": {"p": 2, "n": 100, "theorems": ["hoeffding"]},
        })
        assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "delta" in capsys.readouterr().err

    def test_verification_failure_exit_one(self, tmp_path):
        cfg = write_config(tmp_path, "v.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 5,
            "params": {"checks": [
                {"kind": "chain_inequality", "bound": "markov_rosenthal",
                 "p": 2, "n": 50, "trials": 50},
            ]},
        })
        out = str(tmp_path / "out")
        assert main(["verify", "--config", cfg, "--out", out,
                     "--override", "C_R1=1e-9", "--override", "D1=0",
                     "--override", "D2=0"]) == 1

    def test_verification_pass_exit_zero(self, tmp_path):
        cfg = write_config(tmp_path, "v.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 5,
            "params": {"checks": [
                {"kind": "chain_inequality", "bound": "crude_rosenthal",
                 "p": 2, "n": 50, "trials": 50},
                {"kind": "good_lambda", "steps_scalar": [1.0] * 10,
                 "lam": 2.0, "p": 2, "c": 2, "d": 1},
                {"kind": "bennett", "step_scale": 0.1, "n_steps": 10,
                 "trials": 2000, "eps_grid": [0.6, 1.1]},
            ]},
        })
        out = str(tmp_path / "out")
        assert main(["verify", "--config", cfg, "--out", out]) == 0
        ledger = (tmp_path / "out" / "verify_ledger.csv").read_text()
        assert ledger.splitlines()[0] == "check_id,lhs,rhs,slack,passed,seed,n,p,delta"


class TestDeterminism:
    def test_same_seed_byte_identical_csv(self, tmp_path, monkeypatch):
        cfg_payload = {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 12,
            "params": {"checks": [
                {"kind": "chain_inequality", "bound": "hoeffding",
                 "p": 2, "n": 100, "trials": 120, "delta": 0.1},
                {"kind": "bennett", "step_scale": 0.1, "n_steps": 12,
                 "trials": 3000, "eps_grid": [0.5, 1.0]},
            ]},
        }
        cfg = write_config(tmp_path, "d.json", cfg_payload)
        outputs = []
        for i, threads in enumerate(("1", "4")):
            monkeypatch.setenv("MCBOUND_THREADS", threads)
            out = tmp_path / f"out{i}"
            assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
            outputs.append((out / "verify_ledger.csv").read_bytes())
        assert outputs[0] == outputs[1]


class TestSimulateCommand:
    def test_writes_per_trial_csv(self, tmp_path):
        cfg = write_config(tmp_path, "s.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 4,
            "params": {"n": 60, "trials": 25, "p_grid": [2, 4], "martingale": True},
        })
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        trials_csv = (out / "simulate_trials.csv").read_text().strip().splitlines()
        assert len(trials_csv) == 26
        report = json.loads((out / "simulate_report.json").read_text())
        assert len(report["moments"]) == 2
        assert report["martingale"]["decomposition_max_err"] < 1e-10

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, "s.json", {
            "chain": TWO_STATE,
            "table": SCALAR_TABLE,
            "seed": 4,
            "params": {"n": 40, "trials": 20},
        })
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
            outs.append((out / "simulate_trials.csv").read_bytes())
        assert outs[0] == outs[1]


class TestDemoConfigs:
    """The shipped configs/ demos must stay runnable as documented."""

    def test_bounds_demo(self, tmp_path):
        assert main(["bounds", "--config", str(CONFIG_DIR / "bounds_demo.json"),
                     "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "bounds_report.json").read_text())
        assert len(report["reports"]) == 12  # 3 n values x 4 theorems
        assert report["certificates"]["t_mix"] == 4

    def test_verify_demo(self, tmp_path):
        assert main(["verify", "--config", str(CONFIG_DIR / "verify_demo.json"),
                     "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "verify_report.json").read_text())
        assert report["all_pass"] is True

    def test_apps_demo(self, tmp_path):
        assert main(["apps-pca", "--config", str(CONFIG_DIR / "apps_demo.json"),
                     "--out", str(tmp_path)]) == 0


class TestAppsCommands:
    def test_cov_and_pca(self, tmp_path):
        cfg = write_config(tmp_path, "a.json", {
            "chain": {"Q": [[0.7, 0.1, 0.1, 0.1],
                            [0.1, 0.7, 0.1, 0.1],
                            [0.1, 0.1, 0.7, 0.1],
                            [0.1, 0.1, 0.1, 0.7]]},
            "table": {"vectors": [[2.0, 0.1], [-2.0, -0.1],
                                  [1.5, 0.4], [-1.5, -0.4]]},
            "seed": 8,
            "params": {"n": 200, "trials": 40, "delta": 0.1},
        })
        out = str(tmp_path / "out")
        assert main(["apps-cov", "--config", cfg, "--out", out]) == 0
        report = json.loads((tmp_path / "out" / "apps-cov_report.json").read_text())
        assert report["realized_error_max"] <= report["bernstein_bound"]
        trials_csv = (tmp_path / "out" / "apps-cov_trials.csv").read_text().splitlines()
        assert trials_csv[0] == "trial,n,trials,realized_error,bound,sin2,sin2_bound,dim_factor"
        assert len(trials_csv) == 41
        assert main(["apps-pca", "--config", cfg, "--out", out]) == 0
        report = json.loads((tmp_path / "out" / "apps-pca_report.json").read_text())
        assert "sin2_max" in report
        pca_csv = (tmp_path / "out" / "apps-pca_trials.csv").read_text().splitlines()
        assert len(pca_csv) == 41
