import json

import pytest

from remest.cli import EXIT_CONFIG, EXIT_NONCONVERGENCE, main

BASE = {
    "cost.lambda": 0.6,
    "cost.energy_scale": 19.61269675983267,
    "channel.p": 0.2,
    "sim.steps": 5_000,
    "sim.seed": 2024,
    "solver.grid_hi": 2.0,
}


def write_config(tmp_path, name="run.json", **overrides):
    cfg = dict(BASE)
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def parse_kv(out):
    pairs = {}
    for line in out.splitlines():
        if "=" in line and not line.startswith("#"):
            k, _, v = line.partition("=")
            pairs[k] = v
    return pairs


class TestSolve:
    def test_reports_constants_and_dp_solution(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out_csv = tmp_path / "table.csv"
        assert main(["solve", "--config", cfg, "--out", str(out_csv)]) == 0
        kv = parse_kv(capsys.readouterr().out)
        assert kv["n0"] == "3"
        assert kv["n1"] == "5"
        assert float(kv["P_s"]) == pytest.approx(0.258689109945, abs=1e-9)
        assert float(kv["p_b0"]) == pytest.approx(0.071682233277, abs=1e-9)
        assert float(kv["rho"]) == pytest.approx(0.574380435551, abs=1e-6)
        assert float(kv["threshold"]) == pytest.approx(0.504258594440,
                                                       abs=1e-6)
        lines = out_csv.read_text().splitlines()
        assert lines[0].startswith("# remest ")
        assert lines[1].startswith("# config_hash=")
        assert lines[2] == "# seed=2024"
        assert lines[3] == "P11,H,action"
        assert len(lines) == 4 + 40

    def test_csv_is_reproducible(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["solve", "--config", cfg, "--out", str(a)]) == 0
        assert main(["solve", "--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestSimulate:
    def test_reports_episode_aggregates(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"policy.kind": "threshold",
                                        "policy.phi": 0.5})
        assert main(["simulate", "--config", cfg]) == 0
        kv = parse_kv(capsys.readouterr().out)
        cost = float(kv["avg_cost"])
        assert cost == pytest.approx(
            0.6 * float(kv["avg_est_var"]) + 0.4 * float(kv["avg_energy"]))

    def test_trace_decisions_match_threshold(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"policy.kind": "threshold",
                                        "policy.phi": 0.5,
                                        "sim.steps": 500})
        out_csv = tmp_path / "trace.csv"
        assert main(["simulate", "--config", cfg, "--trace",
                     "--out", str(out_csv)]) == 0
        lines = [l for l in out_csv.read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "k,P11,Phat11,nu,gamma,gammahat,stage_cost"
        rows = [l.split(",") for l in lines[1:]]
        assert len(rows) == 500
        for prev, cur in zip(rows, rows[1:]):
            assert int(float(cur[3])) == int(float(prev[1]) > 0.5)

    def test_identical_seeds_identical_output(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"policy.kind": "fixed1"})
        main(["simulate", "--config", cfg])
        first = capsys.readouterr().out
        main(["simulate", "--config", cfg])
        assert capsys.readouterr().out == first


class TestSweep:
    def test_sweep_csv(self, tmp_path):
        cfg = write_config(tmp_path, **{"sim.steps": 1_000})
        out_csv = tmp_path / "sweep.csv"
        rc = main(["sweep", "--config", cfg, "--policies", "fixed0,fixed1",
                   "--p-min", "0.1", "--p-max", "0.3", "--p-steps", "3",
                   "--runs", "2", "--out", str(out_csv)])
        assert rc == 0
        lines = [l for l in out_csv.read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "p,policy,avg_cost,avg_est_var,avg_energy,stderr_cost"
        assert len(lines) == 1 + 3 * 2

    def test_empty_policy_list_exits_config(self, tmp_path):
        cfg = write_config(tmp_path)
        rc = main(["sweep", "--config", cfg, "--policies", "",
                   "--runs", "1"])
        assert rc == EXIT_CONFIG


class TestThresholdSearch:
    def test_prints_phi_star(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"spsa.iters": 40, "spsa.starts": 3})
        out_csv = tmp_path / "spsa.csv"
        rc = main(["threshold-search", "--config", cfg,
                   "--out", str(out_csv)])
        assert rc == 0
        kv = parse_kv(capsys.readouterr().out)
        phi = float(kv["phi_star"])
        assert phi == pytest.approx(0.504258594440, abs=0.1)
        lines = [l for l in out_csv.read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "iteration,phi,cost"
        assert len(lines) == 1 + 40


class TestValidate:
    def test_fast_checks_pass(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["validate", "--config", cfg, "--level", "fast"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "invariant checks passed" in out


class TestExitCodes:
    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"model.b": 1.0})
        assert main(["solve", "--config", cfg]) == EXIT_CONFIG
        assert "unknown config keys" in capsys.readouterr().err

    def test_out_of_range_value(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"model.sigma_v2": 0.0})
        assert main(["solve", "--config", cfg]) == EXIT_CONFIG
        assert "out of range" in capsys.readouterr().err

    def test_unstable_model_rejected(self, tmp_path):
        cfg = write_config(tmp_path, **{"model.a": 1.2})
        assert main(["solve", "--config", cfg]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config",
                     str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_nonconvergence_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **{"solver.max_iter": 2})
        assert main(["solve", "--config", cfg]) == EXIT_NONCONVERGENCE
        assert "did not converge" in capsys.readouterr().err
