import json

import pytest

from twostage import cli
from twostage.harness import (ConfigError, build_config, format_report,
                              load_config, run_identification_experiment,
                              run_invariant_suite, run_redundancy_experiment)
from twostage.scheme import clear_codebook_cache


def tiny_raw(**kw):
    raw = {
        "schema_version": 1,
        "family": {"kind": "gaussian-iid"},
        "theta0": [0.0, 1.0],
        "n_grid": [4, 6],
        "trials": 2,
        "seed": 77,
        "plant_theta0": True,
        "eval_blocks": 200,
        "identify_mc": 400,
        "scheme": {"lam": 0.5, "n_candidates": 4, "i_max": 50,
                   "distance_mc": 200, "mde_mc": 300, "train_blocks": 48,
                   "max_initial_size": 8},
    }
    raw.update(kw)
    return raw


class TestConfig:
    def test_malformed_json_reports_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "schema_version": 1,\n  "trials": ,\n}\n')
        with pytest.raises(ConfigError, match=r"line 3"):
            load_config(str(p))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config("/no/such/config.json")

    def test_schema_version_required(self):
        with pytest.raises(ConfigError, match="schema_version"):
            build_config(tiny_raw(schema_version=2))

    def test_missing_key(self):
        raw = tiny_raw()
        del raw["theta0"]
        with pytest.raises(ConfigError, match="theta0"):
            build_config(raw)

    def test_zero_trials_rejected(self):
        with pytest.raises(ConfigError, match="trials"):
            build_config(tiny_raw(trials=0))

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ConfigError, match="n_grid"):
            build_config(tiny_raw(n_grid=[8, 4]))

    def test_semantic_error_surfaced(self):
        with pytest.raises(ConfigError, match="semantic"):
            build_config(tiny_raw(theta0=[0.0, -1.0]))

    def test_round_trip(self, tmp_path):
        p = tmp_path / "ok.json"
        p.write_text(json.dumps(tiny_raw()))
        cfg = load_config(str(p))
        assert cfg.n_grid == (4, 6) and cfg.trials == 2 and cfg.seed == 77


class TestExperiments:
    def test_redundancy_csv_shape(self, tmp_path):
        cfg = build_config(tiny_raw())
        out = tmp_path / "red.csv"
        summary = run_redundancy_experiment(cfg, str(out))
        lines = out.read_text().splitlines()
        assert lines[0] == "# twostage-csv v1"
        assert lines[1].startswith("kind,n,trial,")
        trial_rows = [l for l in lines if l.startswith("trial,")]
        assert len(trial_rows) == len(cfg.n_grid) * cfg.trials
        assert sum(l.startswith("median,") for l in lines) == len(cfg.n_grid)
        assert sum(l.startswith("slope,") for l in lines) == 1
        assert set(summary["medians"]) == {4, 6}

    def test_redundancy_is_byte_deterministic(self, tmp_path):
        cfg = build_config(tiny_raw())
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_redundancy_experiment(cfg, str(a))
        clear_codebook_cache()
        run_redundancy_experiment(build_config(tiny_raw()), str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        cfg = build_config(tiny_raw())
        a, b = tmp_path / "t1.csv", tmp_path / "t2.csv"
        run_redundancy_experiment(cfg, str(a), threads=1)
        run_redundancy_experiment(cfg, str(b), threads=2)
        assert a.read_bytes() == b.read_bytes()

    def test_identification_triangle_columns(self, tmp_path):
        cfg = build_config(tiny_raw())
        out = tmp_path / "id.csv"
        summary = run_identification_experiment(cfg, str(out))
        for row in summary["rows"]:
            lhs = row["d_theta0_theta_hat"]
            rhs = (row["d_theta0_theta_tilde"] + row["d_theta_tilde_theta_hat"]
                   + 3 * row["d_se"])
            assert lhs <= rhs
        lines = out.read_text().splitlines()
        assert len([l for l in lines if l.startswith("trial,")]) == \
            len(cfg.n_grid) * cfg.trials


class TestInvariantSuite:
    def test_all_pass_and_enough_coverage(self):
        results = run_invariant_suite(seed=20240)
        assert len(results) >= 12
        failing = [r.name for r in results if not r.passed]
        assert failing == []

    def test_corrupt_stream_negative_control(self):
        results = run_invariant_suite(seed=20240, corrupt_stream=True)
        by_name = {r.name: r for r in results}
        assert not by_name["two-stage-round-trip"].passed

    def test_report_format(self):
        results = run_invariant_suite(seed=20240)
        text = format_report(results)
        assert text.count("[PASS]") + text.count("[FAIL]") == len(results)
        assert text.splitlines()[-1].endswith("checks passed")


class TestCli:
    def test_invariants_exit_zero(self, capsys):
        assert cli.main(["invariants", "--seed", "20240"]) == 0
        assert "checks passed" in capsys.readouterr().out

    def test_config_error_exit_two(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        rc = cli.main(["redundancy", "--config", str(p),
                       "--out", str(tmp_path / "o.csv")])
        assert rc == 2
        assert "config error" in capsys.readouterr().err

    def test_redundancy_end_to_end(self, tmp_path, capsys):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(tiny_raw(n_grid=[4], trials=1)))
        out = tmp_path / "red.csv"
        rc = cli.main(["redundancy", "--config", str(p), "--out", str(out),
                       "--threads", "1"])
        assert rc == 0 and out.exists()
        assert "median redundancy" in capsys.readouterr().out

    def test_identify_with_overrides(self, tmp_path, capsys):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(tiny_raw(n_grid=[4], trials=1)))
        out = tmp_path / "id.csv"
        rc = cli.main(["identify", "--config", str(p), "--out", str(out),
                       "--seed", "78", "--delta-mode", "practical"])
        assert rc == 0
        assert "identification distance" in capsys.readouterr().out
