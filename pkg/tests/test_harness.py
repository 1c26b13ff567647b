"""Config files, presets, trace export, multi-seed orchestration, CLI."""

import json

import numpy as np
import pytest

from loopsim import (ValidationError, load_config, preset, run, save_config,
                     export_trace, run_experiment)
from loopsim.cli import main as cli_main
from loopsim.engine import EventLog
from loopsim.harness import (config_from_dict, config_to_dict,
                             load_checkpoints_csv, report_from_files)
from loopsim.metrics import STAT_FAMILIES, checkpoint_group_stats
from tests.test_engine import small_config


class TestPresets:
    """The preset table pinned field by field."""

    def test_shared_parameters(self):
        for name in ("sampling", "individual", "feature", "ml_model",
                     "outcome", "open_loop"):
            cfg = preset(name)
            cfg.validate()
            assert sum(cfg.sizes.values()) == 1000
            assert cfg.sizes == {"G1": 496, "G2": 504}
            assert cfg.total_steps == 50_000
            assert cfg.threshold == 0.5
            assert cfg.checkpoints == (0, 2000, 10_000, 20_000, 50_000)
            for g in cfg.groups.values():
                assert g.sigma_theta == 0.15
                assert g.sigma_t == 0.1
                assert g.mu_t == 0.0
                assert g.n_train == 500
                assert g.mu_t_train == 0.0
            assert cfg.groups["G1"].mu_r == 0.0

    def test_per_experiment_parameters(self):
        for name in ("sampling", "individual", "outcome", "open_loop"):
            cfg = preset(name)
            assert cfg.groups["G1"].mu_theta == 0.7
            assert cfg.groups["G2"].mu_theta == 0.3
            assert cfg.groups["G1"].sigma_r == 0.0
            assert cfg.groups["G2"].sigma_r == 0.0
            assert cfg.groups["G2"].mu_r == 0.0
            assert cfg.groups["G1"].sigma_t_train == 0.0

        ml = preset("ml_model")
        assert ml.groups["G1"].sigma_t_train == 1.0
        assert ml.groups["G1"].mu_theta == 0.7

        feat = preset("feature")
        assert feat.groups["G1"].mu_theta == 0.5
        assert feat.groups["G2"].mu_theta == 0.5
        assert feat.groups["G1"].sigma_r == 0.1
        assert feat.groups["G2"].sigma_r == 0.1
        assert feat.groups["G2"].mu_r == -0.2
        assert feat.groups["G1"].sigma_t_train == 0.0

    def test_loop_switches(self):
        assert preset("sampling").feedback.enabled_loops() == {"sampling"}
        assert preset("individual").feedback.enabled_loops() == {"individual"}
        assert preset("feature").feedback.enabled_loops() == {"feature"}
        assert preset("ml_model").feedback.enabled_loops() == {"ml_model"}
        assert preset("outcome").feedback.enabled_loops() == {"outcome"}
        assert preset("open_loop").feedback.enabled_loops() == frozenset()
        assert preset("outcome").feedback.delta == 0.2

    def test_open_loop_is_sampling_with_loops_off(self):
        a, b = preset("open_loop"), preset("sampling")
        assert a.groups == b.groups and a.sizes == b.sizes
        assert a.feedback.enabled_loops() == frozenset()

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("nope")


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = preset("feature", seed=11)
        path = tmp_path / "config.json"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg
        assert config_to_dict(loaded) == config_to_dict(cfg)

    def test_unknown_keys_rejected(self):
        data = config_to_dict(preset("sampling"))
        data["bogus"] = 1
        with pytest.raises(ValidationError, match="bogus"):
            config_from_dict(data)
        data = config_to_dict(preset("sampling"))
        data["groups"]["G1"]["bogus_field"] = 1
        with pytest.raises(ValidationError, match="groups.G1"):
            config_from_dict(data)

    def test_negative_sigma_names_field(self):
        data = config_to_dict(preset("sampling"))
        data["groups"]["G2"]["sigma_theta"] = -0.5
        with pytest.raises(ValidationError, match="sigma_theta"):
            config_from_dict(data)

    def test_invalid_json_is_validation_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValidationError, match="invalid JSON"):
            load_config(path)

    def test_missing_required_key(self):
        with pytest.raises(ValidationError, match="total_steps"):
            config_from_dict({"groups": {}, "sizes": {}})


class TestExport:
    def test_empty_trace_headers_only(self, tmp_path):
        trace = run(small_config(total_steps=5, checkpoints=(0,)), seed=0)
        trace.events = EventLog(0)
        path = tmp_path / "events.csv"
        export_trace(trace, "events-csv", path)
        assert path.read_text() == \
            "step,user_id,group,theta,x,y_hat,d,p,y,dataset_size\n"

    def test_events_csv_shape_and_precision(self, tmp_path):
        trace = run(small_config(total_steps=20, checkpoints=(0, 20)), seed=1)
        path = tmp_path / "events.csv"
        export_trace(trace, "events-csv", path)
        lines = path.read_text().splitlines()
        assert len(lines) == 21
        first = lines[1].split(",")
        assert len(first) == 10
        assert float(first[3]) == trace.events.theta[0]  # 17 digits round-trip

    def test_jsonl_round_trip(self, tmp_path):
        trace = run(small_config(total_steps=10, checkpoints=(0,)), seed=2)
        path = tmp_path / "events.jsonl"
        export_trace(trace, "jsonl", path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == 10
        assert rows[3]["step"] == 4
        assert rows[3]["theta"] == trace.events.theta[3]
        assert rows[3]["group"] in ("G1", "G2")

    def test_checkpoints_csv_round_trip(self, tmp_path):
        trace = run(small_config(total_steps=30, checkpoints=(0, 30)), seed=3)
        path = tmp_path / "checkpoints.csv"
        export_trace(trace, "checkpoints-csv", path)
        rows = load_checkpoints_csv(path)
        assert len(rows) == 2 * len(STAT_FAMILIES) * 2
        by_key = {(r["step"], r["group"], r["statistic_family"]): r for r in rows}
        for step in (0, 30):
            for family in STAT_FAMILIES:
                stats = checkpoint_group_stats(trace, step, family)
                for label in ("G1", "G2"):
                    row = by_key[(step, label, family)]
                    s = stats[label]
                    assert row["mean"] == s.mean
                    assert row["q1"] == s.q1
                    assert row["median"] == s.median
                    assert row["q3"] == s.q3
                    assert row["n_outliers"] == len(s.outliers)

    def test_unknown_format_rejected(self, tmp_path):
        trace = run(small_config(total_steps=5, checkpoints=(0,)), seed=0)
        with pytest.raises(ValueError):
            export_trace(trace, "parquet", tmp_path / "x")


class TestRunExperiment:
    def test_deterministic_export_bytes(self, tmp_path):
        cfg = small_config(total_steps=40, checkpoints=(0, 40))
        r1 = run_experiment(cfg, seeds=[7], out_dir=tmp_path / "a")
        r2 = run_experiment(cfg, seeds=[7], out_dir=tmp_path / "b")
        a = (tmp_path / "a" / "seed_7.events.csv").read_bytes()
        b = (tmp_path / "b" / "seed_7.events.csv").read_bytes()
        assert a == b
        assert not r1.failures and not r2.failures

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_config(total_steps=30, checkpoints=(0, 30))
        serial = run_experiment(cfg, seeds=[1, 2], parallelism=1)
        parallel = run_experiment(cfg, seeds=[1, 2], parallelism=2)
        for s in (1, 2):
            assert np.array_equal(serial.traces[s].events.y_hat,
                                  parallel.traces[s].events.y_hat)

    def test_failed_seeds_retained(self, monkeypatch):
        import loopsim.harness as harness
        real = harness._run_one

        def flaky(config, seed):
            if seed == 2:
                raise RuntimeError("boom")
            return real(config, seed)

        monkeypatch.setattr(harness, "_run_one", flaky)
        cfg = small_config(total_steps=20, checkpoints=(0, 20))
        result = run_experiment(cfg, seeds=[1, 2, 3])
        assert sorted(result.traces) == [1, 3]
        assert "boom" in result.failures[2]
        assert result.report["n_seeds"] == 2

    def test_report_contents(self):
        cfg = small_config(total_steps=30, checkpoints=(0, 30))
        result = run_experiment(cfg, seeds=[1, 2])
        rep = result.report
        assert rep["bias_annotation"] == []
        assert rep["n_seeds"] == 2
        assert 0 in rep["checkpoints"] and 30 in rep["checkpoints"]
        g1 = rep["checkpoints"][30]["G1"]
        assert set(g1) == set(STAT_FAMILIES)
        # too short for the 5000-step equilibrium window
        assert rep["equilibrium"]["count"] is None

    def test_needs_seeds(self):
        with pytest.raises(ValueError):
            run_experiment(small_config(), seeds=[])


class TestReportFromFiles:
    def test_reaggregation_matches_live_report(self, tmp_path):
        cfg = small_config(total_steps=30, checkpoints=(0, 30))
        live = run_experiment(cfg, seeds=[4, 5], out_dir=tmp_path)
        rebuilt = report_from_files(tmp_path)
        assert rebuilt["seeds"] == [4, 5]
        assert rebuilt["bias_annotation"] == live.report["bias_annotation"]
        for step in (0, 30):
            for g in ("G1", "G2"):
                for fam in STAT_FAMILIES:
                    a = live.report["checkpoints"][step][g][fam]["mean"]
                    b = rebuilt["checkpoints"][step][g][fam]["mean"]
                    assert a == pytest.approx(b, abs=1e-15)


class TestCli:
    def _write_config(self, tmp_path):
        cfg = small_config(total_steps=25, checkpoints=(0, 25))
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        return path

    def test_run_and_report(self, tmp_path, capsys):
        path = self._write_config(tmp_path)
        out = tmp_path / "out"
        rc = cli_main(["run", "--config", str(path), "--seeds", "1,2",
                       "--out", str(out)])
        assert rc == 0
        assert (out / "seed_1.events.csv").exists()
        assert (out / "seed_2.checkpoints.csv").exists()
        assert (out / "report.json").exists()
        capsys.readouterr()
        rc = cli_main(["report", "--runs", str(out)])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["seeds"] == [1, 2]

    def test_validate_good_and_bad(self, tmp_path, capsys):
        path = self._write_config(tmp_path)
        assert cli_main(["validate", "--config", str(path)]) == 0
        bad = tmp_path / "bad.json"
        data = json.loads(path.read_text())
        data["groups"]["G1"]["sigma_theta"] = -1
        bad.write_text(json.dumps(data))
        assert cli_main(["validate", "--config", str(bad)]) == 1

    def test_preset_dump_round_trips(self, tmp_path):
        out = tmp_path / "feature.json"
        assert cli_main(["preset", "dump", "feature", "--out", str(out)]) == 0
        cfg = load_config(out)
        assert cfg.groups["G1"].mu_theta == 0.5
        assert cfg.groups["G2"].mu_r == -0.2

    def test_preset_list(self, capsys):
        assert cli_main(["preset", "list"]) == 0
        names = capsys.readouterr().out.split()
        assert "sampling" in names and "open_loop" in names

    def test_default_seed_from_environment(self, tmp_path, monkeypatch, capsys):
        path = self._write_config(tmp_path)
        monkeypatch.setenv("LOOPSIM_DEFAULT_SEED", "42")
        rc = cli_main(["run", "--config", str(path)])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["seeds"] == [42]

    def test_runtime_error_exit_code(self, tmp_path, monkeypatch):
        path = self._write_config(tmp_path)
        import loopsim.harness as harness

        def boom(config, seed):
            raise RuntimeError("forced")

        monkeypatch.setattr(harness, "_run_one", boom)
        rc = cli_main(["run", "--config", str(path), "--seeds", "1"])
        assert rc == 2
