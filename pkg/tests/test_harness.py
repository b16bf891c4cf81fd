import json

import pytest
import yaml

from hk_chaos.cli import main
from hk_chaos.harness import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    load_config,
    parse_rho0,
    parse_sigma,
    run,
)

FAST = dict(T=0.05, dt=1e-3, replicas=3)


def write_config(tmp_path, name="cfg.yaml", **kw):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(kw))
    return path


class TestLoadConfig:
    def test_minimal_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, experiment="simulate", n=100))
        assert cfg.R == 1.0
        assert cfg.tau == 0.5
        assert cfg.sigma.family == "constant" and cfg.sigma.a == 1.0
        assert cfg.nu == 0.25
        assert cfg.T == 0.5
        assert cfg.dt == 1e-3
        assert cfg.seed == 42

    def test_dt_must_divide_t(self, tmp_path):
        with pytest.raises(ConfigError, match="divide"):
            load_config(write_config(tmp_path, experiment="simulate", dt=0.3, T=0.5))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config(write_config(tmp_path, experiment="simulate", banana=1))

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown experiment"):
            load_config(write_config(tmp_path, experiment="teleport"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("experiment: simulate\n  bad indent: [\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_round_trip(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                experiment="chaos-weak",
                sigma={"family": "bump", "a": 1.0, "b": 0.2, "L": 2.0},
                rho0={"family": "two_cluster", "centers": [-1.0, 1.0]},
                n_list=[10, 20, 40],
            )
        )
        again = config_from_dict(yaml.safe_load(yaml.safe_dump(cfg.to_dict())))
        assert again == cfg

    def test_nested_sigma_string(self, tmp_path):
        cfg = load_config(write_config(tmp_path, experiment="spde", sigma="bump:1,0.5,2"))
        assert cfg.sigma.family == "bump" and cfg.sigma.b == 0.5


class TestParsers:
    def test_sigma_const(self):
        assert parse_sigma("const:0.5").a == 0.5

    def test_sigma_bump(self):
        s = parse_sigma("bump:1,0.5,2")
        assert (s.a, s.b, s.L) == (1.0, 0.5, 2.0)

    def test_sigma_bad(self):
        with pytest.raises(ConfigError):
            parse_sigma("linear:1")

    def test_rho0_families(self):
        assert parse_rho0("gaussian:0,0.5").std == 0.5
        assert parse_rho0("two_cluster").centers == (-1.0, 1.0)
        assert parse_rho0("bump:1.5").a == 1.5
        with pytest.raises(ConfigError):
            parse_rho0("cauchy")


class TestRunSimulate:
    def test_writes_csv_and_manifest(self, tmp_path):
        cfg = ExperimentConfig(experiment="simulate", n=8, **FAST)
        out = run(cfg, tmp_path / "out")
        lines = (out / "simulate.csv").read_text().splitlines()
        assert lines[0] == "t,particle_id,position"
        assert len(lines) == 1 + 8  # one checkpoint (T) x 8 particles
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 42
        assert (out / "resolved_config.yaml").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = ExperimentConfig(experiment="simulate", n=8, **FAST)
        a = run(cfg, tmp_path / "a")
        b = run(cfg, tmp_path / "b")
        assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()

    def test_checkpoint_rows(self, tmp_path):
        cfg = ExperimentConfig(experiment="simulate", n=4, checkpoints=(0.0, 0.025), **FAST)
        out = run(cfg, tmp_path / "out")
        lines = (out / "simulate.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 4


class TestRunSpde:
    def test_writes_density_and_monitors(self, tmp_path):
        cfg = ExperimentConfig(experiment="spde", kernel="exact", **FAST)
        out = run(cfg, tmp_path / "out")
        lines = (out / "spde.csv").read_text().splitlines()
        assert lines[0] == "t,x,rho"
        assert len(lines) > 100
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["monitors"]["max_mass_drift"] <= 1e-6
        assert not (out / "density_analytic.csv").exists()

    def test_gaussian_benchmark_writes_analytic(self, tmp_path):
        cfg = ExperimentConfig(experiment="spde", kernel="none", **FAST)
        out = run(cfg, tmp_path / "out")
        lines = (out / "density_analytic.csv").read_text().splitlines()
        assert lines[0] == "t,x,rho"
        # analytic and numeric agree closely for the benchmark
        import numpy as np

        num = np.array([float(l.split(",")[2]) for l in (out / "spde.csv").read_text().splitlines()[1:]])
        ana = np.array([float(l.split(",")[2]) for l in lines[1:]])
        assert np.max(np.abs(num - ana)) <= 1e-3

    def test_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(experiment="spde", **FAST)
        a = run(cfg, tmp_path / "a")
        b = run(cfg, tmp_path / "b")
        assert (a / "spde.csv").read_bytes() == (b / "spde.csv").read_bytes()


class TestRunChaos:
    def test_weak_row_count_and_determinism(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="chaos-weak", n_list=(8, 16, 32), checkpoints=(0.025,), **FAST
        )
        a = run(cfg, tmp_path / "a")
        rows = (a / "results.csv").read_text().splitlines()
        # header + 3 N x 2 checkpoints x 3 phis
        assert len(rows) == 1 + 3 * 2 * 3
        rates = (a / "rates.csv").read_text().splitlines()
        assert rates[0] == "experiment,tau,phi,slope,r2"
        assert len(rates) == 1 + 3
        b = run(cfg, tmp_path / "b")
        assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
        assert (a / "rates.csv").read_bytes() == (b / "rates.csv").read_bytes()

    def test_density_distance_runs(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="density-distance", tau_list=(0.4, 0.2, 0.1), **FAST
        )
        out = run(cfg, tmp_path / "out")
        rows = (out / "results.csv").read_text().splitlines()
        assert len(rows) == 1 + 3


class TestRunValidate:
    def test_validation_passes(self, tmp_path):
        cfg = ExperimentConfig(experiment="validate", tau_list=(0.2, 0.1), **FAST)
        out = run(cfg, tmp_path / "out")
        summary = json.loads((out / "validation.json").read_text())
        assert summary["all_passed"]
        assert any(k.startswith("density_") for k in summary["checks"])


class TestCli:
    def test_simulate_flags(self, tmp_path, capsys):
        code = main(
            [
                "simulate",
                "--n", "8",
                "--t-end", "0.05",
                "--dt", "0.001",
                "--kernel", "none",
                "--out", str(tmp_path / "o"),
            ]
        )
        assert code == 0
        assert (tmp_path / "o" / "simulate.csv").exists()

    def test_spde_direct_scheme_guard_is_config_error(self, tmp_path, capsys):
        code = main(
            ["spde", "--scheme", "direct", "--t-end", "0.05", "--dt", "0.001",
             "--out", str(tmp_path / "o")]
        )
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_config_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("experiment: nope\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_chaos_sweep_requires_config(self, tmp_path, capsys):
        assert main(["chaos-sweep", "--out", str(tmp_path / "o")]) == 2

    def test_chaos_sweep_rejects_non_chaos_config(self, tmp_path, capsys):
        path = write_config(tmp_path, experiment="simulate")
        assert main(["chaos-sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_seed_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HK_CHAOS_SEED", "7")
        out1 = tmp_path / "env"
        main(["simulate", "--n", "4", "--t-end", "0.01", "--dt", "0.001",
              "--kernel", "none", "--out", str(out1)])
        out2 = tmp_path / "flag"
        main(["simulate", "--n", "4", "--t-end", "0.01", "--dt", "0.001",
              "--kernel", "none", "--seed", "7", "--out", str(out2)])
        assert (out1 / "simulate.csv").read_bytes() == (out2 / "simulate.csv").read_bytes()
        out3 = tmp_path / "other"
        main(["simulate", "--n", "4", "--t-end", "0.01", "--dt", "0.001",
              "--kernel", "none", "--seed", "8", "--out", str(out3)])
        assert (out1 / "simulate.csv").read_bytes() != (out3 / "simulate.csv").read_bytes()

    def test_kernel_report_json(self, tmp_path, capsys):
        code = main(["kernel-report", "--tau", "0.2", "--samples-out", str(tmp_path / "k.csv")])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["all_passed"]
        lines = (tmp_path / "k.csv").read_text().splitlines()
        assert lines[0] == "x,k_tau,k_sharp"
        assert len(lines) > 100
