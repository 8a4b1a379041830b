"""Command-line parsing, validation, dispatch and output determinism."""

import csv
import json
import os
from fractions import Fraction

import pytest

from mvsde.cli import main, parse
from mvsde.errors import ConfigError


class TestParse:
    def test_basic_simulate(self):
        config = parse(["simulate", "--model", "example1", "--delta", "1/1024",
                        "--gamma", "0.5", "-N", "100", "-T", "4",
                        "--seed", "7"])
        assert config.subcommand == "simulate"
        assert config.model == "example1"
        assert config.delta == Fraction(1, 1024)
        assert config.gamma == 0.5
        assert config.n_particles == 100
        assert config.horizon == 4
        assert config.seed == 7

    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError, match="gamma"):
            parse(["simulate", "--delta", "1/4", "--gamma", "0.7"])

    def test_delta_out_of_range(self):
        with pytest.raises(ConfigError, match="delta"):
            parse(["simulate", "--delta", "3/2"])

    def test_decimal_delta_is_exact(self):
        config = parse(["simulate", "--delta", "0.2"])
        assert config.delta == Fraction(1, 5)

    def test_unparseable_delta(self):
        with pytest.raises(ConfigError, match="delta"):
            parse(["simulate", "--delta", "fast"])

    def test_missing_subcommand(self):
        with pytest.raises(ConfigError):
            parse([])

    def test_param_overrides(self):
        config = parse(["oracle-mean", "--delta", "1/64",
                        "--param", "kappa=0", "--param", "a=-2"])
        assert config.params == {"kappa": 0.0, "a": -2.0}

    def test_bad_param(self):
        with pytest.raises(ConfigError, match="param"):
            parse(["oracle-mean", "--param", "kappa"])

    def test_levels_parsing(self):
        config = parse(["convergence", "--finest", "10", "--levels", "9,8,7"])
        assert config.finest_exponent == 10
        assert config.level_exponents == [9, 8, 7]


class TestConfigFile:
    def test_file_values_applied(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": "linear", "delta": "1/64",
                                    "n_particles": 12}))
        config = parse(["simulate", "--config", str(path)])
        assert config.model == "linear"
        assert config.delta == Fraction(1, 64)
        assert config.n_particles == 12

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": "linear", "delta": "1/64"}))
        config = parse(["simulate", "--config", str(path),
                        "--delta", "1/32"])
        assert config.delta == Fraction(1, 32)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"detla": "1/64"}))
        with pytest.raises(ConfigError, match="unknown keys"):
            parse(["simulate", "--config", str(path)])

    def test_float_delta_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"delta": 0.015625}))
        with pytest.raises(ConfigError, match="delta"):
            parse(["simulate", "--config", str(path)])


class TestMain:
    def test_unknown_subcommand_exit_2(self, capsys):
        assert main(["meditate"]) == 2

    def test_config_error_exit_2(self, capsys):
        assert main(["simulate", "--delta", "3/2"]) == 2
        assert "delta" in capsys.readouterr().err

    def test_zero_coefficient_simulate_constant_csv(self, tmp_path, capsys):
        code = main(["simulate", "--model", "linear", "--delta", "1/16",
                     "-N", "6", "-T", "1", "--seed", "0", "--out",
                     str(tmp_path),
                     "--param", "kappa=0", "--param", "a=0", "--param", "b=0",
                     "--param", "c=0", "--param", "sigma1=0",
                     "--param", "sigma2=0"])
        assert code == 0
        csv_files = [p for p in os.listdir(tmp_path) if p.endswith(".csv")]
        assert len(csv_files) == 1
        with open(tmp_path / csv_files[0]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert all(row["value"] == "1.0" for row in rows)
        assert all(row["time"] == "1.0" for row in rows)

    def test_snapshot_rows(self, tmp_path, capsys):
        code = main(["simulate", "--model", "linear", "--delta", "1/16",
                     "-N", "3", "-T", "1", "--seed", "2", "--out",
                     str(tmp_path), "--snapshots", "0,1/2"])
        assert code == 0
        csv_file = next(p for p in os.listdir(tmp_path) if p.endswith(".csv"))
        with open(tmp_path / csv_file) as fh:
            rows = list(csv.DictReader(fh))
        times = sorted({row["time"] for row in rows})
        assert times == ["0.0", "0.5", "1.0"]
        assert len(rows) == 9
        t0_values = {row["value"] for row in rows if row["time"] == "0.0"}
        assert t0_values == {"1.0"}

    def test_snapshot_off_grid_rejected(self, tmp_path):
        assert main(["simulate", "--model", "linear", "--delta", "1/16",
                     "-N", "2", "-T", "1", "--out", str(tmp_path),
                     "--snapshots", "1/3"]) == 2

    def test_untamed_blowup_exits_one(self, tmp_path, capsys):
        code = main(["simulate", "--model", "example1", "--untamed",
                     "--delta", "1/64", "-N", "10", "-T", "8", "--seed", "0",
                     "--out", str(tmp_path)])
        assert code == 1
        assert "blow-up" in capsys.readouterr().err

    def test_convergence_summary_line(self, tmp_path, capsys):
        code = main(["convergence", "--model", "linear", "--finest", "9",
                     "--levels", "8,7,6", "-N", "16", "-T", "1", "--seed",
                     "1", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "slope" in out

    def test_oracle_summary(self, tmp_path, capsys):
        code = main(["oracle-mean", "--delta", "1/256", "-N", "200", "-T",
                     "2", "--seed", "0", "--out", str(tmp_path)])
        assert code == 0
        assert "gap" in capsys.readouterr().out

    def test_moments_untamed_exit_zero(self, tmp_path, capsys):
        # expected blow-ups are reported in the CSV, not raised
        code = main(["moments", "--model", "example1", "--untamed",
                     "--deltas", "1/64", "-N", "10", "-T", "4", "--seeds",
                     "2", "--out", str(tmp_path)])
        assert code == 0
        assert "blowups" in capsys.readouterr().out

    def test_env_var_output_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MVSDE_OUT", str(tmp_path))
        monkeypatch.chdir(tmp_path)
        code = main(["fg-rate", "--sampler", "point", "--n-list", "4,8,16",
                     "--replications", "2", "--seed", "0"])
        assert code == 0
        assert any(name.startswith("fg_rate") for name in os.listdir(tmp_path))


class TestByteDeterminism:
    def test_rerun_and_worker_count_invariance(self, tmp_path):
        args = ["convergence", "--model", "linear", "--finest", "9",
                "--levels", "8,7,6", "-N", "16", "-T", "1", "--seed", "3"]
        outs = []
        for sub, workers in (("a", "1"), ("b", "4"), ("c", "1")):
            out = tmp_path / sub
            code = main(args + ["--out", str(out), "--workers", workers])
            assert code == 0
            csv_file = next(p for p in os.listdir(out) if p.endswith(".csv"))
            outs.append((out / csv_file).read_bytes())
        assert outs[0] == outs[1] == outs[2]
