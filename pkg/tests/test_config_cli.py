import csv
import json
from importlib.resources import files

import numpy as np
import pytest

from ofdmest.cli import main
from ofdmest.config import (METHOD_PARAMS, config_from_dict, config_to_dict,
                            parse_config)
from ofdmest.errors import ConfigError

IDENTITY = """
methods = perfect, ls
noiseless = true
n_trials = 2
n_symbols = 10
[channel]
model = fixed
fixed_taps = 1
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def write_cfg(tmp_path):
    def _write(text, name="cfg.ini"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


class TestParseConfig:
    def test_minimal_document_gets_defaults(self):
        cfg = parse_config("methods = ls")
        assert cfg.ofdm.n_subcarriers == 64
        assert cfg.ofdm.cp_length == 16
        assert cfg.ofdm.constellation.kind == "QAM16"
        assert cfg.ofdm.pilots.kind == "comb" and cfg.ofdm.pilots.spacing == 4
        assert cfg.snr_grid_db == (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
        assert cfg.n_trials == 500
        assert cfg.method_names == ["ls"]

    def test_bracketed_method_list(self):
        assert parse_config("methods = [ls, ml]").method_names == ["ls", "ml"]

    def test_cp_not_below_n_names_both_keys(self):
        with pytest.raises(ConfigError) as info:
            parse_config("methods = ls\n[ofdm]\nn_subcarriers = 16\ncp_length = 16")
        assert "ofdm.cp_length" in info.value.key and "ofdm.n_subcarriers" in info.value.key

    def test_spacing_must_divide(self):
        with pytest.raises(ConfigError, match="spacing must divide N"):
            parse_config("methods = ls\n[ofdm]\npilot_spacing = 3")

    @pytest.mark.parametrize("text, key", [
        ("methods = ls\n[ofdm]\nbogus = 1", "ofdm.bogus"),
        ("methods = ls\n[nowhere]\nx = 1", "nowhere"),
        ("methods = ls\n[methods.lms]\nstep = 0.1", "methods.lms"),
        ("methods = ls, wiener", "sweep.methods"),
        ("methods = ls\nn_trials = 0", "sweep.n_trials"),
        ("methods = ls\n[ofdm]\nn_subcarriers = 48", "ofdm.n_subcarriers"),
        ("methods = ls\n[channel]\npdp_taps = 20", "channel / ofdm.cp_length"),
        ("methods = ls\nmetrics = ber, snr", "sweep.metrics"),
    ])
    def test_rejections_name_the_key(self, text, key):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.key == key

    def test_parse_error_reports_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("methods = ls\n[ofdm]\nthis line has no separator")

    def test_override_applies_before_validation(self):
        cfg = parse_config("methods = ls", ["sweep.n_trials=7", "ofdm.n_subcarriers=32"])
        assert cfg.n_trials == 7 and cfg.ofdm.n_subcarriers == 32
        with pytest.raises(ConfigError):
            parse_config("methods = ls", ["ofdm.pilot_spacing=3"])

    def test_snr_range_and_list(self):
        assert parse_config("methods = ls\nsnr_db = 0:10:2.5").snr_grid_db == (0, 2.5, 5, 7.5, 10)
        assert parse_config("methods = ls\nsnr_db = 3, -1").snr_grid_db == (3, -1)

    def test_no_pilots_only_for_perfect(self):
        parse_config("methods = perfect\n[ofdm]\npilot_kind = none")
        with pytest.raises(ConfigError):
            parse_config("methods = perfect, ls\n[ofdm]\npilot_kind = none")

    def test_dict_round_trip(self):
        cfg = parse_config("""
methods = ls, lmmse, kalman
[methods.kalman]
variant = vector
[channel]
pdp = custom
pdp_delays = 0, 2, 5
pdp_powers = 3, 2, 1
""")
        d = config_to_dict(cfg)
        assert config_from_dict(json.loads(json.dumps(d))) == cfg

    def test_shipped_example_parses_and_lists_every_key(self):
        text = files("ofdmest").joinpath("configs/example.ini").read_text()
        cfg = parse_config(text)
        assert set(cfg.method_names) == set(METHOD_PARAMS)


class TestSweepCommand:
    def test_identity_noiseless_gives_zero_ber(self, write_cfg, tmp_path):
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(write_cfg(IDENTITY)), "--out", str(out),
                     "--workers", "1", "--svg", "off"]) == 0
        rows = read_csv(out / "results.csv")
        assert rows[0] == ["snr_db", "method", "ber", "mse", "rmse", "trials", "bit_count"]
        assert all(float(r[2]) == 0 for r in rows[1:])
        assert sorted(p.name for p in out.iterdir()) == [
            "plot_ber.csv", "plot_mse.csv", "plot_rmse.csv", "results.csv", "results.json"]

    def test_rerun_is_identical(self, write_cfg, tmp_path):
        cfg = write_cfg(IDENTITY + "[sweep]\nnoiseless = false\nsnr_db = 0, 10\n")
        for d in ("a", "b"):
            assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / d),
                         "--workers", "2"]) == 0
        for p in sorted((tmp_path / "a").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name

    def test_plot_table_shape(self, write_cfg, tmp_path):
        cfg = write_cfg("methods = ls, ml\nn_trials = 1\nn_symbols = 5\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--workers", "1", "--svg", "off"]) == 0
        rows = read_csv(tmp_path / "o" / "plot_mse.csv")
        assert len(rows) == 8
        assert {len(r) for r in rows} == {3}
        assert rows[0] == ["snr_db", "ls", "ml"]

    def test_svg_written(self, write_cfg, tmp_path):
        cfg = write_cfg(IDENTITY + "[sweep]\nmetrics = ber\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--workers", "1"]) == 0
        svg = (tmp_path / "o" / "plot_ber.svg").read_text()
        assert svg.lstrip().startswith("<?xml") and "<svg" in svg

    def test_seed_flag_changes_results(self, write_cfg, tmp_path):
        cfg = write_cfg("methods = ls\nn_trials = 2\nn_symbols = 5\nsnr_db = 10\n")
        for seed in ("1", "2"):
            assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / seed),
                         "--seed", seed, "--workers", "1", "--svg", "off"]) == 0
        assert ((tmp_path / "1" / "results.csv").read_bytes()
                != (tmp_path / "2" / "results.csv").read_bytes())
        echo = json.loads((tmp_path / "2" / "results.json").read_text())
        assert echo["config"]["sweep"]["master_seed"] == 2

    def test_config_error_exit_2_and_nothing_left(self, write_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_cfg("methods = ls\n[ofdm]\npilot_spacing = 3\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()
        assert "spacing must divide N" in capsys.readouterr().err

    def test_invalid_override_exit_2(self, write_cfg, tmp_path):
        assert main(["sweep", "--config", str(write_cfg(IDENTITY)), "--out",
                     str(tmp_path / "o"), "--override", "sweep.n_trials=0"]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "nope.ini"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_runtime_error_exit_3_with_rollback(self, write_cfg, tmp_path, capsys):
        # a noiseless vector Kalman update has a singular innovation covariance
        out = tmp_path / "out"
        out.mkdir()
        (out / "keep.txt").write_text("mine")
        cfg = write_cfg(IDENTITY.replace("perfect, ls", "kalman")
                        + "[methods.kalman]\nvariant = vector\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--workers", "1"]) == 3
        assert [p.name for p in out.iterdir()] == ["keep.txt"]
        assert "kalman failed" in capsys.readouterr().err

    def test_writes_only_inside_out(self, write_cfg, tmp_path, monkeypatch):
        cfg = write_cfg(IDENTITY)
        monkeypatch.chdir(tmp_path)
        before = {p.name for p in tmp_path.iterdir()}
        assert main(["sweep", "--config", str(cfg), "--out", "res", "--workers", "1"]) == 0
        assert {p.name for p in tmp_path.iterdir()} - before == {"res"}


class TestProbeCommand:
    def run(self, write_cfg, tmp_path, doppler, symbols):
        cfg = write_cfg(f"[channel]\ndoppler_rate = {doppler}\nprobe_symbols = {symbols}\n")
        assert main(["probe-channel", "--config", str(cfg), "--out", str(tmp_path / "p"),
                     "--svg", "off"]) == 0
        rows = read_csv(tmp_path / "p" / "probe.csv")
        assert rows[0] == ["lag", "empirical_autocorr_real", "j0_reference"]
        return np.array(rows[1:], dtype=float)

    def test_static_channel(self, write_cfg, tmp_path):
        data = self.run(write_cfg, tmp_path, 0.0, 2000)
        np.testing.assert_array_equal(data[:, 0], np.arange(21))
        np.testing.assert_allclose(data[:, 1], 1.0, atol=1e-9)
        np.testing.assert_allclose(data[:, 2], 1.0)

    @pytest.mark.slow
    def test_matches_j0(self, write_cfg, tmp_path):
        data = self.run(write_cfg, tmp_path, 0.05, 100_000)
        assert abs(data[0, 1] - 1) <= 0.01
        assert np.max(np.abs(data[:, 1] - data[:, 2])) <= 0.02


class TestEstimateOnceCommand:
    def run(self, write_cfg, tmp_path, text, *extra):
        out = tmp_path / "e"
        code = main(["estimate-once", "--config", str(write_cfg(text)), "--out", str(out),
                     "--svg", "off", *extra])
        return code, (read_csv(out / "estimate.csv") if code == 0 else None)

    def test_identity_ls(self, write_cfg, tmp_path):
        code, rows = self.run(write_cfg, tmp_path, IDENTITY.replace("perfect, ls", "ls"))
        assert code == 0
        assert rows[0] == ["k", "H_true_re", "H_true_im", "H_hat_re", "H_hat_im", "abs_err"]
        assert len(rows) == 65
        assert max(float(r[5]) for r in rows[1:]) <= 1e-10

    def test_ml_noiseless_fading(self, write_cfg, tmp_path):
        text = ("methods = ml\nnoiseless = true\nn_symbols = 5\n"
                "[ofdm]\npilot_kind = block\n[methods.ml]\nn_taps = 4\n")
        code, rows = self.run(write_cfg, tmp_path, text)
        assert code == 0 and len(rows) == 65
        assert max(float(r[5]) for r in rows[1:]) <= 1e-10

    def test_needs_exactly_one_method(self, write_cfg, tmp_path):
        assert self.run(write_cfg, tmp_path, IDENTITY)[0] == 2

    def test_symbol_out_of_range(self, write_cfg, tmp_path):
        text = IDENTITY.replace("perfect, ls", "ls")
        assert self.run(write_cfg, tmp_path, text, "--symbol", "10")[0] == 2


def test_list_methods(capsys):
    assert main(["list-methods"]) == 0
    out = capsys.readouterr().out
    for name in METHOD_PARAMS:
        assert name in out


def test_help_lists_keys(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    assert "ofdm.pilot_spacing" in out and "methods.kalman.mode" in out
