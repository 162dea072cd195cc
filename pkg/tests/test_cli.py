import argparse
import logging

import numpy as np
import pytest

from hmimo.cli import main, parse_estimators, parse_geometry, parse_snr_range
from hmimo.io import read_csv, read_manifest, read_realizations


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


class TestParsers:
    @pytest.mark.parametrize(
        "text,expected",
        [("32,32,1/4", (32, 32, 0.25, 0.0)), ("256,1,0.0625", (256, 1, 0.0625, 0.0)), ("4x4", (4, 4, 0.5, 0.0)), ("2,2,1/2,3", (2, 2, 0.5, 3.0))],
    )
    def test_geometry(self, text, expected):
        g = parse_geometry(text)
        assert (g.n_x, g.n_y, g.spacing_x, g.offset_z) == expected

    @pytest.mark.parametrize("text", ["32", "0,4", "4,4,-1", "4,4,1/0", "a,b"])
    def test_bad_geometry(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_geometry(text)

    def test_snr(self):
        assert parse_snr_range("-10:5:30") == tuple(float(v) for v in range(-10, 31, 5))
        assert parse_snr_range("0:0.1:0.3") == (0.0, 0.1, 0.2, 0.3)
        assert parse_snr_range("1,4") == (1.0, 4.0)

    @pytest.mark.parametrize("text", ["0:0:10", "10:5:0", "1:2", "x:1:2"])
    def test_bad_snr(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_snr_range(text)

    def test_estimators_dedupe(self, caplog):
        with caplog.at_level(logging.WARNING, logger="hmimo"):
            assert parse_estimators("ls,mmse,ls") == ("ls", "mmse")
        assert "duplicate" in caplog.text

    def test_unknown_estimator(self):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_estimators("ls,wiener")


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["acf", "--realizations", "0"],
            ["acf", "--geometry", "4,4,1/4", "--field", "iso2d"],
            ["nmse", "--estimators", "ls,foo"],
            ["nmse", "--snr", "10:5:0"],
            ["nmse", "--truncate-fraction", "0"],
            ["spectrum", "--geometry", "0,1"],
            ["gen", "--format", "xml"],
            ["frobnicate"],
        ],
    )
    def test_exit_two(self, tmp_path, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main([*argv, "--out", str(tmp_path / "x.csv")] if argv[0] != "frobnicate" else argv)
        assert exc.value.code == 2
        assert "error" in capsys.readouterr().err

    def test_unwritable_path(self, tmp_path, capsys):
        code = main(["gen", "--count", "1", "--out", str(tmp_path / "missing" / "h.csv")])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestAcf:
    def test_csv_and_manifest(self, tmp_path):
        code, out = run(tmp_path, "acf", "--geometry", "64,1,1/16", "--realizations", "300", "--plot")
        assert code == 0
        comments, rows = read_csv(out)
        assert list(rows[0]) == ["lag_x", "lag_y", "empirical", "closed_form", "abs_error"]
        assert len(rows) == 17 and float(rows[0]["closed_form"]) == 1.0
        man = read_manifest(out.with_suffix(".manifest"))
        assert man["command"] == "acf" and man["master_seed"] == "0"
        assert man["config.realizations"] == "300"
        assert out.with_suffix(".png").exists()
        assert str(out) in man["outputs"]

    def test_max_lag(self, tmp_path):
        code, out = run(tmp_path, "acf", "--geometry", "64,1,1/16", "--realizations", "10", "--max-lag", "1")
        assert code == 0 and len(read_csv(out)[1]) == 17

    def test_2d_plot(self, tmp_path):
        code, out = run(tmp_path, "acf", "--geometry", "8,8,1/4", "--field", "iso3d", "--realizations", "20", "--plot")
        assert code == 0 and len(read_csv(out)[1]) == 9
        assert out.with_suffix(".png").stat().st_size > 0


class TestNmse:
    ARGS = ["nmse", "--geometry", "8,8,1/4", "--snr", "0:10:20", "--trials", "200"]

    def test_csv(self, tmp_path):
        code, out = run(tmp_path, *self.ARGS, "--plot")
        assert code == 0
        _, rows = read_csv(out)
        assert list(rows[0]) == ["estimator", "snr_db", "nmse_db", "nmse_linear", "analytic_db", "stderr", "trials"]
        assert [r["estimator"] for r in rows[::3]] == ["ls", "mmse", "rsls", "rsls-iso"]
        ls10 = next(r for r in rows if r["estimator"] == "ls" and r["snr_db"] == "10")
        assert float(ls10["analytic_db"]) == pytest.approx(-10.0)
        man = read_manifest(out.with_suffix(".manifest"))
        assert "summary.gap_ls_minus_rsls-iso_db@10dB" in man
        assert man["config.retention"] == "relative:1e-05"

    def test_spacing_preset(self, tmp_path):
        code, out = run(tmp_path, *self.ARGS, "--spacing", "sixteenth", "--estimators", "ls")
        assert code == 0
        assert read_manifest(out.with_suffix(".manifest"))["summary.spacing"] == "0.0625"

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text("trials = 50\nestimators = ls,mmse\nno-renormalize = true\n")
        code, out = run(tmp_path, "--config", str(cfg), *self.ARGS[:-2], "--trials", "20")
        assert code == 0
        man = read_manifest(out.with_suffix(".manifest"))
        assert man["config.trials"] == "20"
        assert man["config.estimators"] == "ls,mmse"
        assert man["config.no_renormalize"] == "True"

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.conf"
        cfg.write_text("no equals sign\n")
        with pytest.raises(SystemExit):
            main(["--config", str(cfg), "spectrum", "--out", str(tmp_path / "s.csv")])


class TestSpectrum:
    def test_summary_lines(self, tmp_path):
        code, out = run(tmp_path, "spectrum", "--geometry", "32,32,1/4", "--plot")
        assert code == 0
        comments, rows = read_csv(out)
        assert len(rows) == 1024
        text = "\n".join(comments)
        assert "effective_rank[relative:1e-05]=359" in text
        assert "asymptotic_rank=201.06" in text and "ratio=0.19634" in text
        vals = np.array([float(r["eigenvalue"]) for r in rows])
        assert vals.sum() == pytest.approx(1024, rel=1e-6)
        assert np.all(np.diff(vals) <= 0)

    def test_single_element(self, tmp_path):
        code, out = run(tmp_path, "spectrum", "--geometry", "1,1,1/4", "--beta", "2.5")
        assert code == 0
        rows = read_csv(out)[1]
        assert len(rows) == 1 and float(rows[0]["eigenvalue"]) == 2.5


class TestGen:
    def test_header_echo_and_reproducible(self, tmp_path):
        argv = ["gen", "--geometry", "16,1,1/4", "--tx-geometry", "4,1,1/2", "--link-distance", "3", "--count", "2", "--seed", "5"]
        _, a = run(tmp_path, *argv, name="a.csv")
        _, b = run(tmp_path, *argv, name="b.csv")
        assert a.read_bytes() == b.read_bytes()
        meta, H = read_realizations(a)
        assert meta["rx"] == "16x1@0.25x0.25" and meta["tx"] == "4x1@0.5x0.5" and meta["rz"] == "3"
        assert H.shape == (2, 16, 4)

    @pytest.mark.parametrize("model", ["planewave", "toeplitz"])
    def test_power_normalization(self, tmp_path, model):
        code, out = run(tmp_path, "gen", "--geometry", "64,1,1/4", "--count", "10000", "--format", "bin", "--model", model)
        assert code == 0
        _, H = read_realizations(out)
        power = np.mean(np.sum(np.abs(H) ** 2, axis=(1, 2)))
        assert abs(power - 64) <= 0.03 * 64

    def test_toeplitz_rejects_tx(self, tmp_path):
        with pytest.raises(SystemExit):
            run(tmp_path, "gen", "--model", "toeplitz", "--tx-geometry", "2,1")


def test_calibrate(tmp_path):
    code, out = run(tmp_path, "calibrate", "--retention", "relative:1e-5", "--retention", "relative:1e-13")
    assert code == 0
    rows = read_csv(out)[1]
    assert list(rows[0]) == ["spacing", "retention", "rank_iso", "keep_count", "ls_minus_mmse_db", "ls_minus_rsls_iso_db"]
    assert [r["rank_iso"] for r in rows] == ["359", "567", "52", "123"]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
