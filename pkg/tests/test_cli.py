from __future__ import annotations

import math

import numpy as np
import pytest

from lmgqsl import cli
from lmgqsl.errors import ConfigError

FAST = ["--n", "20", "--lambda-step", "0.05", "--no-figures"]


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 40\ntau-e = 3.5  # trailing\nalpha=0.2\n", encoding="utf-8")
    config = cli.parse_config(["qsl-scan", "--config", str(cfg), "--n", "60"])
    assert config["n"] == 60
    assert config["tau_e"] == 3.5
    assert config["alpha"] == 0.2
    assert config["theta"] == pytest.approx(math.pi / 2)
    assert config["frame"] == "critical"


def test_defaults_per_command():
    assert cli.parse_config(["dos"])["n"] == 2000
    assert cli.parse_config(["nm-scan"])["tau_e"] == 8.0
    assert cli.parse_config(["spectrum"])["alpha_step"] == 0.005
    assert cli.parse_config(["quench"])["lambda"] is None


def test_unknown_config_key_is_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bins = 20\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        cli.parse_config(["qsl-scan", "--config", str(cfg)])
    assert info.value.key == "bins"


@pytest.mark.parametrize(
    "argv,key",
    [
        (["quench", "--n", "41"], "n"),
        (["quench", "--alpha", "1.5"], "alpha"),
        (["quench", "--lambda", "-1"], "lambda"),
        (["quench", "--theta", "4"], "theta"),
        (["dos", "--bins", "5"], "bins"),
        (["qsl-scan", "--lambda-step", "0.02"], "lambda_step"),
        (["quench", "--n", "abc"], "n"),
        (["quench", "--format", "xml"], "format"),
    ],
)
def test_validation_names_the_offending_key(argv, key):
    with pytest.raises(ConfigError) as info:
        cli.parse_config(argv)
    assert info.value.key == key


def test_main_exit_code_for_config_error(capsys):
    assert cli.main(["quench", "--n", "41"]) == cli.EXIT_CONFIG
    assert "n:" in capsys.readouterr().err


def test_csv_round_trip(tmp_path):
    assert cli.main(["qsl-scan", *FAST, "--out", str(tmp_path)]) == 0
    table = cli.read_table(tmp_path / "qsl_scan_scan.csv")
    assert table.columns == ["lambda", "tau_qsl", "gamma_inf", "nm"]
    assert table.metadata["command"] == "qsl-scan"
    assert table.metadata["param.n"] == "20"
    assert float(table.metadata["result.argmax_lambda"]) in table.column("lambda")
    np.testing.assert_allclose(table.column("lambda"), cli.ex.uniform_grid(0.05, 2.0, 0.05))


def test_json_matches_csv(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["nm-scan", *FAST, "--tau-e", "2", "--out", str(a)]) == 0
    assert cli.main(["nm-scan", *FAST, "--tau-e", "2", "--format", "json", "--out", str(b)]) == 0
    ta = cli.read_table(a / "nm_scan_scan.csv")
    tb = cli.read_table(b / "nm_scan_scan.json")
    np.testing.assert_array_equal(ta.rows, tb.rows)


def test_rerun_is_byte_identical_including_figure(tmp_path):
    argv = ["quench", "--n", "20", "--tau-e", "1"]
    assert cli.main([*argv, "--out", str(tmp_path / "1")]) == 0
    assert cli.main([*argv, "--out", str(tmp_path / "2")]) == 0
    names = sorted(p.name for p in (tmp_path / "1").iterdir())
    assert "quench.png" in names and not any(n.endswith(".part.png") for n in names)
    for name in names:
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_critical_locus_schema(tmp_path):
    argv = ["critical-locus", "--n", "20", "--alpha-max", "0.16", "--lambda-step", "0.05"]
    assert cli.main([*argv, "--no-figures", "--out", str(tmp_path)]) == 0
    table = cli.read_table(tmp_path / "critical_locus_locus.csv")
    assert table.columns == ["alpha", "lambda_c_numeric", "lambda_c_analytic"]
    np.testing.assert_allclose(table.column("alpha"), [0.0, 0.08, 0.16])
    np.testing.assert_allclose(table.column("lambda_c_analytic"), [2.0, 1.8, 1.6])


def test_spectrum_tables(tmp_path):
    argv = ["spectrum", "--n", "10", "--alpha-step", "0.05", "--no-figures"]
    assert cli.main([*argv, "--out", str(tmp_path)]) == 0
    levels = cli.read_table(tmp_path / "spectrum_levels.csv")
    assert set(np.unique(levels.column("parity"))) == {-1.0, 1.0}
    assert len(levels.rows) == 21 * 11


def test_io_failure_leaves_no_partial_files(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli.main(["dos", "--n", "20", "--resolution", "50", "--out", str(blocker / "sub")])
    assert code == cli.EXIT_IO
    assert list(tmp_path.iterdir()) == [blocker]


def test_write_failure_midway_removes_earlier_tables(tmp_path, monkeypatch):
    config = cli.parse_config(["dos", "--n", "20", "--resolution", "50", "--out", str(tmp_path)])
    tables, opts = cli.compute(config)
    calls = {"n": 0}
    real = cli._atomic_write

    def flaky(path, data, written):
        calls["n"] += 1
        if calls["n"] == 2:
            raise OSError("disk full")
        real(path, data, written)

    monkeypatch.setattr(cli, "_atomic_write", flaky)
    with pytest.raises(OSError):
        cli.write_tables(config, tables, opts)
    assert list(tmp_path.iterdir()) == []
