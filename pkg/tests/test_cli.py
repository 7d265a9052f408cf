import json
import subprocess
import sys
from pathlib import Path

import pytest

from rieszfit import cli
from rieszfit.cli import ConfigError, RunConfig
from rieszfit.report import atomic_write, csv_text, emit_report, svg_line_plot


def run_cli(*args):
    return cli.main([str(a) for a in args])


def test_config_round_trip():
    cfg = RunConfig(mode="harnack", d=2, s=0.3, k=1, epsilon=0.05, target="sin(y1)*y2",
                    schedule=[4, 8, 12], spacing=0.25, seed=7, out="x")
    assert RunConfig.from_toml(cfg.to_toml()) == cfg
    assert RunConfig.from_toml(RunConfig().to_toml()) == RunConfig()


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(n=-0.5, s=0.3).validate()
    with pytest.raises(ConfigError):
        RunConfig(s=1.2).validate()
    with pytest.raises(ConfigError, match="excluded"):
        RunConfig(d=3, n=-1).validate()
    with pytest.raises(ConfigError):
        RunConfig(schedule=[8, 8]).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_toml("bogus = 1")
    assert RunConfig(s=0.25).exponent == -0.5


def test_nested_tables_and_flag_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('d = 1\nn = -0.5\n[fit]\nk = 1\ntarget = "sin(pi*y1)"\nschedule = [8, 16]\n')
    args = cli.build_parser().parse_args(["fit", "--config", str(path), "--s", "0.3", "--k", "0"])
    cfg = cli.config_from_args(args)
    assert cfg.s == 0.3 and cfg.n is None and cfg.k == 0 and cfg.target == "sin(pi*y1)"


def test_fit_zero_target(tmp_path):
    assert run_cli("fit", "--target", "0", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["steps"][-1]["residual_ck"] == 0.0
    assert report["schema_version"] == 1


def test_fit_unmet_writes_report(tmp_path):
    code = run_cli("fit", "--epsilon", "1e-12", "--out", tmp_path)
    assert code == cli.EXIT_UNMET
    lines = (tmp_path / "residual_curve.csv").read_text().splitlines()
    assert lines[0] == "atoms_used,residual_ck,coefficient_norm,rank_used"
    assert len(lines) == 5
    assert (tmp_path / "residual_curve.svg").read_text().startswith("<svg")


def test_fit_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli("fit", "--k", "1", "--target", "sin(pi*y1)", "--out", out) in (0, 3)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "residual_curve.csv").read_bytes() == (b / "residual_curve.csv").read_bytes()


def test_malformed_expression(tmp_path, capsys):
    assert run_cli("fit", "--target", "y1 + $", "--out", tmp_path) == cli.EXIT_CONFIG
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1
    assert "'$'" in err and err.startswith("error: target:")


def test_config_error_exit_code(tmp_path, capsys):
    assert run_cli("fit", "--d", "2", "--n", "0", "--out", tmp_path) == cli.EXIT_CONFIG
    assert "excluded" in capsys.readouterr().err


def test_identities_default(tmp_path):
    assert run_cli("identities", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] and all(c["pass"] for c in report["checks"])


def test_growth_and_harnack(tmp_path):
    assert run_cli("growth", "--k", "2", "--out", tmp_path / "g") == 0
    assert run_cli("harnack", "--out", tmp_path / "h") == 0
    rows = (tmp_path / "h" / "harnack.csv").read_text().splitlines()
    assert len(rows) == 4


def test_verify_constant_kernel_is_a_config_error(tmp_path, capsys):
    assert run_cli("verify", "--n", "1.5", "--out", tmp_path) == cli.EXIT_CONFIG
    assert "2s - d" in capsys.readouterr().err


def test_verify_default(tmp_path):
    assert run_cli("verify", "--out", tmp_path) == 0


def test_emit_report_needs_checks(tmp_path):
    with pytest.raises(ValueError):
        emit_report(tmp_path, "r", {}, [])


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "x.txt", "hello")
    atomic_write(tmp_path / "x.txt", "again")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
    assert (tmp_path / "x.txt").read_text() == "again"


def test_csv_and_svg_shapes():
    text = csv_text(["a", "b"], [(1, 0.5), (2, 0.25)])
    assert text == "a,b\n1,0.5\n2,0.25\n"
    svg = svg_line_plot({"r": ([1, 2, 3], [1e-1, 1e-3, 0.0])}, "t", "x", "y", logy=True)
    assert 'width="800"' in svg and 'height="600"' in svg
    assert svg.count("<circle") == 2
    assert "1e-3" in svg


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rieszfit", "fit", "--target", "0", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
