"""Tests for the pbih command line."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from pbih_cli import __version__
from pbih_cli.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, app

runner = CliRunner()

CATENOID = """
[surface]
builtin = "catenoid"

[grid]
counts = [3, 3]
"""


@pytest.fixture
def catenoid_config(tmp_path: Path) -> Path:
    path = tmp_path / "catenoid.toml"
    path.write_text(CATENOID)
    return path


def test_version() -> None:
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == EXIT_OK
    assert f"pbih {__version__}" in result.output


def test_list_builtins() -> None:
    result = runner.invoke(app, ["--list-builtins"])
    assert result.exit_code == EXIT_OK
    for name in ("hyperplane_example1", "catenoid", "stereographic_sphere"):
        assert name in result.output


def test_check_pass(catenoid_config: Path) -> None:
    result = runner.invoke(app, ["check", "--config", str(catenoid_config)])
    assert result.exit_code == EXIT_OK, result.output
    assert "Verdict: p_harmonic" in result.output


def test_check_writes_report(catenoid_config: Path, tmp_path: Path) -> None:
    out = tmp_path / "reports" / "catenoid.json"
    result = runner.invoke(app, ["check", "-c", str(catenoid_config), "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    data = json.loads(out.read_text())
    assert data["summary"]["verdict"] == "p_harmonic"
    assert len(data["records"]) == 9


def test_check_csv_from_suffix(catenoid_config: Path, tmp_path: Path) -> None:
    out = tmp_path / "catenoid.csv"
    result = runner.invoke(app, ["check", "-c", str(catenoid_config), "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    assert out.read_text().startswith("u1,u2,f,A_norm_sq,res_normal,res_tangential_norm")


def test_check_verdict_mismatch(tmp_path: Path) -> None:
    path = tmp_path / "sphere.toml"
    path.write_text(
        '[surface]\nbuiltin = "sphere"\n[grid]\ncounts = [3, 3]\n'
        '[check]\nexpect = "proper_p_biharmonic"\n'
    )
    result = runner.invoke(app, ["check", "-c", str(path)])
    assert result.exit_code == EXIT_FAILED
    assert "expected proper_p_biharmonic" in result.output


@pytest.mark.parametrize(
    "text",
    ['[surface]\nbuiltin = "torus"\n', "[surface\n", '[surface]\nbuiltin = "sphere"\n[extra]\n'],
)
def test_check_config_error(tmp_path: Path, text: str) -> None:
    path = tmp_path / "bad.toml"
    path.write_text(text)
    result = runner.invoke(app, ["check", "-c", str(path)])
    assert result.exit_code == EXIT_CONFIG
    assert "Config error" in result.output


def test_check_missing_config(tmp_path: Path) -> None:
    result = runner.invoke(app, ["check", "-c", str(tmp_path / "absent.toml")])
    assert result.exit_code == EXIT_CONFIG


def test_check_bad_format(catenoid_config: Path) -> None:
    result = runner.invoke(app, ["check", "-c", str(catenoid_config), "--format", "xml"])
    assert result.exit_code == EXIT_CONFIG


def test_check_bad_tolerance(catenoid_config: Path) -> None:
    result = runner.invoke(app, ["check", "-c", str(catenoid_config), "--tol", "0"])
    assert result.exit_code == EXIT_CONFIG


def test_check_all_degenerate(tmp_path: Path) -> None:
    path = tmp_path / "pole.toml"
    path.write_text(
        '[surface]\nbuiltin = "sphere"\n'
        "[grid]\ncounts = [2, 2]\nbounds = [[0.0, 1e-9], [0.0, 1.0]]\nmargin = 0.0\n"
    )
    result = runner.invoke(app, ["check", "-c", str(path)])
    assert result.exit_code == EXIT_FAILED
    assert "degenerate" in result.output


def test_convergence(tmp_path: Path) -> None:
    path = tmp_path / "plane.toml"
    path.write_text('[surface]\nbuiltin = "flat_plane"\n[grid]\ncounts = [2, 2]\n')
    result = runner.invoke(app, ["convergence", "-c", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    assert "8x8" in result.output


def test_search(tmp_path: Path) -> None:
    path = tmp_path / "search.toml"
    path.write_text(
        '[surface]\nvariables = ["x1", "x2"]\ncomponents = ["x1", "x2", "0"]\n'
        "domain = [[-1.0, 1.0], [-1.0, 1.0]]\n"
        "[problem]\np = 3.0\n[grid]\ncounts = [2, 2]\n"
        '[search]\nfamily = "example1"\nmax_iters = 5\nrestarts = 1\n'
    )
    result = runner.invoke(app, ["search", "-c", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    assert "Search verdict: candidate_found" in result.output


def test_verify_filter(tmp_path: Path) -> None:
    out = tmp_path / "verify.json"
    result = runner.invoke(app, ["verify", "--filter", "2", "-o", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    assert "All 1 checks passed" in result.output
    assert json.loads(out.read_text())["summary"]["checks"] == 1


@pytest.mark.parametrize("token", ["42", "a;b"])
def test_verify_bad_filter(token: str) -> None:
    result = runner.invoke(app, ["verify", "--filter", token])
    assert result.exit_code == EXIT_CONFIG


def test_verify_with_config(tmp_path: Path) -> None:
    out = tmp_path / "verify.json"
    path = tmp_path / "verify.toml"
    path.write_text(f'[check]\ntolerance = 0.001\n[output]\npath = "{out.as_posix()}"\n')
    result = runner.invoke(app, ["verify", "--filter", "2", "-c", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    data = json.loads(out.read_text())
    assert data["summary"]["tolerance_override"] == 0.001
    assert data["config"]["check"] == {"tolerance": 0.001}


def test_check_horosphere(tmp_path: Path) -> None:
    path = tmp_path / "horosphere.toml"
    path.write_text(
        '[surface]\nvariables = ["s", "t"]\ncomponents = ["s", "t", "1"]\n'
        "domain = [[-1.0, 1.0], [-1.0, 1.0]]\n"
        '[ambient]\ngamma = "-ln(z)"\neinstein = -6.0\n'
        '[problem]\np = 2.0\nsystem = "einstein"\n[grid]\ncounts = [2, 2]\n'
    )
    result = runner.invoke(app, ["check", "-c", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    assert "Verdict: neither" in result.output
