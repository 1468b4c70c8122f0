"""Tests for run configuration loading and validation."""

import json
from pathlib import Path

import pytest

from pbih_cli.config import CONFIGS_DIR, GRID_MARGIN
from pbih_cli.core.runconfig import ConfigError, RunConfig, load_run_config


def _write(tmp_path: Path, text: str, name: str = "run.toml") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadRunConfig:
    """TOML and JSON inputs."""

    def test_shipped_configs_load(self) -> None:
        paths = sorted(CONFIGS_DIR.glob("*.toml"))
        assert paths
        for path in paths:
            mode = "search" if path.stem.startswith("search") else "check"
            config = load_run_config(path, mode=mode)
            assert config.mode == mode
            assert config.source == path

    def test_values(self) -> None:
        config = load_run_config(CONFIGS_DIR / "hyperplane_example1.toml", mode="check")
        assert config.surface == {
            "builtin": "hyperplane_example1",
            "parameters": {"c1": 1.0, "c2": 1.0, "c": 0.0},
        }
        assert config.p == 3.0
        assert config.counts == (4, 4)
        assert config.tolerance == 1e-9
        assert config.expect == "proper_p_biharmonic"
        assert config.output_path == Path("reports/hyperplane_example1.json")
        assert config.margin == GRID_MARGIN

    def test_syntax_error_reports_line(self, tmp_path: Path) -> None:
        path = _write(tmp_path, '[surface]\nbuiltin "sphere"\n')
        with pytest.raises(ConfigError, match="line 2"):
            load_run_config(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="Cannot read"):
            load_run_config(tmp_path / "absent.toml")

    def test_json_report_echo(self, tmp_path: Path) -> None:
        original = load_run_config(CONFIGS_DIR / "inline_hyperplane.toml", mode="check")
        report = {"mode": "check", "records": [], "config": original.to_mapping()}
        path = _write(tmp_path, json.dumps(report), "report.json")
        reloaded = load_run_config(path, mode="check")
        assert reloaded.to_mapping() == original.to_mapping()
        assert reloaded.orientation == "minus"

    def test_json_without_echo(self, tmp_path: Path) -> None:
        path = _write(tmp_path, '{"records": []}', "report.json")
        with pytest.raises(ConfigError, match="config echo"):
            load_run_config(path)


class TestValidation:
    """Rejected configurations."""

    @pytest.mark.parametrize(
        "data, message",
        [
            ({"surface": {"builtin": "sphere"}, "extras": {}}, "Unknown section"),
            ({}, "Missing \\[surface\\]"),
            ({"surface": {"builtin": "sphere"}, "grid": {"counts": [8, 1]}}, "at least 2"),
            ({"surface": {"builtin": "sphere"}, "problem": {"p": 1.5}}, "p must be at least 2"),
            ({"surface": {"builtin": "sphere"}, "check": {"tolerance": 0.0}}, "Tolerance"),
            ({"surface": {"builtin": "sphere"}, "check": {"expect": "maybe"}}, "Invalid expect"),
            ({"surface": {"builtin": "sphere"}, "problem": {"system": "ricci"}}, "Invalid system"),
            ({"surface": {"builtin": "sphere"}, "ambient": {"gamma": "ln("}}, "Invalid expression"),
            (
                {"surface": {"builtin": "sphere"}, "ambient": {"builtin": "hyperbolic"}},
                "Invalid ambient builtin",
            ),
            (
                {"surface": {"builtin": "sphere"}, "grid": {"bounds": [[1.0, 0.0]]}},
                "lo < hi",
            ),
            ({"surface": {"builtin": "sphere"}, "grid": {"margin": 0.5}}, "margin"),
            ({"surface": {"builtin": "sphere", "radius": 2.0}}, "accepts only parameters"),
            (
                {"surface": {"variables": ["u"], "components": ["u", "0"]}},
                "needs builtin or domain",
            ),
            (
                {
                    "surface": {
                        "variables": ["u", "v"],
                        "components": ["u", "v"],
                        "domain": [[0, 1], [0, 1]],
                    }
                },
                "needs 3 components",
            ),
        ],
    )
    def test_rejected(self, data: dict, message: str) -> None:
        with pytest.raises(ConfigError, match=message):
            RunConfig.from_mapping(data, mode="check")

    def test_verify_needs_no_surface(self) -> None:
        assert RunConfig.from_mapping({}, mode="verify").mode == "verify"

    def test_scalar_count(self) -> None:
        config = RunConfig.from_mapping(
            {"surface": {"builtin": "sphere"}, "grid": {"counts": 5}}, mode="check"
        )
        assert config.counts == (5,)

    def test_mode_argument_wins(self) -> None:
        config = RunConfig.from_mapping(
            {"mode": "search", "surface": {"builtin": "catenoid"}}, mode="convergence"
        )
        assert config.mode == "convergence"

    def test_echo_round_trip(self) -> None:
        data = {
            "seed": 7,
            "surface": {"builtin": "catenoid", "parameters": {"a": 2.0}},
            "problem": {"p": 4.0},
            "grid": {"counts": [3, 5], "bounds": [[0.0, 1.0], [-1.0, 1.0]]},
            "check": {"tolerance": 1e-7, "expect": "p_harmonic"},
            "output": {"path": "out.csv", "format": "csv"},
        }
        config = RunConfig.from_mapping(data, mode="check")
        again = RunConfig.from_mapping(config.to_mapping())
        assert again == config
