"""Run configuration files (TOML) and their validation.

Grammar::

    seed = 0
    [surface]             builtin = "<name>"
                          | variables = [..], components = [..], domain = [[lo, hi], ..]
    [surface.parameters]  <name> = <real or string>     # builtin overrides
    [ambient]             gamma = "<expr>" | builtin = "euclidean|stereographic|example2"
                          einstein = <S>                 # optional declaration
    [problem]             p = <real>, orientation = "plus|minus",
                          system = "auto|general|einstein|conformal"
    [grid]                counts = [n1, n2, ..] (each >= 2), bounds = [[lo, hi], ..], margin
    [check]               tolerance = <real>, expect = "p_harmonic|proper_p_biharmonic|neither"
    [search]              family = "<name>" | template = "<expr>", bounds = {name = [lo, hi]},
                          p_range = [lo, hi], max_iters, restarts, simplex_scale
    [output]              path = "<file>", format = "csv|json"

A JSON report written by ``pbih`` is accepted too: its config echo is used.
"""

from __future__ import annotations

import json
import sys
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from pbih_cli.config import GRID_MARGIN
from pbih_cli.core.expr import ExprSyntaxError, parse
from pbih_cli.utils.logger import get_logger
from pbih_cli.utils.validators import (
    validate_choice_or_raise,
    validate_grid_counts_or_raise,
    validate_identifier_or_raise,
    validate_tolerance_or_raise,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = get_logger(__name__)

MODES = ("check", "verify", "search", "convergence")
SYSTEMS = ("auto", "general", "einstein", "conformal")
VERDICTS = ("p_harmonic", "proper_p_biharmonic", "neither")
ORIENTATIONS = ("plus", "minus")
AMBIENT_BUILTINS = ("euclidean", "stereographic", "example2")

_SECTIONS = ("surface", "ambient", "problem", "grid", "check", "search", "output", "seed", "mode")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    mode: str = "check"
    surface: dict[str, Any] = field(default_factory=dict)
    ambient: dict[str, Any] = field(default_factory=dict)
    p: Optional[float] = None
    orientation: str = "plus"
    system: str = "auto"
    counts: Optional[tuple[int, ...]] = None
    bounds: Optional[tuple[tuple[float, float], ...]] = None
    margin: float = GRID_MARGIN
    tolerance: Optional[float] = None
    expect: Optional[str] = None
    search: dict[str, Any] = field(default_factory=dict)
    output_path: Optional[Path] = None
    output_format: str = "json"
    seed: int = 0
    source: Optional[Path] = None

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], mode: Optional[str] = None, source: Optional[Path] = None
    ) -> RunConfig:
        try:
            return cls._from_mapping(data, mode, source)
        except ConfigError:
            raise
        except ExprSyntaxError as e:
            raise ConfigError(f"Invalid expression: {e}") from e
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def _from_mapping(
        cls, data: Mapping[str, Any], mode: Optional[str], source: Optional[Path]
    ) -> RunConfig:
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown section(s): {', '.join(sorted(unknown))}")
        mode = mode or data.get("mode", "check")
        validate_choice_or_raise(mode, MODES, "mode")

        surface = dict(data.get("surface", {}))
        if mode in ("check", "convergence", "search") and not surface:
            raise ConfigError("Missing [surface] section")
        if surface:
            _check_surface(surface)
        ambient = dict(data.get("ambient", {}))
        if "gamma" in ambient:
            parse(str(ambient["gamma"]))
        if "builtin" in ambient:
            validate_choice_or_raise(ambient["builtin"], AMBIENT_BUILTINS, "ambient builtin")

        problem = data.get("problem", {})
        p = problem.get("p")
        if p is not None and float(p) < 2.0:
            raise ConfigError(f"p must be at least 2, got {p}")
        orientation = problem.get("orientation", "plus")
        validate_choice_or_raise(orientation, ORIENTATIONS, "orientation")
        system = problem.get("system", "auto")
        validate_choice_or_raise(system, SYSTEMS, "system")

        grid = data.get("grid", {})
        counts = grid.get("counts")
        if counts is not None:
            counts = tuple(int(n) for n in ([counts] if isinstance(counts, int) else counts))
            validate_grid_counts_or_raise(counts)
        bounds = grid.get("bounds")
        if bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
            if any(not lo < hi for lo, hi in bounds):
                raise ConfigError(f"Grid bounds must satisfy lo < hi: {bounds}")
        margin = float(grid.get("margin", GRID_MARGIN))
        if not 0.0 <= margin < 0.5:
            raise ConfigError(f"Grid margin must lie in [0, 0.5), got {margin}")

        check = data.get("check", {})
        tolerance = check.get("tolerance")
        if tolerance is not None:
            tolerance = float(tolerance)
            validate_tolerance_or_raise(tolerance)
        expect = check.get("expect")
        if expect is not None:
            validate_choice_or_raise(expect, VERDICTS, "expect")

        search = dict(data.get("search", {}))
        if "template" in search:
            parse(str(search["template"]))
            for name in search.get("bounds", {}):
                validate_identifier_or_raise(name, "search parameter")

        output = data.get("output", {})
        output_format = output.get("format", "json")
        validate_choice_or_raise(output_format, ("csv", "json"), "output format")
        path = output.get("path")

        return cls(
            mode=mode,
            surface=surface,
            ambient=ambient,
            p=None if p is None else float(p),
            orientation=orientation,
            system=system,
            counts=counts,
            bounds=bounds,
            margin=margin,
            tolerance=tolerance,
            expect=expect,
            search=search,
            output_path=Path(path) if path else None,
            output_format=output_format,
            seed=int(data.get("seed", 0)),
            source=source,
        )

    def to_mapping(self) -> dict[str, Any]:
        """Config echo: feeding it back to from_mapping reproduces this run."""
        data: dict[str, Any] = {"mode": self.mode, "seed": self.seed}
        if self.surface:
            data["surface"] = self.surface
        if self.ambient:
            data["ambient"] = self.ambient
        problem: dict[str, Any] = {"orientation": self.orientation, "system": self.system}
        if self.p is not None:
            problem["p"] = self.p
        data["problem"] = problem
        grid: dict[str, Any] = {"margin": self.margin}
        if self.counts is not None:
            grid["counts"] = list(self.counts)
        if self.bounds is not None:
            grid["bounds"] = [list(b) for b in self.bounds]
        data["grid"] = grid
        check: dict[str, Any] = {}
        if self.tolerance is not None:
            check["tolerance"] = self.tolerance
        if self.expect is not None:
            check["expect"] = self.expect
        data["check"] = check
        if self.search:
            data["search"] = self.search
        output: dict[str, Any] = {"format": self.output_format}
        if self.output_path is not None:
            output["path"] = str(self.output_path)
        data["output"] = output
        return data


def _check_surface(surface: dict[str, Any]) -> None:
    if "builtin" in surface:
        validate_identifier_or_raise(str(surface["builtin"]), "builtin name")
        extra = set(surface) - {"builtin", "parameters"}
        if extra:
            raise ConfigError(
                f"[surface] with builtin accepts only parameters, got {', '.join(sorted(extra))}"
            )
        return
    for key in ("variables", "components", "domain"):
        if key not in surface:
            raise ConfigError(f"[surface] needs builtin or {key}")
    variables = list(surface["variables"])
    for name in variables:
        validate_identifier_or_raise(str(name), "chart variable")
    components = [str(c) for c in surface["components"]]
    if len(components) != len(variables) + 1:
        raise ConfigError(
            f"[surface] needs {len(variables) + 1} components for {len(variables)} variables"
        )
    for text in components:
        parse(text)
    if len(surface["domain"]) != len(variables):
        raise ConfigError("[surface] needs one domain interval per chart variable")


def load_run_config(path: Path, mode: Optional[str] = None) -> RunConfig:
    """Read a TOML run configuration, or the config echo of a JSON report."""
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"{path}: {e}") from e
        if not isinstance(data, dict) or "config" not in data:
            raise ConfigError(f"{path}: JSON input must be a report with a config echo")
        data = data["config"]
    else:
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as e:
            # message carries "(at line N, column M)"
            raise ConfigError(f"{path}: {e}") from e
        except UnicodeDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    if mode is not None and "mode" in data and data["mode"] != mode:
        logger.info("Config %s declares mode %s; running %s", path, data["mode"], mode)
    config = RunConfig.from_mapping(data, mode=mode, source=path)
    logger.debug("Loaded %s config from %s", config.mode, path)
    return config
