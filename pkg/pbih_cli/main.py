"""pbih: Typer entrypoint and subcommands."""

import logging
from pathlib import Path
from typing import Annotated, Any, Optional

import typer

from pbih_cli import __version__
from pbih_cli.config import LOG_LEVEL, REPORT_FORMATS, WORKERS
from pbih_cli.core.catalog import list_builtins
from pbih_cli.core.runconfig import ConfigError, RunConfig, load_run_config
from pbih_cli.core.runner import Report, RunError, run_check, run_convergence, run_search
from pbih_cli.core.verify import run_verify
from pbih_cli.utils.logger import get_logger, setup_logging
from pbih_cli.utils.reports import format_real, save_report
from pbih_cli.utils.validators import (
    parse_filter,
    validate_choice_or_raise,
    validate_tolerance_or_raise,
)

setup_logging(level=getattr(logging, LOG_LEVEL, logging.INFO), console=True)
logger = get_logger(__name__)

app = typer.Typer(
    name="pbih",
    help="Check, verify and search p-biharmonic hypersurfaces in conformally flat spaces.",
    no_args_is_help=True,
)

# Exit codes
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

# Colors (use string for compatibility across Typer versions)
GREEN = "green"
RED = "red"
CYAN = "cyan"
DIM = "white"


def _success(msg: str) -> None:
    typer.echo(typer.style(msg, fg=GREEN))


def _error(msg: str) -> None:
    typer.echo(typer.style(msg, fg=RED), err=True)


def _info(msg: str) -> None:
    typer.echo(typer.style(msg, fg=CYAN))


def _step(msg: str) -> None:
    typer.echo(typer.style("  → ", fg=DIM) + msg)


ConfigOption = Annotated[
    Path, typer.Option("--config", "-c", help="TOML run configuration (or a JSON report)")
]
OutOption = Annotated[
    Optional[Path], typer.Option("--out", "-o", help="Report file (default: [output].path)")
]
FormatOption = Annotated[
    Optional[str], typer.Option("--format", "-f", help="Report format: csv or json")
]
TolOption = Annotated[Optional[float], typer.Option("--tol", help="Residual tolerance override")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Random seed override")]
WorkersOption = Annotated[
    int,
    typer.Option(
        "--workers", "-w", help="Worker processes (default: PBIH_WORKERS or the CPU count)"
    ),
]


@app.callback(invoke_without_command=True)
def main_callback(
    show_version: Annotated[bool, typer.Option("--version", "-V")] = False,
    list_configs: Annotated[
        bool, typer.Option("--list-builtins", help="List built-in configurations and exit")
    ] = False,
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False,
) -> None:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if show_version:
        typer.echo(f"pbih {__version__}")
        raise typer.Exit(EXIT_OK)
    if list_configs:
        for entry in list_builtins():
            typer.echo(f"  {entry['name']:<26} {entry['description']}")
            defaults = ", ".join(f"{k}={v}" for k, v in entry["parameters"].items())
            _step(defaults)
        raise typer.Exit(EXIT_OK)


def _load(path: Path, mode: str, tol: Optional[float], seed: Optional[int]) -> RunConfig:
    try:
        config = load_run_config(path, mode=mode)
        if tol is not None:
            validate_tolerance_or_raise(tol)
            config.tolerance = tol
        if seed is not None:
            config.seed = seed
    except (ConfigError, ValueError) as e:
        _error(f"Config error: {e}")
        raise typer.Exit(EXIT_CONFIG) from e
    return config


def _report_format(path: Path, fmt: Optional[str], default: str) -> str:
    if fmt:
        return fmt
    suffix = path.suffix.lstrip(".").lower()
    return suffix if suffix in REPORT_FORMATS else default


def _emit(
    report: Report, out: Optional[Path], fmt: Optional[str], config: Optional[RunConfig] = None
) -> None:
    path = out or (config.output_path if config else None)
    if path is None:
        return
    default = config.output_format if config else "json"
    fmt = _report_format(path, fmt, default) if out else (fmt or default)
    save_report(report.to_dict(), path, fmt)
    _step(f"Report: {path} ({fmt})")


def _check_format(fmt: Optional[str]) -> None:
    if fmt is None:
        return
    try:
        validate_choice_or_raise(fmt, REPORT_FORMATS, "format")
    except ValueError as e:
        _error(str(e))
        raise typer.Exit(EXIT_CONFIG) from e


def _workers(workers: int) -> int:
    return workers if workers > 0 else WORKERS


def _print_summary(summary: dict[str, Any]) -> None:
    for key in ("points", "max_normal", "max_tangential", "max_abs_f", "max_p_tension"):
        if key in summary:
            value = summary[key]
            shown = format_real(value) if isinstance(value, float) else value
            typer.echo(f"  {key + ':':<16} {shown}")
    if summary.get("degenerate"):
        typer.echo(f"  degenerate:      {len(summary['degenerate'])} point(s) skipped")
    if summary.get("tilde_fallbacks"):
        typer.echo(f"  tilde fallbacks: {summary['tilde_fallbacks']}")


def _finish_check(report: Report) -> None:
    summary = report.summary
    verdict = summary["verdict"]
    verdict = getattr(verdict, "value", verdict)
    expected = summary.get("expected")
    expected = getattr(expected, "value", expected)
    if report.passed:
        note = f" (expected {expected})" if expected else ""
        _success(f"Verdict: {verdict}{note}")
        return
    _error(f"Verdict: {verdict}, expected {expected}")
    raise typer.Exit(EXIT_FAILED)


def _run(runner: Any, config: RunConfig, workers: int) -> Report:
    try:
        return runner(config, workers=workers)
    except ConfigError as e:
        _error(f"Config error: {e}")
        raise typer.Exit(EXIT_CONFIG) from e
    except RunError as e:
        _error(f"Failed: {e}")
        raise typer.Exit(EXIT_FAILED) from e
    except Exception as e:
        _error(f"Failed: {e}")
        logger.exception("%s run failed", config.mode)
        raise typer.Exit(EXIT_FAILED) from e


@app.command("check")
def check_cmd(
    config_path: ConfigOption,
    out: OutOption = None,
    fmt: FormatOption = None,
    tol: TolOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = 0,
) -> None:
    """Evaluate residuals on a chart grid and report the verdict."""
    _check_format(fmt)
    config = _load(config_path, "check", tol, seed)
    _info(f"Checking {config_path}")
    report = _run(run_check, config, _workers(workers))
    _print_summary(report.summary)
    _emit(report, out, fmt, config)
    _finish_check(report)


@app.command("convergence")
def convergence_cmd(
    config_path: ConfigOption,
    out: OutOption = None,
    fmt: FormatOption = None,
    tol: TolOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = 0,
) -> None:
    """Repeat the check at grid counts n, 2n and 4n."""
    _check_format(fmt)
    config = _load(config_path, "convergence", tol, seed)
    _info(f"Convergence sweep for {config_path}")
    report = _run(run_convergence, config, _workers(workers))
    for level in report.extra["convergence"]:
        counts = "x".join(str(n) for n in level["counts"])
        verdict = getattr(level["verdict"], "value", level["verdict"])
        worst = format_real(max(level["max_normal"], level["max_tangential"]))
        _step(f"{counts}: max residual {worst}, {verdict}")
    _emit(report, out, fmt, config)
    _finish_check(report)


@app.command("search")
def search_cmd(
    config_path: ConfigOption,
    out: OutOption = None,
    fmt: FormatOption = None,
    tol: TolOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = 0,
) -> None:
    """Nelder-Mead search for conformal factors over a gamma family."""
    _check_format(fmt)
    config = _load(config_path, "search", tol, seed)
    _info(f"Searching with {config_path}")
    report = _run(run_search, config, _workers(workers))
    summary = report.summary
    verdict = getattr(summary["verdict"], "value", summary["verdict"])
    params = ", ".join(f"{k}={format_real(v)}" for k, v in summary["best_params"].items())
    typer.echo(f"  family:    {summary['family']} ({summary['label']})")
    typer.echo(f"  best:      {params}, p={format_real(summary['best_p'])}")
    typer.echo(f"  objective: {format_real(summary['objective'])}")
    _emit(report, out, fmt, config)
    _success(f"Search verdict: {verdict}")
    _step(summary["note"])


@app.command("verify")
def verify_cmd(
    check_filter: Annotated[
        Optional[str],
        typer.Option("--filter", help="Comma-separated check numbers, names or tags"),
    ] = None,
    config_path: Annotated[
        Optional[Path],
        typer.Option(
            "--config", "-c", help="Run configuration supplying [check].tolerance and [output]"
        ),
    ] = None,
    out: OutOption = None,
    fmt: FormatOption = None,
    tol: TolOption = None,
    workers: WorkersOption = 0,
) -> None:
    """Run the built-in verification checks.

    A configuration, when given, only supplies the tolerance override and the
    report destination; the checks themselves are fixed.
    """
    _check_format(fmt)
    try:
        filters = parse_filter(check_filter) if check_filter else None
        if tol is not None:
            validate_tolerance_or_raise(tol)
    except ValueError as e:
        _error(str(e))
        raise typer.Exit(EXIT_CONFIG) from e
    config = _load(config_path, "verify", tol, None) if config_path else None
    if config is not None:
        tol = config.tolerance
    _info("Running verification checks")
    try:
        echo = config.to_mapping() if config is not None else {"mode": "verify"}
        report = run_verify(filters, tol, _workers(workers), config=echo)
    except ValueError as e:
        _error(str(e))
        raise typer.Exit(EXIT_CONFIG) from e
    for record in report.records:
        status = "pass" if record["passed"] else "FAIL"
        line = f"{record['check']:>2} {record['name']:<22} {status}  {record['detail']}"
        if record["passed"]:
            _step(line)
        else:
            _error(f"  → {line}")
    _emit(report, out, fmt, config)
    if not report.passed:
        _error(f"{len(report.summary['failed'])} check(s) failed")
        raise typer.Exit(EXIT_FAILED)
    _success(f"All {report.summary['checks']} checks passed")


if __name__ == "__main__":
    app()
