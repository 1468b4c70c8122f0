"""Grid checks, convergence sweeps and searches driven by a run configuration."""

from __future__ import annotations

import itertools
import math
import platform
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Optional

import numpy as np
import scipy

from pbih_cli import __version__
from pbih_cli.config import (
    DEFAULT_TOLERANCE,
    EINSTEIN_TOL,
    GRID_MARGIN,
    MINIMALITY_TOL,
    P_HARMONIC_TOL,
    PROPER_TOL,
)
from pbih_cli.core.catalog import (
    CatalogError,
    NamedConfiguration,
    SystemKind,
    Verdict,
    builtin,
    example2_gamma_text,
)
from pbih_cli.core.conformal import (
    NonMinimalBaseError,
    base_geometry,
    tilde_A_norm_sq,
    tilde_mean_curvature,
)
from pbih_cli.core.expr import (
    ExprDomainError,
    ExpressionError,
    Substituter,
    free_variables,
    parse,
)
from pbih_cli.core.geometry import (
    AmbientKind,
    AmbientNotEinsteinError,
    AmbientSpace,
    DegenerateChartError,
    Immersion,
    Orientation,
    einstein_validation,
    geometry_at,
)
from pbih_cli.core.residuals import (
    ProblemConfig,
    residual_conformal_closed_form,
    residual_einstein,
    residual_general,
    residual_tilde_from_base,
    scaled_route_gap,
)
from pbih_cli.core.runconfig import ConfigError, RunConfig
from pbih_cli.core.search import GammaFamily, SearchOptions, SearchProblem, family, minimize
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)


class RunError(RuntimeError):
    """A run that cannot produce a verdict."""


@dataclass(frozen=True)
class CheckJob:
    """Everything one worker needs to evaluate a grid point."""

    name: str
    immersion: Immersion
    ambient: AmbientSpace
    cfg: ProblemConfig
    system: SystemKind
    domain: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    margin: float = GRID_MARGIN
    tolerance: float = DEFAULT_TOLERANCE
    expect: Optional[Verdict] = None


@dataclass(frozen=True)
class PointRecord:
    u: tuple[float, ...]
    f: float
    A_norm_sq: float
    res_normal: float
    res_tangential_norm: float
    route: str = "direct"
    route_gap: float = 0.0

    def row(self) -> dict[str, Any]:
        values: dict[str, Any] = {f"u{i}": v for i, v in enumerate(self.u, start=1)}
        values.update(
            f=self.f,
            A_norm_sq=self.A_norm_sq,
            res_normal=self.res_normal,
            res_tangential_norm=self.res_tangential_norm,
        )
        return values


@dataclass
class Summary:
    points: int
    degenerate: list[tuple[float, ...]]
    max_normal: float
    max_tangential: float
    mean_normal: float
    mean_tangential: float
    max_abs_f: float
    max_p_tension: float
    max_route_gap: float
    tilde_fallbacks: int
    verdict: Verdict
    expected: Optional[Verdict] = None

    @property
    def passed(self) -> bool:
        return self.expected is None or self.verdict is self.expected

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass
class Report:
    mode: str
    columns: list[str]
    records: list[dict[str, Any]]
    summary: dict[str, Any]
    config: dict[str, Any]
    environment: dict[str, Any]
    extra: dict[str, Any] = field(default_factory=dict)
    passed: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "columns": self.columns,
            "records": self.records,
            "summary": self.summary,
            **self.extra,
            "environment": self.environment,
            "config": self.config,
        }


def environment(workers: int = 1) -> dict[str, Any]:
    return {
        "pbih": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "workers": workers,
        "thresholds": {
            "minimality": MINIMALITY_TOL,
            "p_harmonic": P_HARMONIC_TOL,
            "einstein": EINSTEIN_TOL,
            "properness": PROPER_TOL,
        },
    }


def chart_grid(
    domain: Sequence[Sequence[float]], counts: Sequence[int], margin: float = GRID_MARGIN
) -> list[tuple[float, ...]]:
    """Row-major tensor grid, each axis inset by ``margin`` times its width."""
    if len(domain) != len(counts):
        raise ValueError(f"Need one count per chart variable, got {len(counts)} for {len(domain)}")
    axes = []
    for (lo, hi), n in zip(domain, counts):
        if n < 2:
            raise ValueError(f"Grid counts must be at least 2, got {n}")
        pad = margin * (hi - lo)
        axes.append(np.linspace(lo + pad, hi - pad, int(n)))
    return [tuple(float(v) for v in point) for point in itertools.product(*axes)]


# --- Job resolution ---


def _ambient_from(
    section: Mapping[str, Any], dim: int, p: Optional[float]
) -> Optional[AmbientSpace]:
    if not section:
        return None
    if "builtin" in section:
        if "gamma" in section or "einstein" in section:
            raise ConfigError("[ambient] takes either builtin or gamma/einstein, not both")
        kind = section["builtin"]
        if kind == "euclidean":
            return AmbientSpace.euclidean(dim)
        if kind == "stereographic":
            return AmbientSpace.stereographic(dim)
        if p is None:
            raise ConfigError("The example2 ambient needs [problem].p")
        return AmbientSpace.conformal(dim, example2_gamma_text(p), name="example2")
    if "gamma" not in section:
        raise ConfigError("[ambient] needs builtin or gamma")
    gamma = parse(str(section["gamma"]))
    if p is not None:
        gamma = Substituter({"p": p})(gamma)
    unknown = free_variables(gamma) - set(AmbientSpace.euclidean(dim).coordinates)
    if unknown:
        raise ConfigError(f"gamma uses unknown names: {', '.join(sorted(unknown))}")
    if "einstein" in section:
        einstein = float(section["einstein"])
        return AmbientSpace.declared_einstein(dim, gamma, einstein, name="declared")
    return AmbientSpace.conformal(dim, gamma, name="custom")


def _system_for(ambient: AmbientSpace) -> SystemKind:
    if ambient.kind is AmbientKind.DECLARED_EINSTEIN:
        return SystemKind.EINSTEIN
    if ambient.kind is AmbientKind.CONFORMAL:
        return SystemKind.CONFORMAL
    return SystemKind.GENERAL


def _named(config: RunConfig) -> Optional[NamedConfiguration]:
    if "builtin" not in config.surface:
        return None
    overrides = dict(config.surface.get("parameters", {}))
    if config.p is not None:
        overrides["p"] = config.p
    try:
        return builtin(str(config.surface["builtin"]), overrides)
    except CatalogError as e:
        raise ConfigError(str(e)) from e


def _inline_immersion(config: RunConfig) -> Immersion:
    surface = config.surface
    try:
        return Immersion.from_text(
            [str(v) for v in surface["variables"]],
            [str(c) for c in surface["components"]],
            surface["domain"],
            parameters={k: float(v) for k, v in surface.get("parameters", {}).items()},
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Invalid [surface]: {e}") from e


def resolve_job(config: RunConfig) -> CheckJob:
    """Turn a validated run configuration into a concrete check."""
    named = _named(config)
    if named is not None:
        immersion, p = named.immersion, named.cfg.p
        name = named.name
    else:
        immersion, p = _inline_immersion(config), config.p if config.p is not None else 2.0
        name = "inline"
    m = immersion.m
    try:
        ambient = _ambient_from(config.ambient, m + 1, p)
    except ExpressionError as e:
        raise ConfigError(f"Invalid [ambient]: {e}") from e
    if ambient is None:
        ambient = named.ambient if named is not None else AmbientSpace.euclidean(m + 1)

    if config.system != "auto":
        system = SystemKind(config.system)
    elif named is not None and not config.ambient:
        system = named.system
    else:
        system = _system_for(ambient)
    if system is SystemKind.EINSTEIN and ambient.kind is not AmbientKind.DECLARED_EINSTEIN:
        raise ConfigError("The einstein system needs an ambient declared Einstein")

    counts = config.counts or (named.default_counts if named is not None else (8,) * m)
    if len(counts) == 1 and m > 1:
        counts = counts * m
    if len(counts) != m:
        raise ConfigError(f"[grid].counts needs {m} entries, got {len(counts)}")
    domain = config.bounds or immersion.domain
    if len(domain) != m:
        raise ConfigError(f"[grid].bounds needs {m} intervals, got {len(domain)}")

    tolerance = config.tolerance
    if tolerance is None:
        tolerance = named.tolerance if named is not None else DEFAULT_TOLERANCE
    expect = Verdict(config.expect) if config.expect else None
    if expect is None and named is not None and not config.ambient:
        expect = named.expected
    return CheckJob(
        name=name,
        immersion=immersion,
        ambient=ambient,
        cfg=ProblemConfig(p=p, m=m, orientation=Orientation(config.orientation)),
        system=system,
        domain=tuple(domain),
        counts=tuple(counts),
        margin=config.margin,
        tolerance=tolerance,
        expect=expect,
    )


def job_from_named(
    named: NamedConfiguration,
    counts: Optional[Sequence[int]] = None,
    tolerance: Optional[float] = None,
) -> CheckJob:
    return CheckJob(
        name=named.name,
        immersion=named.immersion,
        ambient=named.ambient,
        cfg=named.cfg,
        system=named.system,
        domain=named.immersion.domain,
        counts=tuple(counts or named.default_counts),
        tolerance=named.tolerance if tolerance is None else tolerance,
        expect=named.expected,
    )


# --- Pointwise evaluation ---


def evaluate_point(job: CheckJob, u: Sequence[float]) -> PointRecord:
    """Residual of the job's system at one chart point.

    Raises DegenerateChartError where the induced metric degenerates.
    """
    cfg = job.cfg
    u = tuple(float(v) for v in u)
    if job.system is SystemKind.CONFORMAL:
        base = base_geometry(job.immersion, job.ambient, u, cfg.orientation)
        closed = residual_conformal_closed_form(base, cfg)
        tilde = residual_tilde_from_base(base, cfg)
        gap = scaled_route_gap(closed, tilde, base.gamma)
        f, a_sq = tilde_mean_curvature(base), tilde_A_norm_sq(base)
        if gap <= job.tolerance:
            return PointRecord(
                u, f, a_sq, closed.normal, closed.tangential_norm, "closed_form", gap
            )
        logger.warning("Closed form and tilde route disagree by %.3e at %s", gap, u)
        return PointRecord(u, f, a_sq, tilde.normal, tilde.tangential_norm, "tilde", gap)

    geo = geometry_at(job.immersion, job.ambient, u, cfg.orientation)
    if job.system is SystemKind.EINSTEIN:
        residual = residual_einstein(geo, cfg, float(job.ambient.scalar_S), job.ambient)
    else:
        residual = residual_general(geo, cfg)
    return PointRecord(u, geo.f, geo.A_norm_sq, residual.normal, residual.tangential_norm)


def _evaluate_or_skip(job: CheckJob, u: tuple[float, ...]) -> Optional[PointRecord]:
    try:
        return evaluate_point(job, u)
    except DegenerateChartError as e:
        logger.warning("%s", e)
        return None


def evaluate_grid(
    job: CheckJob, points: Sequence[tuple[float, ...]], workers: int = 1
) -> tuple[list[PointRecord], list[tuple[float, ...]]]:
    """Records in grid order plus the degenerate points that were skipped."""
    if workers > 1 and len(points) > 1:
        chunk = max(1, math.ceil(len(points) / (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(partial(_evaluate_or_skip, job), points, chunksize=chunk))
    else:
        outcomes = [_evaluate_or_skip(job, u) for u in points]
    records = [r for r in outcomes if r is not None]
    degenerate = [u for u, r in zip(points, outcomes) if r is None]
    if not records:
        raise RunError(f"All {len(points)} grid points of {job.name} are degenerate")
    return records, degenerate


def classify(records: Sequence[PointRecord], cfg: ProblemConfig, tolerance: float) -> Verdict:
    worst = max(max(abs(r.res_normal), r.res_tangential_norm) for r in records)
    tension = cfg.m ** (cfg.p / 2.0) * max(abs(r.f) for r in records)
    if worst > tolerance:
        return Verdict.NEITHER
    if tension <= P_HARMONIC_TOL:
        return Verdict.P_HARMONIC
    return Verdict.PROPER_P_BIHARMONIC


def summarize(
    job: CheckJob, records: Sequence[PointRecord], degenerate: Sequence[tuple[float, ...]]
) -> Summary:
    normals = np.array([abs(r.res_normal) for r in records])
    tangentials = np.array([r.res_tangential_norm for r in records])
    max_abs_f = max(abs(r.f) for r in records)
    return Summary(
        points=len(records),
        degenerate=list(degenerate),
        max_normal=float(normals.max()),
        max_tangential=float(tangentials.max()),
        mean_normal=float(normals.mean()),
        mean_tangential=float(tangentials.mean()),
        max_abs_f=float(max_abs_f),
        max_p_tension=float(job.cfg.m ** (job.cfg.p / 2.0) * max_abs_f),
        max_route_gap=max(r.route_gap for r in records),
        tilde_fallbacks=sum(r.route == "tilde" for r in records),
        verdict=classify(records, job.cfg, job.tolerance),
        expected=job.expect,
    )


def _columns(m: int) -> list[str]:
    return [f"u{i}" for i in range(1, m + 1)] + [
        "f",
        "A_norm_sq",
        "res_normal",
        "res_tangential_norm",
    ]


def validate_einstein_job(job: CheckJob, points: Sequence[tuple[float, ...]]) -> float:
    """Einstein validation of the job's ambient around the surface image of ``points``."""
    images = []
    for u in points:
        try:
            images.append(tuple(job.immersion.point(u)))
        except ExprDomainError:
            continue
    if not images:
        raise RunError(f"The immersion of {job.name} cannot be evaluated on the grid")
    return einstein_validation(job.ambient, points=images)


def check_grid(
    job: CheckJob, counts: Optional[tuple[int, ...]] = None, workers: int = 1
) -> tuple[list[PointRecord], Summary]:
    """Evaluate and summarize the job on the grid with the given counts."""
    points = chart_grid(job.domain, counts or job.counts, job.margin)
    logger.info("Checking %s (%s system) on %d points", job.name, job.system.value, len(points))
    if job.system is SystemKind.EINSTEIN:
        validate_einstein_job(job, points)
    records, degenerate = evaluate_grid(job, points, workers)
    return records, summarize(job, records, degenerate)


def run_check(config: RunConfig, workers: int = 1) -> Report:
    job = resolve_job(config)
    try:
        records, summary = check_grid(job, job.counts, workers)
    except (NonMinimalBaseError, AmbientNotEinsteinError, ExprDomainError) as e:
        raise RunError(str(e)) from e
    return Report(
        mode="check",
        columns=_columns(job.cfg.m),
        records=[r.row() for r in records],
        summary=summary.to_dict(),
        config=config.to_mapping(),
        environment=environment(workers),
        passed=summary.passed,
    )


def run_convergence(config: RunConfig, workers: int = 1) -> Report:
    """The check at counts n, 2n and 4n; records are those of the finest grid."""
    job = resolve_job(config)
    levels = []
    records: list[PointRecord] = []
    try:
        for factor in (1, 2, 4):
            counts = tuple(factor * n for n in job.counts)
            records, summary = check_grid(job, counts, workers)
            levels.append({"counts": list(counts), **summary.to_dict()})
    except (NonMinimalBaseError, AmbientNotEinsteinError, ExprDomainError) as e:
        raise RunError(str(e)) from e
    verdicts = {level["verdict"] for level in levels}
    if len(verdicts) > 1:
        logger.warning("Verdict changes under refinement: %s", [lv["verdict"] for lv in levels])
    return Report(
        mode="convergence",
        columns=_columns(job.cfg.m),
        records=[r.row() for r in records],
        summary=levels[-1],
        config=config.to_mapping(),
        environment=environment(workers),
        extra={"convergence": levels},
        passed=len(verdicts) == 1 and all(level["passed"] for level in levels),
    )


# --- Search ---


def _search_family(section: Mapping[str, Any]) -> GammaFamily:
    if "template" in section:
        bounds = section.get("bounds")
        if not bounds:
            raise ConfigError("[search] with a template needs bounds for its parameters")
        name = str(section.get("family", "custom"))
        return GammaFamily.from_text(name, str(section["template"]), bounds)
    if "family" not in section:
        raise ConfigError("[search] needs family or template")
    base = family(str(section["family"]))
    if "bounds" not in section:
        return base
    bounds = dict(zip(base.parameter_names, base.bounds))
    for name, interval in section["bounds"].items():
        if name not in bounds:
            raise ConfigError(f"Family {base.name} has no parameter {name!r}")
        bounds[name] = tuple(interval)
    return GammaFamily(
        base.name,
        base.template,
        base.parameter_names,
        tuple((float(lo), float(hi)) for lo, hi in bounds.values()),
        base.label,
    )


def run_search(config: RunConfig, workers: int = 1) -> Report:
    section = config.search
    named = _named(config)
    immersion = named.immersion if named is not None else _inline_immersion(config)
    try:
        gamma_family = _search_family(section)
        gamma_family.ambient(immersion.m + 1)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if "p_range" in section:
        p_range = tuple(float(v) for v in section["p_range"])
    elif config.p is not None:
        p_range = (config.p, config.p)
    else:
        p_range = (2.0, 4.0)
    counts = config.counts or (4,) * immersion.m
    if len(counts) == 1:
        counts = counts * immersion.m
    grid = tuple(chart_grid(config.bounds or immersion.domain, counts, config.margin))
    problem = SearchProblem(immersion, gamma_family, grid, Orientation(config.orientation))
    try:
        options = SearchOptions(
            max_iters=int(section.get("max_iters", 200)),
            restarts=int(section.get("restarts", 5)),
            simplex_scale=float(section.get("simplex_scale", 0.1)),
            seed=config.seed,
            tolerance=config.tolerance or DEFAULT_TOLERANCE,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    try:
        result = minimize(problem, p_range, options, workers)
    except NonMinimalBaseError as e:
        raise RunError(f"Search needs a minimal base: {e}") from e
    except ValueError as e:
        raise ConfigError(str(e)) from e
    summary = {
        "family": result.family,
        "label": result.label,
        "best_params": result.best_params,
        "best_p": result.best_p,
        "objective": result.objective,
        "verdict": result.verdict,
        "evaluations": len(result.history),
        "note": result.note,
    }
    return Report(
        mode="search",
        columns=["restart", "evaluation", "objective", "best"],
        records=[asdict(entry) for entry in result.history],
        summary=summary,
        config=config.to_mapping(),
        environment=environment(workers),
        extra={"restarts": [asdict(outcome) for outcome in result.restarts]},
    )
