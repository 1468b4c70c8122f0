"""Derivative-free search for conformal factors that make a minimal base proper p-biharmonic.

The objective is the grid maximum of the tilde-route residual norms plus a
penalty while the hypersurface stays (nearly) minimal in the new metric. A
search can report candidates or the floor it reached; it never proves that
no conformal factor exists.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from pbih_cli.config import DEFAULT_TOLERANCE, PROPER_TOL
from pbih_cli.core.conformal import base_geometry, require_minimal, tilde_mean_curvature
from pbih_cli.core.expr import Expr, free_variables, parse
from pbih_cli.core.geometry import (
    AmbientSpace,
    DegenerateChartError,
    Immersion,
    Orientation,
    ambient_coordinates,
    geometry_at,
)
from pbih_cli.core.residuals import ProblemConfig, residual_tilde_from_base
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)

NO_PROOF_NOTE = (
    "Search results are numerical candidates or floors on a finite grid; "
    "no_candidate does not mean that no conformal factor exists."
)


@dataclass(frozen=True)
class GammaFamily:
    """A conformal factor template in the ambient coordinates with free parameters."""

    name: str
    template: Expr
    parameter_names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    label: str = "artifact choice"

    def __post_init__(self) -> None:
        if len(self.parameter_names) != len(self.bounds):
            raise ValueError("Every family parameter needs bounds")
        for name, (lo, hi) in zip(self.parameter_names, self.bounds):
            if not lo <= hi:
                raise ValueError(f"Empty bounds for {name}: [{lo}, {hi}]")

    @classmethod
    def from_text(
        cls,
        name: str,
        template: str,
        bounds: Mapping[str, Sequence[float]],
        label: str = "artifact choice",
    ) -> GammaFamily:
        return cls(
            name=name,
            template=parse(template),
            parameter_names=tuple(bounds),
            bounds=tuple((float(lo), float(hi)) for lo, hi in bounds.values()),
            label=label,
        )

    def ambient(self, dim: int) -> AmbientSpace:
        allowed = set(ambient_coordinates(dim)) | set(self.parameter_names) | {"p"}
        unknown = free_variables(self.template) - allowed
        if unknown:
            raise ValueError(
                f"Family {self.name!r} uses undeclared names: {', '.join(sorted(unknown))}"
            )
        return AmbientSpace.conformal(dim, self.template, name=f"family:{self.name}")


FAMILIES: dict[str, GammaFamily] = {
    family.name: family
    for family in (
        GammaFamily.from_text(
            "example1",
            "ln(c1*(p-1)*z + c2*(p-1))/(p-1)",
            {"c1": (0.5, 2.0), "c2": (0.5, 2.0)},
            label="closed-form hyperplane solution (sanity oracle)",
        ),
        GammaFamily.from_text(
            "log_affine_z", "alpha*ln(beta + z^2)", {"alpha": (-2.0, 2.0), "beta": (0.1, 4.0)}
        ),
        GammaFamily.from_text(
            "powers_z", "alpha*z + beta*z^2", {"alpha": (-1.0, 1.0), "beta": (-1.0, 1.0)}
        ),
        GammaFamily.from_text(
            "radial",
            "alpha*ln(beta + x^2 + y^2 + z^2)",
            {"alpha": (-2.0, 2.0), "beta": (0.1, 4.0)},
        ),
    )
}


def family(name: str) -> GammaFamily:
    if name not in FAMILIES:
        raise ValueError(f"Unknown gamma family {name!r}; choose from: {', '.join(FAMILIES)}")
    return FAMILIES[name]


@dataclass(frozen=True)
class SearchProblem:
    base: Immersion
    family: GammaFamily
    grid: tuple[tuple[float, ...], ...]
    orientation: Orientation = Orientation.PLUS

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("Search grid is empty")

    @property
    def ambient(self) -> AmbientSpace:
        return self.family.ambient(self.base.m + 1)


@dataclass(frozen=True)
class SearchOptions:
    max_iters: int = 200
    restarts: int = 5
    simplex_scale: float = 0.1
    seed: int = 0
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self) -> None:
        if self.max_iters < 0 or self.restarts < 1 or self.simplex_scale <= 0.0:
            raise ValueError(f"Invalid search options: {self}")


class SearchVerdict(str, Enum):
    CANDIDATE_FOUND = "candidate_found"
    NO_CANDIDATE = "no_candidate"


@dataclass(frozen=True)
class HistoryEntry:
    restart: int
    evaluation: int
    objective: float
    best: float


@dataclass(frozen=True)
class RestartOutcome:
    restart: int
    start: dict[str, float]
    best_params: dict[str, float]
    best_p: float
    objective: float
    evaluations: int
    message: str


@dataclass
class SearchResult:
    family: str
    label: str
    best_params: dict[str, float]
    best_p: float
    objective: float
    verdict: SearchVerdict
    history: list[HistoryEntry] = field(default_factory=list)
    restarts: list[RestartOutcome] = field(default_factory=list)
    note: str = NO_PROOF_NOTE


@lru_cache(maxsize=16)
def _verified_base(base: Immersion, grid: tuple[tuple[float, ...], ...]) -> bool:
    flat = AmbientSpace.euclidean(base.m + 1)
    for u in grid:
        require_minimal(geometry_at(base, flat, u))
    return True


def objective(
    problem: SearchProblem, params: Mapping[str, float], p: float
) -> float:
    """Grid max of the tilde-route residual norms plus the properness penalty."""
    _verified_base(problem.base, problem.grid)
    for name, (lo, hi) in zip(problem.family.parameter_names, problem.family.bounds):
        if not lo <= params[name] <= hi:
            raise ValueError(f"{name}={params[name]} outside bounds [{lo}, {hi}]")
    cfg = ProblemConfig(p=p, m=problem.base.m, orientation=problem.orientation)
    bindings = {**{k: float(v) for k, v in params.items()}, "p": float(p)}
    ambient = problem.ambient
    worst = 0.0
    largest_f = 0.0
    try:
        for u in problem.grid:
            base = base_geometry(problem.base, ambient, u, problem.orientation, bindings)
            worst = max(worst, residual_tilde_from_base(base, cfg).max_norm)
            largest_f = max(largest_f, abs(tilde_mean_curvature(base)))
    except (ArithmeticError, DegenerateChartError) as e:
        logger.debug("Rejected %s, p=%s: %s", dict(params), p, e)
        return math.inf
    value = worst + max(0.0, PROPER_TOL - largest_f)
    return value if math.isfinite(value) else math.inf


def _layout(
    problem: SearchProblem, p_range: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray, bool]:
    lows = [lo for lo, _ in problem.family.bounds]
    highs = [hi for _, hi in problem.family.bounds]
    free_p = p_range[1] > p_range[0]
    if free_p:
        lows.append(p_range[0])
        highs.append(p_range[1])
    return np.array(lows, dtype=float), np.array(highs, dtype=float), free_p


def _unpack(
    problem: SearchProblem, vector: np.ndarray, p_range: tuple[float, float], free_p: bool
) -> tuple[dict[str, float], float]:
    names = problem.family.parameter_names
    params = {name: float(vector[i]) for i, name in enumerate(names)}
    p = float(vector[len(names)]) if free_p else float(p_range[0])
    return params, p


def _initial_simplex(
    start: np.ndarray, lows: np.ndarray, highs: np.ndarray, scale: float
) -> np.ndarray:
    simplex = [start]
    for i in range(len(start)):
        vertex = start.copy()
        step = scale * (highs[i] - lows[i]) or scale
        vertex[i] = start[i] + step if start[i] + step <= highs[i] else start[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def _run_restart(
    problem: SearchProblem,
    p_range: tuple[float, float],
    options: SearchOptions,
    restart: int,
    start: np.ndarray,
) -> tuple[RestartOutcome, list[float]]:
    lows, highs, free_p = _layout(problem, p_range)
    values: list[float] = []
    best_value = math.inf
    best_point = start

    def fun(vector: np.ndarray) -> float:
        nonlocal best_value, best_point
        point = np.clip(np.asarray(vector, dtype=float), lows, highs)
        params, p = _unpack(problem, point, p_range, free_p)
        value = objective(problem, params, p)
        values.append(value)
        if value < best_value:
            best_value, best_point = value, point.copy()
        return value

    if options.max_iters == 0 or len(start) == 0:
        fun(start)
        message = "zero iteration budget" if options.max_iters == 0 else "nothing to optimize"
    else:
        result = scipy_minimize(
            fun,
            start,
            method="Nelder-Mead",
            bounds=list(zip(lows, highs)),
            options={
                "maxiter": options.max_iters,
                "initial_simplex": _initial_simplex(start, lows, highs, options.simplex_scale),
                "xatol": 1e-12,
                "fatol": 1e-14,
            },
        )
        message = str(result.message)

    params, p = _unpack(problem, best_point, p_range, free_p)
    start_params, start_p = _unpack(problem, start, p_range, free_p)
    outcome = RestartOutcome(
        restart=restart,
        start={**start_params, "p": start_p},
        best_params=params,
        best_p=p,
        objective=objective(problem, params, p),
        evaluations=len(values),
        message=message,
    )
    logger.info(
        "Restart %d: objective %.3e after %d evaluations", restart, outcome.objective, len(values)
    )
    return outcome, values


def minimize(
    problem: SearchProblem,
    p_range: tuple[float, float],
    options: Optional[SearchOptions] = None,
    workers: int = 1,
) -> SearchResult:
    """Nelder-Mead with seeded random restarts; restart 0 starts at the box centre."""
    options = options or SearchOptions()
    lo_p, hi_p = float(p_range[0]), float(p_range[1])
    if lo_p < 2.0 or hi_p < lo_p:
        raise ValueError(f"p range must satisfy 2 <= lo <= hi, got [{lo_p}, {hi_p}]")
    p_range = (lo_p, hi_p)
    lows, highs, _ = _layout(problem, p_range)
    rng = np.random.default_rng(options.seed)
    starts = [(lows + highs) / 2.0]
    for _ in range(1, options.restarts):
        starts.append(rng.uniform(lows, highs))

    jobs = [(problem, p_range, options, k, start) for k, start in enumerate(starts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            runs = list(pool.map(_run_restart, *zip(*jobs)))
    else:
        runs = [_run_restart(*job) for job in jobs]

    history: list[HistoryEntry] = []
    best_so_far = math.inf
    for outcome, values in runs:
        for value in values:
            best_so_far = min(best_so_far, value)
            history.append(HistoryEntry(outcome.restart, len(history), value, best_so_far))
    winner = min((outcome for outcome, _ in runs), key=lambda o: (o.objective, o.restart))
    verdict = (
        SearchVerdict.CANDIDATE_FOUND
        if winner.objective <= options.tolerance
        else SearchVerdict.NO_CANDIDATE
    )
    logger.info(
        "Search over %s: %s (objective %.3e)", problem.family.name, verdict.value, winner.objective
    )
    return SearchResult(
        family=problem.family.name,
        label=problem.family.label,
        best_params=winner.best_params,
        best_p=winner.best_p,
        objective=winner.objective,
        verdict=verdict,
        history=history,
        restarts=[outcome for outcome, _ in runs],
    )
