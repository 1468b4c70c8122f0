"""Built-in immersions, conformal factors and named configurations."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
from scipy.optimize import brentq

from pbih_cli.core.expr import ExprDomainError, ExpressionError, evaluate, parse
from pbih_cli.core.geometry import (
    AmbientSpace,
    DegenerateChartError,
    Immersion,
    Orientation,
    geometry_at,
)
from pbih_cli.core.residuals import ProblemConfig
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)

ParameterValue = Union[float, str]


class CatalogError(ValueError):
    """Unknown configuration name or parameter outside its domain."""


class Verdict(str, Enum):
    P_HARMONIC = "p_harmonic"
    PROPER_P_BIHARMONIC = "proper_p_biharmonic"
    NEITHER = "neither"


class SystemKind(str, Enum):
    GENERAL = "general"
    EINSTEIN = "einstein"
    CONFORMAL = "conformal"


@dataclass(frozen=True)
class NamedConfiguration:
    name: str
    immersion: Immersion
    ambient: AmbientSpace
    cfg: ProblemConfig
    parameters: dict[str, ParameterValue]
    expected: Verdict
    system: SystemKind
    tolerance: float = 1e-8
    description: str = ""
    default_counts: tuple[int, ...] = field(default=(8, 8))


@dataclass(frozen=True)
class _Entry:
    description: str
    defaults: dict[str, ParameterValue]
    build: Callable[[dict[str, Any]], NamedConfiguration]


def hyperplane_gamma_text(p: float, c1: float, c2: float) -> str:
    """Closed-form conformal factor solving (1-p) gamma'^2 = gamma''."""
    return f"ln({c1!r}*({p!r}-1)*z + {c2!r}*({p!r}-1))/({p!r}-1)"


def example2_gamma_text(p: float) -> str:
    """gamma = ln(z)/(p-1), so e^{2 gamma} = z^{2/(p-1)}."""
    return f"ln(z)/({p!r}-1)"


def _chart_names(m: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, m + 1))


def _dimension(params: dict[str, Any]) -> int:
    m = params["m"]
    if float(m) != int(m) or int(m) < 1:
        raise CatalogError(f"m must be a positive integer, got {m}")
    return int(m)


def _build_hyperplane(params: dict[str, Any]) -> NamedConfiguration:
    p, c1, c2, c = (float(params[k]) for k in ("p", "c1", "c2", "c"))
    m = _dimension(params)
    if c1 * c + c2 <= 0.0:
        raise CatalogError(f"Need c1*c + c2 > 0 for gamma to be defined at z=c, got {c1 * c + c2}")
    names = _chart_names(m)
    immersion = Immersion.from_text(names, list(names) + [repr(c)], [(-1.0, 1.0)] * m)
    ambient = AmbientSpace.conformal(m + 1, hyperplane_gamma_text(p, c1, c2), name="example1")
    return NamedConfiguration(
        name="hyperplane_example1",
        immersion=immersion,
        ambient=ambient,
        cfg=ProblemConfig(p=p, m=m),
        parameters=dict(params),
        expected=Verdict.PROPER_P_BIHARMONIC,
        system=SystemKind.CONFORMAL,
        description="Hyperplane z=c with its closed-form conformal factor ln((p-1)(c1 z+c2))/(p-1)",
        default_counts=(4,) * m,
    )


def _check_profile(profile: str, c: float) -> None:
    if c <= 0.0:
        raise CatalogError(f"Revolution disk needs c > 0 (the upper half-space), got c={c}")
    try:
        expr = parse(profile)
        for x2 in np.linspace(-1.0, 1.0, 9):
            if evaluate(expr, {"x2": float(x2)}) <= 0.0:
                raise CatalogError(f"Profile {profile!r} must be positive, got x2={x2:.3f}")
    except (ExpressionError, ExprDomainError) as e:
        raise CatalogError(f"Invalid profile {profile!r}: {e}") from e


def _build_revolution_disk(params: dict[str, Any]) -> NamedConfiguration:
    p, c = float(params["p"]), float(params["c"])
    profile = str(params["profile"])
    _check_profile(profile, c)
    immersion = Immersion.from_text(
        ("x1", "x2"),
        [f"({profile})*cos(x1)", f"({profile})*sin(x1)", repr(c)],
        [(0.1, 2.0 * math.pi - 0.1), (-1.0, 1.0)],
    )
    return NamedConfiguration(
        name="revolution_disk_example2",
        immersion=immersion,
        ambient=AmbientSpace.conformal(3, example2_gamma_text(p), name="example2"),
        cfg=ProblemConfig(p=p, m=2),
        parameters=dict(params),
        expected=Verdict.PROPER_P_BIHARMONIC,
        system=SystemKind.CONFORMAL,
        description="Planar disk of revolution at height c in (R^3, z^{2/(p-1)} h)",
        default_counts=(8, 8),
    )


def catenoid_immersion(a: float, b: float) -> Immersion:
    if a == 0.0:
        raise CatalogError("Catenoid needs a != 0")
    radius = f"{a!r}*cosh(x2/{a!r} + {b!r})"
    return Immersion.from_text(
        ("x1", "x2"),
        [f"{radius}*cos(x1)", f"{radius}*sin(x1)", "x2"],
        [(0.0, 2.0 * math.pi), (-3.0 * abs(a), 3.0 * abs(a))],
    )


def _build_catenoid(params: dict[str, Any]) -> NamedConfiguration:
    p, a, b = (float(params[k]) for k in ("p", "a", "b"))
    return NamedConfiguration(
        name="catenoid",
        immersion=catenoid_immersion(a, b),
        ambient=AmbientSpace.euclidean(3),
        cfg=ProblemConfig(p=p, m=2),
        parameters=dict(params),
        expected=Verdict.P_HARMONIC,
        system=SystemKind.GENERAL,
        description="Catenoid a cosh(x2/a + b) in Euclidean R^3 (minimal control)",
        default_counts=(8, 8),
    )


def sphere_immersion(radius: float) -> Immersion:
    if radius <= 0.0:
        raise CatalogError(f"Sphere radius must be positive, got {radius}")
    r = repr(radius)
    return Immersion.from_text(
        ("theta", "phi"),
        [
            f"{r}*sin(theta)*cos(phi)",
            f"{r}*sin(theta)*sin(phi)",
            f"{r}*cos(theta)",
        ],
        [(0.0, math.pi), (0.0, 2.0 * math.pi)],
    )


def _build_sphere(params: dict[str, Any]) -> NamedConfiguration:
    p, radius = float(params["p"]), float(params["radius"])
    return NamedConfiguration(
        name="sphere",
        immersion=sphere_immersion(radius),
        ambient=AmbientSpace.euclidean(3),
        cfg=ProblemConfig(p=p, m=2),
        parameters=dict(params),
        expected=Verdict.NEITHER,
        system=SystemKind.GENERAL,
        description="Round sphere in Euclidean R^3 (non-biharmonic control)",
        default_counts=(8, 8),
    )


def _build_flat_plane(params: dict[str, Any]) -> NamedConfiguration:
    p = float(params["p"])
    m = _dimension(params)
    names = _chart_names(m)
    return NamedConfiguration(
        name="flat_plane",
        immersion=Immersion.from_text(names, list(names) + ["0"], [(-1.0, 1.0)] * m),
        ambient=AmbientSpace.euclidean(m + 1),
        cfg=ProblemConfig(p=p, m=m),
        parameters=dict(params),
        expected=Verdict.P_HARMONIC,
        system=SystemKind.GENERAL,
        description="Hyperplane x -> (x, 0) in Euclidean space (totally geodesic control)",
        default_counts=(4,) * m,
    )


def stereographic_sphere_radius(p: float, sample: tuple[float, float] = (1.0, 0.5)) -> float:
    """Euclidean radius of the origin-centred sphere with |f| = 1/sqrt(p-1) in round S^3.

    Located by root finding on the mean curvature computed in the ambient.
    """
    ambient = AmbientSpace.stereographic(3)
    target = 1.0 / math.sqrt(p - 1.0)

    def excess(radius: float) -> float:
        geo = geometry_at(sphere_immersion(radius), ambient, sample)
        return abs(geo.f) - target

    radius = brentq(excess, 1.01, 10.0, xtol=1e-14, rtol=1e-15)
    logger.debug("Round sphere with |f| = %.6f has Euclidean radius %.15f", target, radius)
    return float(radius)


def _build_stereographic_sphere(params: dict[str, Any]) -> NamedConfiguration:
    p = float(params["p"])
    radius = params.get("radius")
    radius = stereographic_sphere_radius(p) if radius in (None, "auto") else float(radius)
    return NamedConfiguration(
        name="stereographic_sphere",
        immersion=sphere_immersion(radius),
        ambient=AmbientSpace.stereographic(3),
        cfg=ProblemConfig(p=p, m=2),
        parameters={**params, "radius": radius},
        expected=Verdict.PROPER_P_BIHARMONIC,
        system=SystemKind.EINSTEIN,
        tolerance=1e-6,
        description="Round sphere with |f| = 1/sqrt(p-1) in the unit S^3 (Einstein control)",
        default_counts=(8, 8),
    )


_REGISTRY: dict[str, _Entry] = {
    "hyperplane_example1": _Entry(
        "Hyperplane z=c, gamma = ln((p-1)(c1 z + c2))/(p-1)",
        {"p": 3.0, "c1": 1.0, "c2": 1.0, "c": 0.0, "m": 2},
        _build_hyperplane,
    ),
    "revolution_disk_example2": _Entry(
        "Disk (f(x2) cos x1, f(x2) sin x1, c) in (R^3, z^{2/(p-1)} h)",
        {"p": 3.0, "c": 1.0, "profile": "1 + x2^2"},
        _build_revolution_disk,
    ),
    "catenoid": _Entry(
        "Catenoid (a cosh(x2/a + b) cos x1, a cosh(x2/a + b) sin x1, x2)",
        {"p": 3.0, "a": 1.0, "b": 0.0},
        _build_catenoid,
    ),
    "sphere": _Entry(
        "Round sphere of the given radius in Euclidean R^3",
        {"p": 2.0, "radius": 1.0},
        _build_sphere,
    ),
    "flat_plane": _Entry(
        "Hyperplane x -> (x, 0) in Euclidean R^{m+1}",
        {"p": 2.0, "m": 2},
        _build_flat_plane,
    ),
    "stereographic_sphere": _Entry(
        "Round sphere with constant f = 1/sqrt(p-1) in the stereographic unit S^3",
        {"p": 2.0, "radius": "auto"},
        _build_stereographic_sphere,
    ),
}

BUILTIN_NAMES = tuple(_REGISTRY)


def builtin(
    name: str, overrides: Optional[Mapping[str, ParameterValue]] = None
) -> NamedConfiguration:
    """Instantiate a named configuration with parameter overrides."""
    entry = _REGISTRY.get(name)
    if entry is None:
        raise CatalogError(
            f"Unknown configuration {name!r}; choose from: {', '.join(BUILTIN_NAMES)}"
        )
    params: dict[str, Any] = dict(entry.defaults)
    for key, value in (overrides or {}).items():
        if key not in entry.defaults:
            raise CatalogError(
                f"{name} has no parameter {key!r}; declared: {', '.join(entry.defaults)}"
            )
        params[key] = value
    try:
        return entry.build(params)
    except CatalogError:
        raise
    except (ValueError, TypeError, ArithmeticError, DegenerateChartError) as e:
        raise CatalogError(f"Cannot build {name} with {params}: {e}") from e


def list_builtins() -> list[dict[str, Any]]:
    """Names, descriptions and default parameters of every configuration."""
    return [
        {"name": name, "description": entry.description, "parameters": dict(entry.defaults)}
        for name, entry in _REGISTRY.items()
    ]


def orientation_for(config: NamedConfiguration, orientation: str) -> NamedConfiguration:
    """The same configuration with a different normal orientation."""
    cfg = ProblemConfig(p=config.cfg.p, m=config.cfg.m, orientation=Orientation(orientation))
    return NamedConfiguration(**{**config.__dict__, "cfg": cfg})
