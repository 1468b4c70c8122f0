"""p-biharmonicity residuals: the left-hand sides of each characterization.

A hypersurface is p-biharmonic on a grid when every residual norm vanishes
there up to tolerance. Tangential residuals are chart components; their
norms use the metric induced by the ambient being tested.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pbih_cli.config import CONSTANCY_TOL, DEFAULT_TOLERANCE, EINSTEIN_TOL, P_HARMONIC_TOL
from pbih_cli.core.conformal import base_geometry, require_minimal, tilde_quantities
from pbih_cli.core.expr import Differentiator, Evaluator, Expr, parse
from pbih_cli.core.geometry import (
    AmbientNotEinsteinError,
    AmbientSpace,
    GeometryAtPoint,
    Immersion,
    Orientation,
    einstein_validation,
    geometry_at,
)
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)


class ConstancyError(ValueError):
    """gamma or eta(gamma) varies along M where constants are required."""


@dataclass(frozen=True)
class ProblemConfig:
    p: float
    m: int
    orientation: Orientation = Orientation.PLUS

    def __post_init__(self) -> None:
        if not self.p >= 2.0:
            raise ValueError(f"p must be at least 2, got {self.p}")
        if self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        object.__setattr__(self, "orientation", Orientation(self.orientation))


@dataclass(frozen=True)
class SystemResidual:
    normal: float
    tangential: np.ndarray
    tangential_norm: float

    @property
    def normal_norm(self) -> float:
        return abs(self.normal)

    @property
    def max_norm(self) -> float:
        return max(self.normal_norm, self.tangential_norm)


@dataclass(frozen=True)
class PTension:
    norm: float
    is_p_harmonic: bool


@dataclass(frozen=True)
class UmbilicResult:
    beta_solutions: tuple[float, ...]
    is_minimal_only: bool


@dataclass(frozen=True)
class RemarkCondition:
    lhs: float
    rhs: float
    satisfied: bool
    reason: Optional[str] = None


def _tangential_norm(g: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt(max(float(v @ g @ v), 0.0)))


def _system(normal: float, tangential: np.ndarray, g: np.ndarray) -> SystemResidual:
    return SystemResidual(float(normal), tangential, _tangential_norm(g, tangential))


def _check_dimension(geo: GeometryAtPoint, cfg: ProblemConfig) -> None:
    if geo.m != cfg.m:
        raise ValueError(f"Problem is set up for m={cfg.m}, geometry has m={geo.m}")


def p_tension(
    geo: GeometryAtPoint, cfg: ProblemConfig, tol: float = P_HARMONIC_TOL
) -> PTension:
    """Norm of the p-tension field m^{p/2} f eta."""
    _check_dimension(geo, cfg)
    norm = cfg.m ** (cfg.p / 2.0) * abs(geo.f)
    return PTension(norm=norm, is_p_harmonic=norm <= tol)


def _sys1(
    cfg: ProblemConfig,
    f: float,
    lap_f: float,
    A_norm_sq: float,
    ric_eta_eta: float,
    A_grad_f: np.ndarray,
    grad_f: np.ndarray,
    ricci_eta_tan: np.ndarray,
    g: np.ndarray,
) -> SystemResidual:
    m, p = cfg.m, cfg.p
    normal = -lap_f + f * A_norm_sq - f * ric_eta_eta + m * (p - 2.0) * f**3
    # grad f^2 = 2 f grad f
    tangential = (
        2.0 * A_grad_f - 2.0 * f * ricci_eta_tan + (p - 2.0 + m / 2.0) * (2.0 * f * grad_f)
    )
    return _system(normal, tangential, g)


def residual_general(geo: GeometryAtPoint, cfg: ProblemConfig) -> SystemResidual:
    """Residual of the general system in any ambient."""
    _check_dimension(geo, cfg)
    return _sys1(
        cfg,
        geo.f,
        geo.lap_f,
        geo.A_norm_sq,
        geo.ric_eta_eta,
        geo.A @ geo.grad_f,
        geo.grad_f,
        geo.ricci_eta_tan,
        geo.g,
    )


def residual_einstein(
    geo: GeometryAtPoint,
    cfg: ProblemConfig,
    S: float,
    ambient: AmbientSpace,
) -> SystemResidual:
    """Residual of the system for an Einstein ambient of scalar curvature S.

    ``ambient`` must be declared Einstein with scalar curvature S and pass
    validation at the point; otherwise AmbientNotEinsteinError.
    """
    _check_dimension(geo, cfg)
    declared = ambient.scalar_S
    if declared is not None and abs(declared - S) > EINSTEIN_TOL * max(1.0, abs(S)):
        raise AmbientNotEinsteinError(
            f"Ambient {ambient.name!r} is declared with S={declared}, not S={S}"
        )
    einstein_validation(ambient, points=(tuple(geo.x),), samples=1, radius=0.0)
    m, p, f = cfg.m, cfg.p, geo.f
    normal = -geo.lap_f + f * geo.A_norm_sq + m * (p - 2.0) * f**3 - (S / (m + 1)) * f
    tangential = 2.0 * (geo.A @ geo.grad_f) + (p - 2.0 + m / 2.0) * (2.0 * f * geo.grad_f)
    return _system(normal, tangential, geo.g)


def umbilic_classification(cfg: ProblemConfig, S: float) -> UmbilicResult:
    """Constant mean curvatures of totally umbilic p-biharmonic hypersurfaces."""
    if S <= 0.0:
        return UmbilicResult(beta_solutions=(0.0,), is_minimal_only=True)
    beta = math.sqrt(S / (cfg.m * (cfg.m + 1) * (cfg.p - 1.0)))
    return UmbilicResult(beta_solutions=(-beta, 0.0, beta), is_minimal_only=False)


def residual_conformal_closed_form(base: GeometryAtPoint, cfg: ProblemConfig) -> SystemResidual:
    """The conformally flat system written in base quantities and gamma.

    Norms use the base metric g.
    """
    _check_dimension(base, cfg)
    require_minimal(base)
    m, p = cfg.m, cfg.p
    psi = base.psi
    eta_gamma = base.eta_gamma
    grad_gamma = base.grad_M_gamma
    # (grad^M gamma)(psi) is the derivative of psi along grad^M gamma
    along_gamma = base.inner(base.grad_psi, grad_gamma)
    normal = (
        psi
        * (
            -base.lap_M_gamma
            - m * base.hess_gamma_eta_eta
            + (1 - m) * base.inner(grad_gamma, grad_gamma)
            - base.A_norm_sq
            + m * (1.0 - p) * eta_gamma**2
        )
        + base.lap_psi
        + (m - 2) * along_gamma
    )
    tangential = (
        -2.0 * (base.A @ base.grad_psi)
        + 2.0 * (1 - m) * psi * (base.A @ grad_gamma)
        + (2.0 * p - m) * eta_gamma * base.grad_psi
    )
    return _system(normal, tangential, base.g)


def residual_tilde_from_base(base: GeometryAtPoint, cfg: ProblemConfig) -> SystemResidual:
    """The general system fed with the closed-form tilde quantities of ``base``.

    The tangential norm is taken in the conformal metric e^{2 gamma} g.
    """
    _check_dimension(base, cfg)
    tilde = tilde_quantities(base)
    return _sys1(
        cfg,
        tilde.f_tilde,
        tilde.lap_f_tilde,
        tilde.A_tilde_norm_sq,
        tilde.ric_tilde_eta_eta,
        tilde.A_grad_f_tilde,
        tilde.grad_f_tilde,
        tilde.ricci_tilde_eta_tan,
        math.exp(2.0 * base.gamma) * base.g,
    )


def residual_conformal_tilde_route(
    base_imm: Immersion,
    amb: AmbientSpace,
    cfg: ProblemConfig,
    u: Sequence[float],
    parameters: Optional[Mapping[str, float]] = None,
) -> SystemResidual:
    base = base_geometry(base_imm, amb, u, cfg.orientation, parameters)
    return residual_tilde_from_base(base, cfg)


def scaled_route_gap(closed: SystemResidual, tilde: SystemResidual, gamma: float) -> float:
    """Largest component gap between the closed form and the rescaled tilde route."""
    normal = abs(closed.normal - math.exp(2.0 * gamma) * tilde.normal)
    tangential = closed.tangential - math.exp(3.0 * gamma) * tilde.tangential
    return max(normal, float(np.max(np.abs(tangential))))


@dataclass(frozen=True)
class RouteComparison:
    """The three computations of the conformal residual at one point.

    The closed form equals e^{2 gamma} (normal) and e^{3 gamma} (tangential)
    times the tilde route; the gaps below apply those factors.
    """

    direct: SystemResidual
    tilde: SystemResidual
    closed_form: SystemResidual
    gamma: float
    tilde_vs_direct: float
    closed_form_vs_tilde: float

    @property
    def max_gap(self) -> float:
        return max(self.tilde_vs_direct, self.closed_form_vs_tilde)


def compare_routes(
    base_imm: Immersion,
    amb: AmbientSpace,
    cfg: ProblemConfig,
    u: Sequence[float],
    parameters: Optional[Mapping[str, float]] = None,
) -> RouteComparison:
    """Direct, tilde-route and closed-form residuals at ``u`` with their gaps."""
    base = base_geometry(base_imm, amb, u, cfg.orientation, parameters)
    direct = residual_general(
        geometry_at(base_imm, amb, u, cfg.orientation, parameters=parameters), cfg
    )
    tilde = residual_tilde_from_base(base, cfg)
    closed = residual_conformal_closed_form(base, cfg)
    tilde_vs_direct = max(
        abs(tilde.normal - direct.normal),
        float(np.max(np.abs(tilde.tangential - direct.tangential))),
    )
    gap = scaled_route_gap(closed, tilde, base.gamma)
    return RouteComparison(direct, tilde, closed, base.gamma, tilde_vs_direct, gap)


def remark_condition(
    base: GeometryAtPoint, cfg: ProblemConfig, tol: float = DEFAULT_TOLERANCE
) -> RemarkCondition:
    """|A|^2 against m(1-p) eta(gamma)^2 - m eta(eta(gamma)) where both are constant on M.

    The condition needs non-zero constants: when gamma or eta(gamma) vanishes
    the result is unsatisfied and ``reason`` names the vanishing one.
    """
    _check_dimension(base, cfg)
    for label, vector in (
        ("gamma", base.grad_M_gamma),
        ("eta(gamma)", base.grad_eta_gamma),
    ):
        size = base.norm(vector)
        if size > CONSTANCY_TOL:
            raise ConstancyError(
                f"{label} is not constant along M at {tuple(base.u)}: "
                f"|grad| = {size:.3e}"
            )
    m, p = cfg.m, cfg.p
    lhs = base.A_norm_sq
    rhs = m * (1.0 - p) * base.eta_gamma**2 - m * base.eta_eta_gamma
    for label, value in (("gamma", base.gamma), ("eta(gamma)", base.eta_gamma)):
        if abs(value) <= CONSTANCY_TOL:
            reason = f"{label} is zero on M"
            return RemarkCondition(lhs=lhs, rhs=rhs, satisfied=False, reason=reason)
    return RemarkCondition(lhs=lhs, rhs=rhs, satisfied=abs(lhs - rhs) <= tol)


def ode_example1(
    gamma_1d: Expr | str,
    p: float,
    c: float,
    parameters: Optional[Mapping[str, float]] = None,
) -> float:
    """(1 - p) gamma'(c)^2 - gamma''(c) for a conformal factor depending on z only."""
    gamma = parse(gamma_1d) if isinstance(gamma_1d, str) else gamma_1d
    d = Differentiator("z")
    first = d(gamma)
    second = d(first)
    bindings = dict(parameters or {})
    bindings.update({"z": float(c), "p": float(p)})
    ev = Evaluator(bindings)
    return (1.0 - p) * ev(first) ** 2 - ev(second)
