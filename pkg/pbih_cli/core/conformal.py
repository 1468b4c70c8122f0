"""Closed-form tilde quantities of a minimal hypersurface after a conformal change.

The base immersion lives in Euclidean R^{m+1}; the target metric is
e^{2 gamma} h. Every function here takes the base geometry (computed with
gamma as its probe, see ``base_geometry``) and returns chart components with
respect to the base metric g.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pbih_cli.config import MINIMALITY_TOL
from pbih_cli.core.geometry import (
    AmbientSpace,
    GeometryAtPoint,
    Immersion,
    Orientation,
    geometry_at,
)
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)


class NonMinimalBaseError(ValueError):
    """The base immersion is not minimal where a minimal base is required."""

    def __init__(self, f: float, u: Optional[Sequence[float]] = None) -> None:
        where = "" if u is None else f" at {tuple(float(v) for v in u)}"
        super().__init__(f"Base immersion is not minimal{where}: f = {f:.3e}")
        self.f = f


@dataclass(frozen=True)
class TildeQuantities:
    f_tilde: float
    grad_f_tilde: np.ndarray
    A_grad_f_tilde: np.ndarray
    lap_f_tilde: float
    A_tilde_norm_sq: float
    ric_tilde_eta_eta: float
    ricci_tilde_eta_tan: np.ndarray
    B_tilde: np.ndarray


def base_geometry(
    imm: Immersion,
    amb: AmbientSpace,
    u: Sequence[float],
    orientation: Orientation = Orientation.PLUS,
    parameters: Optional[Mapping[str, float]] = None,
) -> GeometryAtPoint:
    """Euclidean geometry of ``imm`` carrying the normal/intrinsic data of amb's gamma."""
    return geometry_at(imm, amb.flat(), u, orientation, probe=amb.gamma, parameters=parameters)


def require_minimal(base: GeometryAtPoint) -> None:
    if abs(base.f) > MINIMALITY_TOL:
        raise NonMinimalBaseError(base.f, base.u)


def tilde_second_fundamental(base: GeometryAtPoint) -> np.ndarray:
    """B_ij - g_ij eta(gamma), the eta-component of the new second fundamental form."""
    return base.B - base.g * base.eta_gamma


def tilde_mean_curvature(base: GeometryAtPoint) -> float:
    require_minimal(base)
    return -base.eta_gamma * math.exp(-base.gamma)


def tilde_A_norm_sq(base: GeometryAtPoint) -> float:
    require_minimal(base)
    return math.exp(-2.0 * base.gamma) * (base.A_norm_sq + base.m * base.eta_gamma**2)


def tilde_grad_f(base: GeometryAtPoint) -> np.ndarray:
    require_minimal(base)
    return -math.exp(-2.0 * base.gamma) * base.grad_psi


def tilde_A_grad_f(base: GeometryAtPoint) -> np.ndarray:
    require_minimal(base)
    return math.exp(-3.0 * base.gamma) * (base.eta_gamma * base.grad_psi - base.A @ base.grad_psi)


def tilde_lap_f(base: GeometryAtPoint) -> float:
    require_minimal(base)
    along_gamma = base.inner(base.grad_psi, base.grad_M_gamma)
    return math.exp(-2.0 * base.gamma) * (-base.lap_psi - (base.m - 2) * along_gamma)


def tilde_ricci(base: GeometryAtPoint) -> tuple[float, np.ndarray]:
    """(Ric~(eta~, eta~), chart components of (Ricci~ eta~)^T)."""
    require_minimal(base)
    m = base.m
    ric = math.exp(-2.0 * base.gamma) * (
        -base.lap_R_gamma
        + (1 - m) * base.hess_gamma_eta_eta
        + (1 - m) * base.grad_R_gamma_sq
        - (1 - m) * base.eta_gamma**2
    )
    tangential = (1 - m) * math.exp(-3.0 * base.gamma) * (
        base.grad_eta_gamma + base.A @ base.grad_M_gamma - base.eta_gamma * base.grad_M_gamma
    )
    return ric, tangential


def tilde_quantities(base: GeometryAtPoint) -> TildeQuantities:
    """All closed-form tilde quantities at one point of a minimal base."""
    ric, ricci_tan = tilde_ricci(base)
    return TildeQuantities(
        f_tilde=tilde_mean_curvature(base),
        grad_f_tilde=tilde_grad_f(base),
        A_grad_f_tilde=tilde_A_grad_f(base),
        lap_f_tilde=tilde_lap_f(base),
        A_tilde_norm_sq=tilde_A_norm_sq(base),
        ric_tilde_eta_eta=ric,
        ricci_tilde_eta_tan=ricci_tan,
        B_tilde=tilde_second_fundamental(base),
    )
