"""Pointwise geometry of a hypersurface in (R^{m+1}, e^{2 gamma} h).

Conventions: A(X) = -(nabla_X eta)^T, B_ij = <nabla_{d_i} d_j X, eta>,
f = (1/m) tr A, Laplacians are div(grad). Vectors on M are returned as
chart components.

Everything that needs a derivative is built once per (immersion, ambient,
probe) as a symbolic model; evaluation at a chart point is then plain
numeric work on numpy arrays.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Optional

import numpy as np

from pbih_cli.config import DEGENERACY_TOL, EINSTEIN_TOL
from pbih_cli.core.expr import (
    ONE,
    ZERO,
    Const,
    Differentiator,
    Evaluator,
    Expr,
    ExprDomainError,
    Substituter,
    Var,
    as_expr,
    div,
    exp,
    ln,
    mul,
    neg,
    parse,
    sqrt,
    sub,
    total,
)
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)

# draws allowed to fall outside the domain of gamma, per requested sample
_MAX_SKIPPED_DRAWS = 20


class DegenerateChartError(ValueError):
    """The immersion's Jacobian is not of full rank at a chart point."""

    def __init__(self, u: Sequence[float], smallest: float) -> None:
        super().__init__(
            f"Degenerate chart point {tuple(float(v) for v in u)}: "
            f"smallest eigenvalue of the induced metric is {smallest:.3e}"
        )
        self.u = tuple(float(v) for v in u)
        self.smallest = smallest


class AmbientNotEinsteinError(ValueError):
    """The ambient space is not declared Einstein or fails validation."""


class Orientation(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


class AmbientKind(str, Enum):
    EUCLIDEAN = "euclidean"
    CONFORMAL = "conformal"
    DECLARED_EINSTEIN = "declared_einstein"


def ambient_coordinates(dim: int) -> tuple[str, ...]:
    """Names of the ambient coordinates; the last one is always ``z``."""
    if dim < 2:
        raise ValueError(f"Ambient dimension must be at least 2, got {dim}")
    if dim == 2:
        return ("x", "z")
    if dim == 3:
        return ("x", "y", "z")
    return tuple(f"x{i}" for i in range(1, dim)) + ("z",)


@dataclass(frozen=True)
class Immersion:
    """Chart map u -> X(u) of an m-dimensional hypersurface into R^{m+1}."""

    variables: tuple[str, ...]
    components: tuple[Expr, ...]
    domain: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        m = len(self.variables)
        if m < 1:
            raise ValueError("An immersion needs at least one chart variable")
        if len(set(self.variables)) != m:
            raise ValueError(f"Duplicate chart variables: {self.variables}")
        if len(self.components) != m + 1:
            raise ValueError(
                f"Expected {m + 1} ambient components for {m} chart variables, "
                f"got {len(self.components)}"
            )
        if len(self.domain) != m:
            raise ValueError(f"Expected {m} domain intervals, got {len(self.domain)}")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"Empty chart interval [{lo}, {hi}]")

    @property
    def m(self) -> int:
        return len(self.variables)

    def point(self, u: Sequence[float]) -> np.ndarray:
        """X(u) in ambient coordinates."""
        ev = Evaluator(dict(zip(self.variables, (float(v) for v in u))))
        return np.array([ev(c) for c in self.components], dtype=float)

    @classmethod
    def from_text(
        cls,
        variables: Sequence[str],
        components: Sequence[str],
        domain: Sequence[Sequence[float]],
        parameters: Optional[Mapping[str, float]] = None,
    ) -> Immersion:
        """Parse component formulas, binding any named parameters."""
        bind = Substituter(parameters or {})
        return cls(
            variables=tuple(variables),
            components=tuple(bind(parse(text)) for text in components),
            domain=tuple((float(lo), float(hi)) for lo, hi in domain),
        )

    def reparametrize(self, matrix: Any) -> Immersion:
        """Precompose with the linear chart change u = M v.

        The new domain is the bounding box of the old one pulled back by M.
        """
        mat = np.asarray(matrix, dtype=float)
        if mat.shape != (self.m, self.m) or abs(np.linalg.det(mat)) < 1e-12:
            raise ValueError("Chart change must be an invertible m x m matrix")
        mapping = {
            name: total(mul(float(mat[i, j]), Var(v)) for j, v in enumerate(self.variables))
            for i, name in enumerate(self.variables)
        }
        change = Substituter(mapping)
        corners = np.array(np.meshgrid(*[list(iv) for iv in self.domain])).reshape(self.m, -1)
        pulled = np.linalg.solve(mat, corners)
        domain = tuple((float(row.min()), float(row.max())) for row in pulled)
        return Immersion(self.variables, tuple(change(c) for c in self.components), domain)


def _gamma_expr(gamma: Expr | str) -> Expr:
    # fold constant subtrees
    return Substituter({})(parse(gamma) if isinstance(gamma, str) else as_expr(gamma))


@dataclass(frozen=True)
class AmbientSpace:
    """R^{dim} with the metric e^{2 gamma} times the Euclidean one."""

    dim: int
    gamma: Expr = ZERO
    kind: AmbientKind = AmbientKind.EUCLIDEAN
    scalar_S: Optional[float] = None
    name: str = "euclidean"

    def __post_init__(self) -> None:
        ambient_coordinates(self.dim)
        if self.kind is AmbientKind.DECLARED_EINSTEIN and self.scalar_S is None:
            raise ValueError("A declared Einstein ambient needs its scalar curvature S")

    @property
    def coordinates(self) -> tuple[str, ...]:
        return ambient_coordinates(self.dim)

    @property
    def is_flat(self) -> bool:
        return isinstance(self.gamma, Const) and self.gamma.value == 0.0

    @classmethod
    def euclidean(cls, dim: int) -> AmbientSpace:
        return cls(dim=dim)

    @classmethod
    def conformal(cls, dim: int, gamma: Expr | str, name: str = "conformal") -> AmbientSpace:
        return cls(dim=dim, gamma=_gamma_expr(gamma), kind=AmbientKind.CONFORMAL, name=name)

    @classmethod
    def declared_einstein(
        cls, dim: int, gamma: Expr | str, scalar_S: float, name: str = "einstein"
    ) -> AmbientSpace:
        return cls(
            dim=dim,
            gamma=_gamma_expr(gamma),
            kind=AmbientKind.DECLARED_EINSTEIN,
            scalar_S=float(scalar_S),
            name=name,
        )

    @classmethod
    def stereographic(cls, dim: int) -> AmbientSpace:
        """Unit round sphere S^{dim} pulled back by stereographic projection."""
        radius_sq = total(mul(Var(x), Var(x)) for x in ambient_coordinates(dim))
        gamma = ln(div(2.0, 1.0 + radius_sq))
        return cls.declared_einstein(
            dim, gamma, float(dim * (dim - 1)), name="stereographic"
        )

    def flat(self) -> AmbientSpace:
        """The Euclidean space this metric is conformal to."""
        return AmbientSpace.euclidean(self.dim)


# --- Symbolic models ---


@dataclass(frozen=True, eq=False)
class AmbientTensors:
    """Symbolic metric data of e^{2 gamma} h in ambient coordinates."""

    coordinates: tuple[str, ...]
    metric_factor: Expr  # e^{2 gamma}
    inverse_factor: Expr  # e^{-2 gamma}
    christoffel: tuple  # [c][a][b] = Gamma^c_ab
    christoffel_derivatives: tuple  # [d][c][a][b] = d_d Gamma^c_ab


@lru_cache(maxsize=64)
def ambient_tensors(amb: AmbientSpace) -> AmbientTensors:
    """Christoffel symbols of the conformal metric and their first derivatives."""
    xs = amb.coordinates
    n = amb.dim
    factor = exp(mul(2.0, amb.gamma))
    inverse = exp(mul(-2.0, amb.gamma))
    d = [Differentiator(x) for x in xs]
    d_factor = [d[a](factor) for a in range(n)]

    def metric_derivative(a: int, b: int, c: int) -> Expr:
        # d_a G_bc with G diagonal
        return d_factor[a] if b == c else ZERO

    christoffel = tuple(
        tuple(
            tuple(
                mul(
                    0.5,
                    mul(
                        inverse,
                        sub(
                            total([metric_derivative(a, b, c), metric_derivative(b, a, c)]),
                            metric_derivative(c, a, b),
                        ),
                    ),
                )
                for b in range(n)
            )
            for a in range(n)
        )
        for c in range(n)
    )
    derivatives = tuple(
        tuple(
            tuple(tuple(d[k](christoffel[c][a][b]) for b in range(n)) for a in range(n))
            for c in range(n)
        )
        for k in range(n)
    )
    logger.debug("Built Christoffel symbols for %s ambient in dimension %d", amb.name, n)
    return AmbientTensors(xs, factor, inverse, christoffel, derivatives)


@lru_cache(maxsize=64)
def probe_derivatives(probe: Expr, coordinates: tuple[str, ...]) -> tuple[tuple, tuple]:
    """Euclidean gradient and Hessian expressions of a scalar on R^{m+1}."""
    d = [Differentiator(x) for x in coordinates]
    grad = tuple(d[a](probe) for a in range(len(coordinates)))
    size = len(coordinates)
    hess = tuple(tuple(d[b](grad[a]) for b in range(size)) for a in range(size))
    return grad, hess


def _minor(rows: list[list[Expr]], skip_row: int, skip_col: int) -> list[list[Expr]]:
    return [
        [e for j, e in enumerate(row) if j != skip_col]
        for i, row in enumerate(rows)
        if i != skip_row
    ]


def _determinant(rows: list[list[Expr]]) -> Expr:
    """Laplace expansion along the first row."""
    if not rows:
        return ONE
    if len(rows) == 1:
        return rows[0][0]
    terms = []
    for j, entry in enumerate(rows[0]):
        cofactor = _determinant(_minor(rows, 0, j))
        term = mul(entry, cofactor)
        terms.append(term if j % 2 == 0 else neg(term))
    return total(terms)


def _chart_derivatives(
    derivatives: Mapping[str, Differentiator], names: Sequence[str], e: Expr
) -> tuple[tuple, tuple]:
    first = tuple(derivatives[v](e) for v in names)
    second = tuple(tuple(derivatives[w](d) for w in names) for d in first)
    return first, second


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """Symbolic quantities of one immersion in one ambient, plus a scalar probe.

    Names ending in 0 use the raw cofactor normal; the orientation sign is
    applied at evaluation time.
    """

    immersion: Immersion
    ambient: AmbientSpace
    probe: Expr
    position: tuple  # X_a
    jacobian: tuple  # [i][a] = d_i X_a
    metric: tuple  # [i][j] = g_ij
    metric_derivatives: tuple  # [k][i][j] = d_k g_ij
    normal0: tuple  # eta^a
    second_fundamental0: tuple  # [i][j] = B_ij
    mean_curvature0: Expr
    mean_curvature0_d1: tuple
    mean_curvature0_d2: tuple
    probe_chart: Expr  # probe o X
    probe_chart_d1: tuple
    probe_chart_d2: tuple
    eta_probe0_d1: tuple  # chart derivatives of eta(probe) o X
    psi0: Expr  # eta(probe) e^{-probe}
    psi0_d1: tuple
    psi0_d2: tuple
    derivatives: dict = field(repr=False)  # chart variable -> Differentiator

    def chart_derivatives(self, e: Expr) -> tuple[tuple, tuple]:
        """First and second chart derivatives of a chart scalar."""
        return _chart_derivatives(self.derivatives, self.immersion.variables, e)


def _adjugate(rows: list[list[Expr]]) -> list[list[Expr]]:
    size = len(rows)
    adjugate = []
    for i in range(size):
        row = []
        for j in range(size):
            minor = _determinant(_minor(rows, j, i))
            row.append(minor if (i + j) % 2 == 0 else neg(minor))
        adjugate.append(row)
    return adjugate


@lru_cache(maxsize=64)
def surface_model(imm: Immersion, amb: AmbientSpace, probe: Expr) -> SurfaceModel:
    """Build (and cache) the symbolic model of ``imm`` inside ``amb``."""
    if amb.dim != imm.m + 1:
        raise ValueError(
            f"Immersion of dimension {imm.m} needs an ambient of dimension {imm.m + 1}, "
            f"got {amb.dim}"
        )
    m, n = imm.m, amb.dim
    names = imm.variables
    tensors = ambient_tensors(amb)
    derivatives = {v: Differentiator(v) for v in names}
    onto = Substituter(dict(zip(tensors.coordinates, imm.components)))
    X = imm.components

    J = [[derivatives[v](X[a]) for a in range(n)] for v in names]
    H = [[[derivatives[w](J[i][a]) for a in range(n)] for w in names] for i in range(m)]
    factor = onto(tensors.metric_factor)
    inverse = onto(tensors.inverse_factor)

    g = [
        [mul(factor, total(mul(J[i][a], J[j][a]) for a in range(n))) for j in range(m)]
        for i in range(m)
    ]
    dg = tuple(
        tuple(tuple(derivatives[v](g[i][j]) for j in range(m)) for i in range(m)) for v in names
    )

    # Covector orthogonal to every d_i X: signed maximal minors of the Jacobian.
    cofactor = []
    for a in range(n):
        minor = _determinant([[J[i][b] for b in range(n) if b != a] for i in range(m)])
        cofactor.append(minor if a % 2 == 0 else neg(minor))
    length = sqrt(mul(inverse, total(mul(c, c) for c in cofactor)))
    eta0 = tuple(div(mul(inverse, c), length) for c in cofactor)

    christoffel = [
        [[onto(tensors.christoffel[c][a][b]) for b in range(n)] for a in range(n)]
        for c in range(n)
    ]
    B0 = [[ZERO] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            covariant = [
                total(
                    [H[i][j][c]]
                    + [
                        mul(christoffel[c][a][b], mul(J[i][a], J[j][b]))
                        for a in range(n)
                        for b in range(n)
                    ]
                )
                for c in range(n)
            ]
            B0[i][j] = B0[j][i] = div(
                total(mul(covariant[c], cofactor[c]) for c in range(n)), length
            )

    adjugate = _adjugate(g)
    trace = total(mul(adjugate[i][j], B0[j][i]) for i in range(m) for j in range(m))
    f0 = div(trace, mul(float(m), _determinant(g)))
    f_d1, f_d2 = _chart_derivatives(derivatives, names, f0)

    probe_grad, _ = probe_derivatives(probe, tensors.coordinates)
    probe_chart = onto(probe)
    probe_d1, probe_d2 = _chart_derivatives(derivatives, names, probe_chart)
    eta_probe = total(mul(eta0[c], onto(probe_grad[c])) for c in range(n))
    psi = mul(eta_probe, exp(neg(probe_chart)))
    psi_d1, psi_d2 = _chart_derivatives(derivatives, names, psi)
    logger.debug("Built surface model: m=%d, ambient=%s", m, amb.name)

    return SurfaceModel(
        immersion=imm,
        ambient=amb,
        probe=probe,
        position=tuple(X),
        jacobian=tuple(tuple(row) for row in J),
        metric=tuple(tuple(row) for row in g),
        metric_derivatives=dg,
        normal0=eta0,
        second_fundamental0=tuple(tuple(row) for row in B0),
        mean_curvature0=f0,
        mean_curvature0_d1=f_d1,
        mean_curvature0_d2=f_d2,
        probe_chart=probe_chart,
        probe_chart_d1=probe_d1,
        probe_chart_d2=probe_d2,
        eta_probe0_d1=tuple(derivatives[v](eta_probe) for v in names),
        psi0=psi,
        psi0_d1=psi_d1,
        psi0_d2=psi_d2,
        derivatives=derivatives,
    )


# --- Numerics ---


def _numeric(evaluator: Evaluator, nested: Any) -> np.ndarray:
    if isinstance(nested, Expr):
        return np.float64(evaluator(nested))
    return np.array([_numeric(evaluator, item) for item in nested], dtype=float)


def _laplacian(g_inv: np.ndarray, dg: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> float:
    """g^ij (d_ij phi - Gamma^k_ij d_k phi) from dg[k, i, j] = d_k g_ij."""
    lowered = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    christoffel = 0.5 * np.einsum("kl,ijl->kij", g_inv, lowered)
    return float(
        np.einsum("ij,ij", g_inv, d2) - np.einsum("ij,kij,k", g_inv, christoffel, d1)
    )


def _bindings(
    names: Sequence[str], values: Sequence[float], parameters: Optional[Mapping[str, float]]
) -> dict[str, float]:
    bindings = dict(parameters or {})
    bindings.update(zip(names, (float(v) for v in values)))
    return bindings


def ricci_tensor(
    amb: AmbientSpace, x: Sequence[float], parameters: Optional[Mapping[str, float]] = None
) -> np.ndarray:
    """Ricci tensor R_bd of the ambient metric at x, from its Christoffel symbols."""
    tensors = ambient_tensors(amb)
    ev = Evaluator(_bindings(tensors.coordinates, x, parameters))
    gam = _numeric(ev, tensors.christoffel)
    dgam = _numeric(ev, tensors.christoffel_derivatives)
    return (
        np.einsum("aabd->bd", dgam)
        - np.einsum("daba->bd", dgam)
        + np.einsum("aae,ebd->bd", gam, gam)
        - np.einsum("ade,eba->bd", gam, gam)
    )


@dataclass(frozen=True)
class AmbientCurvature:
    ric_eta_eta: float
    ricci_eta_tan: np.ndarray
    scalar_S: float
    ricci: np.ndarray


def ambient_curvature(
    amb: AmbientSpace,
    x: Sequence[float],
    eta: Sequence[float],
    frame: Sequence[Sequence[float]],
    parameters: Optional[Mapping[str, float]] = None,
) -> AmbientCurvature:
    """Ric(eta, eta), the chart components of (Ricci eta)^T and S at x."""
    tensors = ambient_tensors(amb)
    ev = Evaluator(_bindings(tensors.coordinates, x, parameters))
    factor = float(ev(tensors.metric_factor))
    ricci = ricci_tensor(amb, x, parameters)
    eta_arr = np.asarray(eta, dtype=float)
    frame_arr = np.asarray(frame, dtype=float)
    g = factor * frame_arr @ frame_arr.T
    ricci_eta_tan = np.linalg.solve(g, frame_arr @ ricci @ eta_arr)
    return AmbientCurvature(
        ric_eta_eta=float(eta_arr @ ricci @ eta_arr),
        ricci_eta_tan=ricci_eta_tan,
        scalar_S=float(np.trace(ricci) / factor),
        ricci=ricci,
    )


def einstein_validation(
    amb: AmbientSpace,
    points: Optional[Sequence[Sequence[float]]] = None,
    samples: int = 100,
    seed: int = 0,
    radius: float = 0.1,
) -> float:
    """Max over sampled points of |Ric - (S/n) G|_inf, relative to max(1, |S/n| e^{2 gamma}).

    Samples come from [-1, 1]^n, or from cubes of half-width ``radius`` around
    ``points`` when given. Draws where gamma or its derivatives cannot be
    evaluated are skipped. Raises AmbientNotEinsteinError unless the ambient is
    declared Einstein, some draw evaluates and the deviation is within tolerance.
    """
    centers = None if points is None else tuple(tuple(float(c) for c in x) for x in points)
    if centers is not None and not centers:
        raise ValueError("Einstein validation needs at least one point")
    return _einstein_deviation(amb, centers, samples, seed, float(radius))


def _ricci_deviation(amb: AmbientSpace, tensors: AmbientTensors, x: np.ndarray) -> float:
    factor = float(Evaluator(dict(zip(tensors.coordinates, x)))(tensors.metric_factor))
    expected = (float(amb.scalar_S) / amb.dim) * factor
    deviation = np.abs(ricci_tensor(amb, x) - expected * np.eye(amb.dim))
    if not (np.isfinite(factor) and np.all(np.isfinite(deviation))):
        raise ExprDomainError(f"non-finite curvature at {tuple(float(v) for v in x)}")
    return float(np.max(deviation)) / max(1.0, abs(expected))


@lru_cache(maxsize=64)
def _einstein_deviation(
    amb: AmbientSpace,
    centers: Optional[tuple[tuple[float, ...], ...]],
    samples: int,
    seed: int,
    radius: float,
) -> float:
    if amb.kind is not AmbientKind.DECLARED_EINSTEIN or amb.scalar_S is None:
        raise AmbientNotEinsteinError(f"Ambient {amb.name!r} is not declared Einstein")
    tensors = ambient_tensors(amb)
    rng = np.random.default_rng(seed)
    worst, evaluated, skipped = 0.0, 0, 0
    while evaluated < samples and skipped < _MAX_SKIPPED_DRAWS * samples:
        if centers is None:
            x = rng.uniform(-1.0, 1.0, size=amb.dim)
        else:
            center = np.asarray(centers[int(rng.integers(len(centers)))])
            x = center + rng.uniform(-radius, radius, size=amb.dim)
        try:
            deviation = _ricci_deviation(amb, tensors, x)
        except ExprDomainError:
            skipped += 1
            continue
        evaluated += 1
        worst = max(worst, deviation)
    if not evaluated:
        raise AmbientNotEinsteinError(
            f"Ambient {amb.name!r} cannot be evaluated at any sampled point"
        )
    if worst > EINSTEIN_TOL:
        raise AmbientNotEinsteinError(
            f"Ambient {amb.name!r} fails Einstein validation: max deviation {worst:.3e}"
        )
    if skipped:
        logger.debug("Einstein validation of %s skipped %d draws", amb.name, skipped)
    logger.info(
        "Einstein validation of %s: max deviation %.3e over %d points", amb.name, worst, evaluated
    )
    return worst


@dataclass(eq=False)
class GeometryAtPoint:
    """Pointwise geometric data. Chart-vector fields are in chart components."""

    u: np.ndarray
    x: np.ndarray
    m: int
    orientation: Orientation
    g: np.ndarray
    g_inv: np.ndarray
    frame: np.ndarray
    eta: np.ndarray
    B: np.ndarray
    A: np.ndarray
    f: float
    A_norm_sq: float
    grad_f: np.ndarray
    lap_f: float
    ric_eta_eta: float
    ricci_eta_tan: np.ndarray
    scalar_S: float
    metric_factor: float
    # fields of the scalar probe gamma (the ambient's own gamma unless overridden)
    gamma: float
    eta_gamma: float
    hess_gamma_eta_eta: float
    eta_eta_gamma: float
    grad_M_gamma: np.ndarray
    lap_M_gamma: float
    lap_R_gamma: float
    grad_R_gamma_sq: float
    grad_eta_gamma: np.ndarray
    psi: float
    grad_psi: np.ndarray
    lap_psi: float

    def inner(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(v @ self.g @ w)

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(v, v), 0.0)))


def _orientation_sign(eta0: np.ndarray, orientation: Orientation) -> float:
    scale = float(np.max(np.abs(eta0)))
    sign = 1.0
    for value in eta0[::-1]:
        if abs(value) > 1e-12 * scale:
            sign = 1.0 if value > 0 else -1.0
            break
    return sign if orientation is Orientation.PLUS else -sign


def _evaluate_metric(model: SurfaceModel, ev: Evaluator, u: Sequence[float]) -> np.ndarray:
    g = _numeric(ev, model.metric)
    smallest = float(np.linalg.eigvalsh(g).min())
    if smallest <= DEGENERACY_TOL:
        raise DegenerateChartError(u, smallest)
    return g


def geometry_at(
    imm: Immersion,
    amb: AmbientSpace,
    u: Sequence[float],
    orientation: Orientation = Orientation.PLUS,
    probe: Optional[Expr] = None,
    parameters: Optional[Mapping[str, float]] = None,
) -> GeometryAtPoint:
    """All pointwise quantities of ``imm`` inside ``amb`` at chart point ``u``.

    ``probe`` is the scalar whose normal and intrinsic derivatives fill the
    gamma fields; it defaults to the ambient's conformal factor. ``parameters``
    binds free names left in the immersion or the probe.
    """
    orientation = Orientation(orientation)
    probe = amb.gamma if probe is None else probe
    model = surface_model(imm, amb, probe)
    ev = Evaluator(_bindings(imm.variables, u, parameters))

    g = _evaluate_metric(model, ev, u)
    g_inv = np.linalg.inv(g)
    dg = _numeric(ev, model.metric_derivatives)
    x = _numeric(ev, model.position)
    frame = _numeric(ev, model.jacobian)
    eta0 = _numeric(ev, model.normal0)
    s = _orientation_sign(eta0, orientation)

    B = s * _numeric(ev, model.second_fundamental0)
    A = g_inv @ B
    f = s * float(ev(model.mean_curvature0))
    df = s * _numeric(ev, model.mean_curvature0_d1)
    d2f = s * _numeric(ev, model.mean_curvature0_d2)

    curvature = ambient_curvature(amb, x, s * eta0, frame, parameters)
    tensors = ambient_tensors(amb)
    ambient_ev = Evaluator(_bindings(tensors.coordinates, x, parameters))
    probe_grad, probe_hess = probe_derivatives(probe, tensors.coordinates)
    grad_R = _numeric(ambient_ev, probe_grad)
    hess_R = _numeric(ambient_ev, probe_hess)
    eta = s * eta0
    hess_eta_eta = float(eta @ hess_R @ eta)

    gamma_d1 = _numeric(ev, model.probe_chart_d1)
    gamma_d2 = _numeric(ev, model.probe_chart_d2)
    psi_d1 = s * _numeric(ev, model.psi0_d1)
    psi_d2 = s * _numeric(ev, model.psi0_d2)

    return GeometryAtPoint(
        u=np.asarray(u, dtype=float),
        x=x,
        m=imm.m,
        orientation=orientation,
        g=g,
        g_inv=g_inv,
        frame=frame,
        eta=eta,
        B=B,
        A=A,
        f=f,
        A_norm_sq=float(np.trace(A @ A)),
        grad_f=g_inv @ df,
        lap_f=_laplacian(g_inv, dg, df, d2f),
        ric_eta_eta=curvature.ric_eta_eta,
        ricci_eta_tan=curvature.ricci_eta_tan,
        scalar_S=curvature.scalar_S,
        metric_factor=float(ambient_ev(tensors.metric_factor)),
        gamma=float(ev(model.probe_chart)),
        eta_gamma=float(eta @ grad_R),
        hess_gamma_eta_eta=hess_eta_eta,
        eta_eta_gamma=hess_eta_eta,
        grad_M_gamma=g_inv @ gamma_d1,
        lap_M_gamma=_laplacian(g_inv, dg, gamma_d1, gamma_d2),
        lap_R_gamma=float(np.trace(hess_R)),
        grad_R_gamma_sq=float(grad_R @ grad_R),
        grad_eta_gamma=s * (g_inv @ _numeric(ev, model.eta_probe0_d1)),
        psi=s * float(ev(model.psi0)),
        grad_psi=g_inv @ psi_d1,
        lap_psi=_laplacian(g_inv, dg, psi_d1, psi_d2),
    )


@dataclass(frozen=True)
class IntrinsicOps:
    grad_M: np.ndarray
    lap_M: float


def intrinsic_scalar_ops(
    imm: Immersion,
    amb: AmbientSpace,
    scalar: Expr | str,
    u: Sequence[float],
    parameters: Optional[Mapping[str, float]] = None,
) -> IntrinsicOps:
    """grad^M and div(grad^M) of a chart scalar under the metric induced by ``amb``."""
    expr = parse(scalar) if isinstance(scalar, str) else scalar
    model = surface_model(imm, amb, amb.gamma)
    ev = Evaluator(_bindings(imm.variables, u, parameters))
    g = _evaluate_metric(model, ev, u)
    g_inv = np.linalg.inv(g)
    dg = _numeric(ev, model.metric_derivatives)
    first, second = model.chart_derivatives(expr)
    d1 = _numeric(ev, first)
    d2 = _numeric(ev, second)
    return IntrinsicOps(grad_M=g_inv @ d1, lap_M=_laplacian(g_inv, dg, d1, d2))
