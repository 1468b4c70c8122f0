"""Built-in verification suite: closed forms, oracles, controls and invariances.

Each check is numbered, named and tagged so ``pbih verify --filter`` can pick
a subset. A tolerance override replaces every check's own bound.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from pbih_cli.config import FD_STEP
from pbih_cli.core.catalog import Verdict, builtin, catenoid_immersion, sphere_immersion
from pbih_cli.core.conformal import (
    base_geometry,
    tilde_A_grad_f,
    tilde_A_norm_sq,
    tilde_grad_f,
    tilde_lap_f,
    tilde_mean_curvature,
    tilde_ricci,
    tilde_second_fundamental,
)
from pbih_cli.core.expr import (
    Binary,
    Const,
    Differentiator,
    Evaluator,
    Expr,
    Unary,
    Var,
    call,
    central_difference,
    div,
    evaluate,
    mul,
    neg,
    power,
    sub,
)
from pbih_cli.core.expr import add as add_expr
from pbih_cli.core.geometry import (
    AmbientSpace,
    Immersion,
    Orientation,
    einstein_validation,
    geometry_at,
)
from pbih_cli.core.residuals import (
    ProblemConfig,
    compare_routes,
    ode_example1,
    residual_conformal_closed_form,
    residual_einstein,
    residual_general,
    umbilic_classification,
)
from pbih_cli.core.runner import Report, check_grid, environment, job_from_named
from pbih_cli.core.search import FAMILIES, SearchOptions, SearchProblem, SearchVerdict, minimize
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class CheckOutcome:
    passed: bool
    measured: float
    bound: float
    detail: str


@dataclass(frozen=True)
class NamedCheck:
    number: int
    name: str
    tags: tuple[str, ...]
    run: Callable[[Optional[float]], CheckOutcome]

    def matches(self, token: str) -> bool:
        return token in (str(self.number), self.name) or token in self.tags


def _outcome(measured: float, bound: float, detail: str) -> CheckOutcome:
    return CheckOutcome(bool(measured <= bound), measured, bound, detail)


def _sample_chart(
    imm: Immersion, rng: np.random.Generator, count: int, inset: float = 0.05
) -> list[tuple[float, ...]]:
    lows = np.array([lo + inset * (hi - lo) for lo, hi in imm.domain])
    highs = np.array([hi - inset * (hi - lo) for lo, hi in imm.domain])
    return [tuple(float(v) for v in row) for row in rng.uniform(lows, highs, (count, imm.m))]


def _relative(a: float | np.ndarray, b: float | np.ndarray) -> float:
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


# --- 1-3: closed-form families ---


def _example1_draws(rng: np.random.Generator, count: int) -> list[dict[str, float]]:
    draws = []
    for _ in range(count):
        c1, c2 = rng.uniform(0.5, 2.0, 2)
        draws.append(
            {
                "p": float(rng.uniform(2.0, 5.0)),
                "c1": float(c1),
                "c2": float(c2),
                "c": float(rng.uniform(-0.2, 1.0)),
            }
        )
    return draws


def check_example1_family(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-9 if tol is None else tol
    hyperplane = Immersion.from_text(("x1", "x2"), ["x1", "x2", "c"], [(-1.0, 1.0)] * 2)
    ambient = FAMILIES["example1"].ambient(3)
    grid = [(a, b) for a in np.linspace(-0.9, 0.9, 4) for b in np.linspace(-0.9, 0.9, 4)]
    worst, smallest_f = 0.0, math.inf
    for draw in _example1_draws(np.random.default_rng(0), 20):
        cfg = ProblemConfig(p=draw["p"], m=2)
        for u in grid:
            base = base_geometry(hyperplane, ambient, u, parameters=draw)
            worst = max(worst, residual_conformal_closed_form(base, cfg).max_norm)
            smallest_f = min(smallest_f, abs(tilde_mean_curvature(base)))
    detail = f"20 draws x 16 points; min |f~| = {smallest_f:.3e}"
    if smallest_f < 1e-3:
        return CheckOutcome(False, worst, bound, detail + " (hyperplane not proper)")
    return _outcome(worst, bound, detail)


def check_example1_ode(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-12 if tol is None else tol
    template = FAMILIES["example1"].template
    worst = 0.0
    for draw in _example1_draws(np.random.default_rng(1), 20):
        value = ode_example1(template, draw["p"], draw["c"], {"c1": draw["c1"], "c2": draw["c2"]})
        worst = max(worst, abs(value))
    linear = ode_example1("z", 3.0, 0.5)
    if linear != -2.0:
        return CheckOutcome(False, abs(linear + 2.0), 0.0, f"gamma = z gave {linear}, not -2")
    return _outcome(worst, bound, "20 draws; gamma = z gives exactly -2 at p = 3")


def check_example2_profiles(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-9 if tol is None else tol
    worst = 0.0
    for profile in ("1 + x2^2", "2 + cos(x2)"):
        for p in (2.0, 3.0, 4.0):
            named = builtin("revolution_disk_example2", {"p": p, "profile": profile})
            _, summary = check_grid(job_from_named(named, (8, 8), bound))
            if summary.verdict is not Verdict.PROPER_P_BIHARMONIC:
                return CheckOutcome(
                    False, summary.max_normal, bound, f"{profile}, p={p}: {summary.verdict.value}"
                )
            worst = max(worst, summary.max_normal, summary.max_tangential)
    return _outcome(worst, bound, "profiles 1 + x2^2 and 2 + cos(x2), p in {2, 3, 4}, 8x8 grids")


# --- 4-5: cross-oracles ---


def check_dual_route(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-6 if tol is None else tol
    rng = np.random.default_rng(4)
    ambient = FAMILIES["radial"].ambient(3)
    bases = {
        "hyperplane": Immersion.from_text(("x1", "x2"), ["x1", "x2", "0.25"], [(-1.0, 1.0)] * 2),
        "catenoid": catenoid_immersion(1.0, 0.0),
    }
    worst = 0.0
    for name, base in bases.items():
        for _ in range(5):
            params = {"alpha": float(rng.uniform(-1.0, 1.0)), "beta": float(rng.uniform(0.5, 2.0))}
            cfg = ProblemConfig(p=float(rng.uniform(2.0, 4.0)), m=2)
            for u in _sample_chart(base, rng, 10):
                routes = compare_routes(base, ambient, cfg, u, params)
                scale = 1.0 + max(
                    abs(routes.direct.normal), float(np.max(np.abs(routes.direct.tangential)))
                )
                closed_scale = 1.0 + max(
                    abs(routes.closed_form.normal),
                    float(np.max(np.abs(routes.closed_form.tangential))),
                )
                gap = max(
                    routes.tilde_vs_direct / scale, routes.closed_form_vs_tilde / closed_scale
                )
                if gap > worst:
                    logger.debug("Route gap %.3e on %s at %s with %s", gap, name, u, params)
                worst = max(worst, gap)
    return _outcome(worst, bound, "2 bases x 5 radial gammas x 10 points, relative gaps")


IDENTITY_GAMMA = "0.5*z + 0.2*ln(1 + x^2 + y^2)"


def check_conformal_identities(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-7 if tol is None else tol
    catenoid = catenoid_immersion(1.0, 0.0)
    ambient = AmbientSpace.conformal(3, IDENTITY_GAMMA)
    gaps: dict[str, float] = {}
    for u in _sample_chart(catenoid, np.random.default_rng(5), 50):
        base = base_geometry(catenoid, ambient, u)
        direct = geometry_at(catenoid, ambient, u)
        ric, ricci_tan = tilde_ricci(base)
        pairs = {
            "B": (direct.B, math.exp(base.gamma) * tilde_second_fundamental(base)),
            "f": (direct.f, tilde_mean_curvature(base)),
            "A_norm_sq": (direct.A_norm_sq, tilde_A_norm_sq(base)),
            "grad_f": (direct.grad_f, tilde_grad_f(base)),
            "A_grad_f": (direct.A @ direct.grad_f, tilde_A_grad_f(base)),
            "lap_f": (direct.lap_f, tilde_lap_f(base)),
            "ric": (direct.ric_eta_eta, ric),
            "ricci_tan": (direct.ricci_eta_tan, ricci_tan),
        }
        for label, (brute, closed) in pairs.items():
            gaps[label] = max(gaps.get(label, 0.0), _relative(closed, brute))
    label = max(gaps, key=gaps.__getitem__)
    return _outcome(gaps[label], bound, f"8 identities x 50 points; largest gap in {label}")


# --- 6-9: controls and invariances ---


def check_sphere_control(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-8 if tol is None else tol
    worst = 0.0
    for p in (2.0, 3.0, 4.0):
        named = builtin("sphere", {"p": p})
        records, summary = check_grid(job_from_named(named, (8, 8)))
        if summary.verdict is not Verdict.NEITHER:
            return CheckOutcome(False, 0.0, bound, f"p={p}: verdict {summary.verdict.value}")
        target = 2.0 * (p - 1.0)
        worst = max(worst, *(abs(abs(r.res_normal) - target) for r in records))
        worst = max(worst, summary.max_tangential)
    return _outcome(worst, bound, "|normal| = 2(p-1), tangential = 0 for p in {2, 3, 4}")


def check_einstein_controls(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-6 if tol is None else tol
    cfg = ProblemConfig(p=2.0, m=2)
    if not umbilic_classification(cfg, -6.0).is_minimal_only:
        return CheckOutcome(False, math.inf, bound, "S < 0 did not force minimality")
    betas = umbilic_classification(cfg, 6.0).beta_solutions
    worst = abs(max(betas) - 1.0)
    worst = max(worst, einstein_validation(AmbientSpace.stereographic(3)))
    named = builtin("stereographic_sphere", {"p": 2.0})
    worst = max(worst, abs(float(named.parameters["radius"]) - (1.0 + math.sqrt(2.0))))
    _, summary = check_grid(job_from_named(named, (6, 6), bound))
    if summary.verdict is not Verdict.PROPER_P_BIHARMONIC:
        return CheckOutcome(False, summary.max_normal, bound, f"verdict {summary.verdict.value}")
    worst = max(worst, summary.max_normal, summary.max_tangential)
    # horospheres of H^3 are umbilic with |f| = 1, so S < 0 leaves |normal| = 2p
    hyperbolic = AmbientSpace.declared_einstein(3, "-ln(z)", -6.0, name="hyperbolic")
    horosphere = Immersion.from_text(("s", "t"), ["s", "t", "1"], [(-1.0, 1.0)] * 2)
    for u in ((0.0, 0.0), (0.4, -0.7)):
        geo = geometry_at(horosphere, hyperbolic, u)
        residual = residual_einstein(geo, cfg, -6.0, hyperbolic)
        worst = max(worst, abs(abs(residual.normal) - 2.0 * cfg.p), residual.tangential_norm)
    return _outcome(
        worst, bound, "umbilic classes, round S^3 validation, |f| = 1 sphere, H^3 horosphere"
    )


def check_minimal_controls(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-10 if tol is None else tol
    worst = 0.0
    for name in ("catenoid", "flat_plane"):
        for p in (2.0, 3.0, 5.0):
            _, summary = check_grid(job_from_named(builtin(name, {"p": p}), tolerance=bound))
            if summary.verdict is not Verdict.P_HARMONIC:
                return CheckOutcome(False, summary.max_p_tension, bound, f"{name}, p={p}")
            worst = max(worst, summary.max_normal, summary.max_tangential)
    return _outcome(worst, bound, "catenoid and plane are p-harmonic for p in {2, 3, 5}")


def _ellipsoid() -> Immersion:
    return Immersion.from_text(
        ("theta", "phi"),
        ["1.2*sin(theta)*cos(phi)", "0.9*sin(theta)*sin(phi)", "0.8*cos(theta)"],
        [(0.0, math.pi), (0.0, 2.0 * math.pi)],
    )


def check_invariances(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-8 if tol is None else tol
    rng = np.random.default_rng(9)
    flat = AmbientSpace.euclidean(3)
    cfg = ProblemConfig(p=3.0, m=2)
    worst = 0.0
    for surface in (sphere_immersion(1.0), catenoid_immersion(1.0, 0.0)):
        matrix = np.array([[1.0, 0.2], [0.1, 1.0]])
        changed = surface.reparametrize(matrix)
        for u in _sample_chart(surface, rng, 10, inset=0.2):
            plus = residual_general(geometry_at(surface, flat, u, Orientation.PLUS), cfg)
            minus = residual_general(geometry_at(surface, flat, u, Orientation.MINUS), cfg)
            worst = max(worst, abs(plus.normal + minus.normal))
            worst = max(worst, abs(plus.tangential_norm - minus.tangential_norm))
            v = np.linalg.solve(matrix, np.asarray(u))
            other = residual_general(geometry_at(changed, flat, v), cfg)
            worst = max(worst, abs(abs(other.normal) - abs(plus.normal)))
            worst = max(worst, abs(other.tangential_norm - plus.tangential_norm))
    sphere = AmbientSpace.stereographic(3)
    for surface in (sphere_immersion(1.0 + math.sqrt(2.0)), _ellipsoid()):
        for u in _sample_chart(surface, rng, 10, inset=0.2):
            geo = geometry_at(surface, sphere, u)
            general = residual_general(geo, cfg)
            einstein = residual_einstein(geo, cfg, float(sphere.scalar_S), sphere)
            worst = max(worst, abs(general.normal - einstein.normal))
            worst = max(worst, float(np.max(np.abs(general.tangential - einstein.tangential))))
    return _outcome(worst, bound, "orientation, chart change and Einstein-system consistency")


# --- 10: search ---


def check_search_recovery(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-8 if tol is None else tol
    hyperplane = Immersion.from_text(("x1", "x2"), ["x1", "x2", "0"], [(-1.0, 1.0)] * 2)
    grid = tuple((a, b) for a in (-0.5, 0.0, 0.5) for b in (-0.5, 0.0, 0.5))
    problem = SearchProblem(hyperplane, FAMILIES["example1"], grid)
    options = SearchOptions(max_iters=60, restarts=10, seed=10, tolerance=bound)
    result = minimize(problem, (3.0, 3.0), options)
    hits = sum(outcome.objective <= bound for outcome in result.restarts)
    if hits < 9:
        return CheckOutcome(False, result.objective, bound, f"only {hits}/10 restarts recovered")

    catenoid = catenoid_immersion(1.0, 0.0)
    rim = tuple((1.0, z) for z in (-1.0, 0.0, 1.0))
    floor = minimize(
        SearchProblem(catenoid, FAMILIES["log_affine_z"], rim),
        (2.0, 4.0),
        SearchOptions(max_iters=15, restarts=2, seed=11, tolerance=bound),
    )
    bests = [entry.best for entry in floor.history]
    if not floor.note or any(b > a for a, b in zip(bests, bests[1:])):
        return CheckOutcome(False, floor.objective, bound, "catenoid floor history not monotone")
    if floor.verdict not in (SearchVerdict.CANDIDATE_FOUND, SearchVerdict.NO_CANDIDATE):
        return CheckOutcome(False, floor.objective, bound, "catenoid search gave no verdict")
    detail = f"{hits}/10 restarts recovered; catenoid floor {floor.objective:.3e}"
    return _outcome(result.objective, bound, detail)


# --- 11: expression engine ---

_UNARY_OPS = ("neg", "sin", "cos", "sinh", "cosh", "exp", "ln", "sqrt")
_BINARY_OPS = ("add", "sub", "mul", "div", "pow")
_EXPONENTS = (2.0, 3.0, -1.0, 0.5)


def random_expression(
    rng: np.random.Generator, depth: int = 6, variables: Sequence[str] = ("x", "y")
) -> Expr:
    """A random tree of at most ``depth`` operator levels."""
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return Var(variables[int(rng.integers(len(variables)))])
        return Const(round(float(rng.uniform(-2.0, 2.0)), 3))
    if rng.random() < 0.4:
        op = _UNARY_OPS[int(rng.integers(len(_UNARY_OPS)))]
        arg = random_expression(rng, depth - 1, variables)
        return neg(arg) if op == "neg" else call(op, arg)
    op = _BINARY_OPS[int(rng.integers(len(_BINARY_OPS)))]
    left = random_expression(rng, depth - 1, variables)
    if op == "pow":
        return power(left, _EXPONENTS[int(rng.integers(len(_EXPONENTS)))])
    right = random_expression(rng, depth - 1, variables)
    builder = {"add": add_expr, "sub": sub, "mul": mul, "div": div}[op]
    return builder(left, right)


def _largest_node(e: Expr, point: dict[str, float]) -> float:
    """Largest absolute value taken by any subtree at ``point``."""
    ev = Evaluator(point)
    largest, stack, seen = 0.0, [e], set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        largest = max(largest, abs(ev(node)))
        if isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
    return largest


@dataclass(frozen=True)
class PropertyResult:
    cases: int
    attempts: int
    worst: float
    worst_case: str


def derivative_property(
    cases: int = 1000,
    seed: int = 0,
    variables: Sequence[str] = ("x", "y"),
) -> PropertyResult:
    """Symbolic derivatives against central differences on tame random cases.

    A case is rejected when any subtree, the derivative or the third
    derivative is undefined or large at the point.
    """
    rng = np.random.default_rng(seed)
    accepted = attempts = 0
    worst, worst_case = 0.0, ""
    while accepted < cases:
        attempts += 1
        if attempts > 200 * cases:
            raise RuntimeError(f"Generator accepted only {accepted} of {attempts} cases")
        e = random_expression(rng, 6, variables)
        var = variables[int(rng.integers(len(variables)))]
        point = {v: float(rng.uniform(-1.0, 1.0)) for v in variables}
        d = Differentiator(var)
        first = d(e)
        try:
            slope = evaluate(first, point)
            if _largest_node(e, point) > 1e2 or abs(slope) > 1e2:
                continue
            if abs(evaluate(d(d(first)), point)) > 1e4:
                continue
            reference = central_difference(e, var, point, FD_STEP)
        except ArithmeticError:
            continue
        accepted += 1
        error = abs(slope - reference) / (1.0 + abs(slope))
        if error > worst:
            worst, worst_case = error, f"d/d{var} at {point}"
    return PropertyResult(accepted, attempts, worst, worst_case)


def check_derivative_property(tol: Optional[float] = None) -> CheckOutcome:
    bound = 1e-6 if tol is None else tol
    result = derivative_property()
    detail = f"{result.cases} cases ({result.attempts} drawn); worst {result.worst_case}"
    return _outcome(result.worst, bound, detail)


CHECKS: tuple[NamedCheck, ...] = (
    NamedCheck(1, "example1_family", ("conformal", "closed_form"), check_example1_family),
    NamedCheck(2, "example1_ode", ("conformal", "closed_form"), check_example1_ode),
    NamedCheck(3, "example2_profiles", ("conformal", "closed_form"), check_example2_profiles),
    NamedCheck(4, "dual_route", ("conformal", "oracle", "slow"), check_dual_route),
    NamedCheck(5, "conformal_identities", ("conformal", "oracle"), check_conformal_identities),
    NamedCheck(6, "sphere_control", ("control", "general"), check_sphere_control),
    NamedCheck(7, "einstein_controls", ("control", "einstein"), check_einstein_controls),
    NamedCheck(8, "minimal_controls", ("control", "general"), check_minimal_controls),
    NamedCheck(9, "invariances", ("invariance", "einstein"), check_invariances),
    NamedCheck(10, "search_recovery", ("search", "slow"), check_search_recovery),
    NamedCheck(11, "derivative_property", ("expr",), check_derivative_property),
)


def select_checks(filters: Optional[Sequence[str]] = None) -> list[NamedCheck]:
    """Checks matching any filter token (number, name or tag); all when no filter."""
    if not filters:
        return list(CHECKS)
    selected = [check for check in CHECKS if any(check.matches(t) for t in filters)]
    if not selected:
        raise ValueError(f"No check matches filter {','.join(filters)}")
    return selected


@dataclass(frozen=True)
class CheckRecord:
    check: int
    name: str
    tags: str
    passed: bool
    measured: float
    bound: float
    seconds: float
    detail: str


def run_one(number: int, tol: Optional[float] = None) -> CheckRecord:
    check = next(c for c in CHECKS if c.number == number)
    started = time.perf_counter()
    try:
        outcome = check.run(tol)
    except (ArithmeticError, ValueError, RuntimeError) as e:
        logger.exception("Check %d (%s) raised", check.number, check.name)
        outcome = CheckOutcome(False, math.inf, tol or 0.0, f"{type(e).__name__}: {e}")
    seconds = time.perf_counter() - started
    logger.info(
        "Check %d %s: %s (%.3e vs %.1e, %.1fs)",
        check.number,
        check.name,
        "pass" if outcome.passed else "FAIL",
        outcome.measured,
        outcome.bound,
        seconds,
    )
    return CheckRecord(
        check=check.number,
        name=check.name,
        tags=",".join(check.tags),
        passed=outcome.passed,
        measured=outcome.measured,
        bound=outcome.bound,
        seconds=seconds,
        detail=outcome.detail,
    )


def run_verify(
    filters: Optional[Sequence[str]] = None,
    tol: Optional[float] = None,
    workers: int = 1,
    config: Optional[dict] = None,
) -> Report:
    checks = select_checks(filters)
    numbers = [check.number for check in checks]
    if workers > 1 and len(numbers) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(numbers))) as pool:
            records = list(pool.map(run_one, numbers, [tol] * len(numbers)))
    else:
        records = [run_one(number, tol) for number in numbers]
    failed = [r.name for r in records if not r.passed]
    summary = {
        "checks": len(records),
        "passed": len(records) - len(failed),
        "failed": failed,
        "tolerance_override": tol,
    }
    return Report(
        mode="verify",
        columns=["check", "name", "tags", "passed", "measured", "bound", "seconds", "detail"],
        records=[asdict(r) for r in records],
        summary=summary,
        config=config or {"mode": "verify"},
        environment=environment(workers),
        passed=not failed,
    )
