"""Tests for gamma families, the search objective and the restarted Nelder-Mead."""

import math

import pytest

from pbih_cli.core.catalog import catenoid_immersion, sphere_immersion
from pbih_cli.core.conformal import NonMinimalBaseError
from pbih_cli.core.geometry import Immersion
from pbih_cli.core.search import (
    FAMILIES,
    GammaFamily,
    SearchOptions,
    SearchProblem,
    SearchVerdict,
    family,
    minimize,
    objective,
)

HYPERPLANE = Immersion.from_text(("x1", "x2"), ["x1", "x2", "0"], [(-1.0, 1.0)] * 2)
GRID = ((-0.5, -0.5), (0.0, 0.25), (0.5, 0.5))


@pytest.fixture
def hyperplane_problem() -> SearchProblem:
    return SearchProblem(base=HYPERPLANE, family=family("example1"), grid=GRID)


class TestFamilies:
    """Templates and their declared parameters."""

    def test_builtin_families(self) -> None:
        assert set(FAMILIES) == {"example1", "log_affine_z", "powers_z", "radial"}
        assert family("example1").parameter_names == ("c1", "c2")

    def test_unknown_family(self) -> None:
        with pytest.raises(ValueError, match="Unknown gamma family"):
            family("spline")

    def test_empty_bounds(self) -> None:
        with pytest.raises(ValueError, match="Empty bounds"):
            GammaFamily.from_text("bad", "a*z", {"a": (1.0, 0.0)})

    def test_undeclared_names(self) -> None:
        custom = GammaFamily.from_text("custom", "a*z + b", {"a": (0.0, 1.0)})
        with pytest.raises(ValueError, match="undeclared names: b"):
            custom.ambient(3)

    def test_empty_grid(self) -> None:
        with pytest.raises(ValueError, match="grid is empty"):
            SearchProblem(base=HYPERPLANE, family=family("powers_z"), grid=())


class TestObjective:
    """Residual maximum plus the properness penalty."""

    @pytest.mark.parametrize("c1, c2", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)])
    def test_closed_form_family_reaches_zero(
        self, hyperplane_problem: SearchProblem, c1: float, c2: float
    ) -> None:
        assert objective(hyperplane_problem, {"c1": c1, "c2": c2}, 3.0) < 1e-9

    def test_outside_bounds(self, hyperplane_problem: SearchProblem) -> None:
        with pytest.raises(ValueError, match="outside bounds"):
            objective(hyperplane_problem, {"c1": 5.0, "c2": 1.0}, 3.0)

    def test_non_minimal_base(self) -> None:
        problem = SearchProblem(
            base=sphere_immersion(1.0), family=family("powers_z"), grid=((1.0, 0.5),)
        )
        with pytest.raises(NonMinimalBaseError):
            objective(problem, {"alpha": 0.1, "beta": 0.1}, 2.0)

    def test_flat_factor_is_penalized(self) -> None:
        problem = SearchProblem(base=HYPERPLANE, family=family("powers_z"), grid=GRID)
        # gamma = 0 keeps the plane minimal, so only the penalty remains
        assert objective(problem, {"alpha": 0.0, "beta": 0.0}, 2.0) == pytest.approx(1e-4)

    def test_catenoid_is_finite_and_positive(self) -> None:
        problem = SearchProblem(
            base=catenoid_immersion(1.0, 0.0),
            family=family("log_affine_z"),
            grid=((0.3, -0.4), (1.2, 0.5)),
        )
        value = objective(problem, {"alpha": 0.5, "beta": 1.0}, 3.0)
        assert math.isfinite(value)
        assert value > 0.0


class TestMinimize:
    """Restarts, history and verdicts."""

    def test_recovers_closed_form(self, hyperplane_problem: SearchProblem) -> None:
        result = minimize(
            hyperplane_problem, (3.0, 3.0), SearchOptions(max_iters=20, restarts=2, seed=1)
        )
        assert result.verdict is SearchVerdict.CANDIDATE_FOUND
        assert result.objective < 1e-9
        assert result.best_p == 3.0
        assert set(result.best_params) == {"c1", "c2"}

    def test_history_is_monotone(self, hyperplane_problem: SearchProblem) -> None:
        result = minimize(
            hyperplane_problem, (2.0, 4.0), SearchOptions(max_iters=15, restarts=3, seed=2)
        )
        bests = [entry.best for entry in result.history]
        assert bests == sorted(bests, reverse=True)
        assert [entry.evaluation for entry in result.history] == list(range(len(bests)))
        assert {entry.restart for entry in result.history} == {0, 1, 2}
        assert 2.0 <= result.best_p <= 4.0

    def test_zero_budget(self, hyperplane_problem: SearchProblem) -> None:
        result = minimize(hyperplane_problem, (3.0, 3.0), SearchOptions(max_iters=0, restarts=2))
        assert len(result.history) == 2
        assert result.restarts[0].message == "zero iteration budget"
        assert result.restarts[0].start == {"c1": 1.25, "c2": 1.25, "p": 3.0}

    def test_seed_is_reproducible(self, hyperplane_problem: SearchProblem) -> None:
        options = SearchOptions(max_iters=10, restarts=2, seed=5)
        first = minimize(hyperplane_problem, (2.0, 4.0), options)
        second = minimize(hyperplane_problem, (2.0, 4.0), options)
        assert first.best_params == second.best_params
        assert [e.objective for e in first.history] == [e.objective for e in second.history]

    def test_flat_floor_is_not_a_candidate(self) -> None:
        problem = SearchProblem(base=HYPERPLANE, family=family("powers_z"), grid=GRID)
        result = minimize(problem, (2.0, 2.0), SearchOptions(max_iters=0, restarts=1))
        assert result.verdict is SearchVerdict.NO_CANDIDATE
        assert "does not mean" in result.note

    @pytest.mark.parametrize("p_range", [(1.5, 3.0), (4.0, 3.0)])
    def test_invalid_p_range(
        self, hyperplane_problem: SearchProblem, p_range: tuple[float, float]
    ) -> None:
        with pytest.raises(ValueError, match="p range"):
            minimize(hyperplane_problem, p_range)

    def test_invalid_options(self) -> None:
        with pytest.raises(ValueError, match="Invalid search options"):
            SearchOptions(restarts=0)
