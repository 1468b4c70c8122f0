"""Tests for expression parsing, differentiation and evaluation."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbih_cli.core.expr import (
    Binary,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Unary,
    UnboundVariableError,
    Var,
    central_difference,
    differentiate,
    evaluate,
    free_variables,
    parse,
    substitute,
    to_text,
)
from pbih_cli.core.verify import derivative_property, random_expression


class TestParse:
    """Precedence, associativity and syntax errors."""

    def test_power_binds_tighter_than_unary_minus(self) -> None:
        assert parse("-x^2") == Unary("neg", Binary("pow", Var("x"), Const(2.0)))
        assert evaluate(parse("-x^2"), {"x": 3.0}) == -9.0

    def test_negative_exponent(self) -> None:
        assert parse("2^-1") == Binary("pow", Const(2.0), Unary("neg", Const(1.0)))
        assert evaluate(parse("2^-1"), {}) == 0.5

    def test_power_is_right_associative(self) -> None:
        assert evaluate(parse("2^3^2"), {}) == 512.0

    def test_subtraction_and_division_are_left_associative(self) -> None:
        assert evaluate(parse("1 - 2 - 3"), {}) == -4.0
        assert evaluate(parse("8 / 4 / 2"), {}) == 1.0

    def test_functions_and_numbers(self) -> None:
        e = parse("sqrt(x) + ln(1.5e1) * cosh(.5)")
        expected = math.sqrt(4.0) + math.log(15.0) * math.cosh(0.5)
        assert evaluate(e, {"x": 4.0}) == pytest.approx(expected, rel=1e-15)

    def test_free_variables(self) -> None:
        assert free_variables(parse("a*sin(x) + b^2 - 3")) == {"a", "b", "x"}

    @pytest.mark.parametrize(
        "text, position",
        [
            ("x +", 3),
            ("x $ y", 2),
            ("(x + 1", 6),
            ("", 0),
        ],
    )
    def test_syntax_error_position(self, text: str, position: int) -> None:
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.position == position

    def test_unknown_function(self) -> None:
        with pytest.raises(ExprSyntaxError, match="Unknown function"):
            parse("tan(x)")

    def test_function_without_argument(self) -> None:
        with pytest.raises(ExprSyntaxError, match="needs an argument"):
            parse("sin x")

    def test_text_round_trip(self) -> None:
        for text in ("-x^2 + 3*y", "2^-1", "a/(b - c)^2", "exp(-sin(x))*ln(2 + y)"):
            e = parse(text)
            assert parse(to_text(e)) == e


class TestEvaluate:
    """Numeric evaluation and domain errors."""

    def test_unbound_variable(self) -> None:
        with pytest.raises(UnboundVariableError):
            evaluate(parse("x + y"), {"x": 1.0})

    @pytest.mark.parametrize("text", ["ln(0)", "sqrt(-1)", "1/0", "0^-1", "(-8)^(1/3)"])
    def test_domain_errors(self, text: str) -> None:
        with pytest.raises(ExprDomainError):
            evaluate(parse(text), {})

    def test_sqrt_of_zero_is_a_domain_error(self) -> None:
        with pytest.raises(ExprDomainError):
            evaluate(parse("sqrt(x)"), {"x": 0.0})

    def test_negative_base_integer_power(self) -> None:
        assert evaluate(parse("x^3"), {"x": -2.0}) == -8.0

    def test_overflow_is_a_domain_error(self) -> None:
        with pytest.raises(ExprDomainError):
            evaluate(parse("exp(x)"), {"x": 1000.0})

    def test_substitute_folds_constants(self) -> None:
        e = substitute(parse("a*x + b"), {"a": 2.0, "b": 0.0})
        assert free_variables(e) == {"x"}
        assert evaluate(e, {"x": 1.25}) == 2.5


class TestDifferentiate:
    """Exact derivatives against closed forms and central differences."""

    def test_chain_rule(self) -> None:
        d = differentiate(parse("sin(x^2)"), "x")
        assert evaluate(d, {"x": 0.7}) == pytest.approx(2 * 0.7 * math.cos(0.49), rel=1e-14)

    def test_quotient_rule(self) -> None:
        d = differentiate(parse("x/(1 + x^2)"), "x")
        x = 0.3
        assert evaluate(d, {"x": x}) == pytest.approx((1 - x * x) / (1 + x * x) ** 2, rel=1e-14)

    def test_variable_exponent(self) -> None:
        d = differentiate(parse("x^y"), "y")
        assert evaluate(d, {"x": 2.0, "y": 3.0}) == pytest.approx(8.0 * math.log(2.0))

    def test_other_variable_is_constant(self) -> None:
        assert differentiate(parse("a*y + cosh(a)"), "x") == Const(0.0)

    def test_linear_derivative_is_exact(self) -> None:
        assert evaluate(differentiate(parse("3*x - 2"), "x"), {"x": 5.0}) == 3.0

    @given(
        a=st.floats(min_value=-3.0, max_value=3.0),
        b=st.floats(min_value=-3.0, max_value=3.0),
        x=st.floats(min_value=-2.0, max_value=2.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_hand_derivative(self, a: float, b: float, x: float) -> None:
        e = parse("a*x^3 + b*sin(x) + exp(-x^2)")
        d = evaluate(differentiate(e, "x"), {"a": a, "b": b, "x": x})
        expected = 3 * a * x * x + b * math.cos(x) - 2 * x * math.exp(-x * x)
        assert d == pytest.approx(expected, rel=1e-12, abs=1e-12)

    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_random_trees_match_central_difference(self, seed: int) -> None:
        result = derivative_property(cases=20, seed=seed)
        assert result.cases == 20
        assert result.worst <= 1e-6

    def test_thousand_case_property(self) -> None:
        result = derivative_property(cases=1000, seed=0)
        assert result.worst <= 1e-6

    def test_central_difference_of_cubic(self) -> None:
        fd = central_difference(parse("x^3"), "x", {"x": 1.0})
        assert fd == pytest.approx(3.0, abs=1e-8)


class TestRandomExpression:
    """The seeded generator used by the derivative property."""

    def test_is_deterministic(self) -> None:
        import numpy as np

        first = random_expression(np.random.default_rng(7))
        second = random_expression(np.random.default_rng(7))
        assert first == second

    def test_uses_only_given_variables(self) -> None:
        import numpy as np

        rng = np.random.default_rng(3)
        for _ in range(50):
            assert free_variables(random_expression(rng, 4, ("u",))) <= {"u"}
