"""Tests for validators."""

import math

import pytest

from pbih_cli.utils.validators import (
    parse_filter,
    validate_choice_or_raise,
    validate_grid_counts,
    validate_grid_counts_or_raise,
    validate_identifier,
    validate_identifier_or_raise,
    validate_tolerance,
    validate_tolerance_or_raise,
)


class TestValidateIdentifier:
    """Tests for validate_identifier."""

    def test_valid(self) -> None:
        for name in ("x1", "theta", "c_2", "_p"):
            assert validate_identifier(name) is True

    def test_invalid(self) -> None:
        for name in ("", "1x", "a-b", "x y", "a" * 65):
            assert validate_identifier(name) is False

    def test_raise_names_kind(self) -> None:
        with pytest.raises(ValueError, match="Invalid chart variable: '2u'"):
            validate_identifier_or_raise("2u", "chart variable")


class TestValidateChoice:
    """Tests for validate_choice_or_raise."""

    def test_valid(self) -> None:
        validate_choice_or_raise("csv", ("csv", "json"), "format")

    def test_invalid_lists_choices(self) -> None:
        with pytest.raises(ValueError, match="choose from: csv, json"):
            validate_choice_or_raise("xml", ("csv", "json"), "format")


class TestValidateGridCounts:
    """Tests for grid count validation."""

    def test_valid(self) -> None:
        assert validate_grid_counts([2, 8]) == (True, "")

    def test_empty(self) -> None:
        ok, message = validate_grid_counts([])
        assert not ok
        assert "at least one" in message

    def test_too_small(self) -> None:
        with pytest.raises(ValueError, match="at least 2, got 1"):
            validate_grid_counts_or_raise([4, 1])

    def test_not_integer(self) -> None:
        ok, message = validate_grid_counts([2.5])
        assert not ok
        assert "integers" in message


class TestValidateTolerance:
    """Tests for tolerance validation."""

    def test_valid(self) -> None:
        assert validate_tolerance(1e-8)
        assert validate_tolerance(1)

    def test_invalid(self) -> None:
        for tol in (0.0, -1e-8, math.nan, math.inf):
            assert not validate_tolerance(tol)

    def test_raise(self) -> None:
        with pytest.raises(ValueError, match="positive finite"):
            validate_tolerance_or_raise(-1.0)


class TestParseFilter:
    """Tests for check filters."""

    def test_numbers_names_and_tags(self) -> None:
        assert parse_filter("1, 5,conformal") == ["1", "5", "conformal"]

    def test_malformed(self) -> None:
        for text in ("", "1,,2", "a;b", ","):
            with pytest.raises(ValueError, match="Invalid filter"):
                parse_filter(text)
