"""Validation utilities for names, grids and tolerances."""

import math
import re
from collections.abc import Iterable, Sequence

from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)

# Expression variables, parameters and configuration names
IDENTIFIER_REGEX = re.compile(r"^[A-Za-z_][A-Za-z0-9_]{0,63}$")
# Check filter: comma-separated numbers, names or tags
FILTER_REGEX = re.compile(r"^[A-Za-z0-9_]+(,[A-Za-z0-9_]+)*$")


def validate_identifier(name: str) -> bool:
    """Validate an expression variable or configuration name."""
    if not name or len(name) > 64:
        return False
    return bool(IDENTIFIER_REGEX.match(name))


def validate_identifier_or_raise(name: str, kind: str = "identifier") -> None:
    """Validate identifier; raise ValueError if invalid."""
    if not validate_identifier(name):
        raise ValueError(f"Invalid {kind}: {name!r}")


def validate_choice_or_raise(value: str, choices: Iterable[str], kind: str) -> None:
    choices = tuple(choices)
    if value not in choices:
        raise ValueError(f"Invalid {kind}: {value!r}; choose from: {', '.join(choices)}")


def validate_grid_counts(counts: Sequence[int]) -> tuple[bool, str]:
    """
    Validate per-variable grid counts.
    Returns (True, "") if valid, else (False, error_message).
    """
    if not counts:
        return False, "Grid needs at least one count"
    for n in counts:
        if isinstance(n, bool) or int(n) != n:
            return False, f"Grid counts must be integers, got {n!r}"
        if n < 2:
            return False, f"Grid counts must be at least 2, got {n}"
    return True, ""


def validate_grid_counts_or_raise(counts: Sequence[int]) -> None:
    ok, message = validate_grid_counts(counts)
    if not ok:
        raise ValueError(message)


def validate_tolerance(tol: float) -> bool:
    return isinstance(tol, (int, float)) and math.isfinite(tol) and tol > 0.0


def validate_tolerance_or_raise(tol: float) -> None:
    """Validate a residual tolerance; raise ValueError if not a positive finite number."""
    if not validate_tolerance(tol):
        raise ValueError(f"Tolerance must be a positive finite number, got {tol!r}")


def parse_filter(text: str) -> list[str]:
    """Split a check filter like ``1,5,conformal``; raise ValueError if malformed."""
    cleaned = text.replace(" ", "")
    if not FILTER_REGEX.match(cleaned):
        raise ValueError(f"Invalid filter: {text!r}")
    return cleaned.split(",")
