"""Utility modules for pbih."""

from pbih_cli.utils.logger import get_logger, setup_logging
from pbih_cli.utils.reports import load_report, save_report
from pbih_cli.utils.validators import validate_identifier, validate_tolerance

__all__ = [
    "get_logger",
    "setup_logging",
    "load_report",
    "save_report",
    "validate_identifier",
    "validate_tolerance",
]
