"""Configuration for pbih."""

import os
from pathlib import Path
from typing import Optional

# Logging (configurable via environment)
_log_file = os.environ.get("PBIH_LOG_FILE", "")
LOG_FILE: Optional[Path] = Path(_log_file) if _log_file else None
LOG_LEVEL = os.environ.get("PBIH_LOG_LEVEL", "INFO").upper()

# Execution
WORKERS = max(int(os.environ.get("PBIH_WORKERS", str(os.cpu_count() or 1))), 1)

# Residual checks
DEFAULT_TOLERANCE = float(os.environ.get("PBIH_TOLERANCE", "1e-8"))
GRID_MARGIN = float(os.environ.get("PBIH_GRID_MARGIN", "1e-3"))

# Fixed numeric thresholds
DEGENERACY_TOL = 1e-12  # smallest singular value of the induced metric
MINIMALITY_TOL = 1e-10  # |f| of a base immersion treated as minimal
P_HARMONIC_TOL = 1e-9
EINSTEIN_TOL = 1e-6
PROPER_TOL = 1e-4  # max|f~| below this counts as minimal in the search
CONSTANCY_TOL = 1e-9
FD_STEP = 1e-5

# Report formats
REPORT_FORMATS = ("csv", "json")
SIGNIFICANT_DIGITS = 17

# Sample configurations shipped with the repository
CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"
