# src/utils/config.py
"""
Environment defaults for the orbit search toolkit.

Values are read once, on import, from the process environment after
`python-dotenv` has merged a `.env` file found at the project root. They are
exposed as module-level constants and act as fallbacks: anything given in a
run config (YAML) or on the command line wins.

Recognised variables:
    ORBIT_OUTPUT_DIR: Directory receiving CSV/JSON artifacts.
    ORBIT_REPORT_DB: SQLite file recording every run.
    ORBIT_LOG_LEVEL: Logging level name for `src/main.py`.
    ORBIT_SEED: Default random seed.
    ORBIT_NODES: Default number of path segments N.
    ORBIT_GRAD_TOL: Default dual-norm stopping tolerance of the flow.
    ORBIT_MAX_ITERS: Default iteration cap of the flow.
    ORBIT_T_FLOOR: Default period floor below which a flow reports collapse.
    ORBIT_SPHERE_SWITCH: Chart radius beyond which sphere paths change chart.
"""
import os
import logging
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

if load_dotenv():
    logger.debug(".env file loaded successfully.")
else:
    logger.debug("No .env file found or it is empty. Relying on environment variables set externally if any.")


def _read_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not a number; using default {default}.")
        return default


def _read_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not an integer; using default {default}.")
        return default


# --- Output ---
OUTPUT_DIR: str = os.getenv("ORBIT_OUTPUT_DIR", "runs")
"""Directory where every run writes its CSV tables and JSON summary."""

REPORT_DB: str = os.getenv("ORBIT_REPORT_DB", "orbit_reports.db")
"""SQLite database recording runs, critical values and certified orbits."""

LOG_LEVEL: str = os.getenv("ORBIT_LOG_LEVEL", "INFO").upper()
"""Root logging level used by `src/main.py`."""

# --- Numerical defaults ---
DEFAULT_SEED: int = _read_int("ORBIT_SEED", 0)
"""Seed for every random draw a run makes (reproducibility)."""

DEFAULT_NODES: int = _read_int("ORBIT_NODES", 128)
"""Number of segments N of a discretized path when the config does not say."""

GRAD_TOL: float = _read_float("ORBIT_GRAD_TOL", 1e-8)
"""Flow stops as Converged once the dual norm of the action form is below this."""

MAX_ITERS: int = _read_int("ORBIT_MAX_ITERS", 4000)
"""Iteration cap for a single flow run."""

T_FLOOR: float = _read_float("ORBIT_T_FLOOR", 1e-4)
"""Period below which a flow terminates with TCollapse."""

SPHERE_CHART_SWITCH: float = _read_float("ORBIT_SPHERE_SWITCH", 1.5)
"""Stereographic radius beyond which a sphere point is moved to the other chart."""

if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
    logger.warning(f"ORBIT_LOG_LEVEL={LOG_LEVEL!r} is not a logging level; falling back to INFO.")
    LOG_LEVEL = "INFO"
if GRAD_TOL <= 0:
    logger.warning(f"ORBIT_GRAD_TOL must be positive, got {GRAD_TOL}; using 1e-8.")
    GRAD_TOL = 1e-8
if T_FLOOR < 0:
    logger.warning(f"ORBIT_T_FLOOR must be non-negative, got {T_FLOOR}; using 1e-4.")
    T_FLOOR = 1e-4


if __name__ == '__main__':
    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])

    logger.info("--- Configuration Loading Test ---")
    logger.info(f"OUTPUT_DIR: {OUTPUT_DIR}")
    logger.info(f"REPORT_DB: {REPORT_DB}")
    logger.info(f"LOG_LEVEL: {LOG_LEVEL}")
    logger.info(f"DEFAULT_SEED: {DEFAULT_SEED}")
    logger.info(f"DEFAULT_NODES: {DEFAULT_NODES}")
    logger.info(f"GRAD_TOL: {GRAD_TOL}")
    logger.info(f"MAX_ITERS: {MAX_ITERS}")
    logger.info(f"T_FLOOR: {T_FLOOR}")
    logger.info(f"SPHERE_CHART_SWITCH: {SPHERE_CHART_SWITCH}")
    logger.info("\nPut overrides in a .env file at the project root, e.g. ORBIT_NODES=256")
