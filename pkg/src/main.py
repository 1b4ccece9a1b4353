# src/main.py
"""
Main entry point for the orbit search runner.

This script performs the following actions:
1.  Sets up centralized logging for the application.
2.  Loads environment defaults via `src.utils.config`.
3.  Checks the numerical defaults for consistency.
4.  Opens the report store using `src.core.database` (skipped with --no-store).
5.  Hands the command line over to `src.cli.commands.run`.
6.  Closes the report store and exits with the subcommand's status.

Usage:
    python -m src.main mane --preset hyperbolic-horocycle --out runs/hyperbolic
    python -m src.main action-eval --preset torus-psi-cutoff --k 0.3
    python -m src.main presets
"""
import logging
import sys

# Custom modules
from src.utils import config # Loads .env variables upon import

# --- Logging Setup ---
logging.basicConfig(level=getattr(logging, config.LOG_LEVEL, logging.INFO),
                    format='%(asctime)s - %(levelname)s - %(name)s - [%(funcName)s] %(message)s',
                    handlers=[logging.StreamHandler()])
logger = logging.getLogger(__name__) # Logger for this specific module

from src.core import database
from src.cli import commands


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv

    # --- Configuration Check ---
    if config.DEFAULT_NODES < 8:
        logger.critical(f"ORBIT_NODES must be at least 8, got {config.DEFAULT_NODES}. Please check your .env file.")
        return commands.EXIT_CONFIG
    if config.MAX_ITERS < 1:
        logger.critical(f"ORBIT_MAX_ITERS must be positive, got {config.MAX_ITERS}.")
        return commands.EXIT_CONFIG

    # --- Report Store ---
    db_connection = None
    if "--no-store" not in argv and "presets" not in argv[:1]:
        try:
            db_connection = database.init_db(config.REPORT_DB)
        except Exception as e:
            logger.critical(f"Failed to initialize the report store '{config.REPORT_DB}': {e}", exc_info=True)
            return commands.EXIT_NUMERICAL

    try:
        return commands.run(argv, db_connection)
    finally:
        if db_connection:
            try:
                db_connection.close()
                logger.debug("Report store closed.")
            except Exception as e:
                logger.error(f"Error closing the report store: {e}", exc_info=True)


if __name__ == "__main__":
    sys.exit(main())
