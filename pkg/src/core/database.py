# src/core/database.py
import sqlite3
import json
import logging
from src.core.critical import CriticalPointReport

logger = logging.getLogger(__name__)
DB_NAME = "orbit_reports.db" # Default database name

def init_db(db_name: str = DB_NAME) -> sqlite3.Connection | None:
    """
    Initializes the SQLite report store. Connects to the database file (creating it
    if it doesn't exist) and ensures the tables 'runs', 'critical_values' and
    'orbits' are created.

    Args:
        db_name: The name of the database file to connect to.
                 Defaults to DB_NAME ("orbit_reports.db").

    Returns:
        An active sqlite3.Connection object.

    Raises:
        sqlite3.Error: If any SQLite error occurs during connection or table creation.
    """
    try:
        conn = sqlite3.connect(db_name)
        cursor = conn.cursor()

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                subcommand TEXT NOT NULL,
                preset TEXT,
                config TEXT,
                seed INTEGER,
                status TEXT DEFAULT 'running',
                created TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS critical_values (
                run_id INTEGER NOT NULL,
                quantity TEXT NOT NULL,
                lo REAL,
                hi REAL,
                method TEXT,
                FOREIGN KEY (run_id) REFERENCES runs (id)
            )
        ''')

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS orbits (
                run_id INTEGER NOT NULL,
                k REAL,
                action REAL,
                grad_norm REAL,
                period REAL,
                closure REAL,
                drift REAL,
                conormal_residual TEXT,
                morse_index INTEGER,
                winding TEXT,
                status TEXT,
                FOREIGN KEY (run_id) REFERENCES runs (id)
            )
        ''')
        conn.commit()
        logger.info(f"Report store '{db_name}' initialized with tables 'runs', 'critical_values' and 'orbits'.")
        return conn
    except sqlite3.Error as e:
        logger.error(f"Database initialization error for '{db_name}': {e}", exc_info=True)
        raise # main.py catches this and exits

def save_run(conn: sqlite3.Connection, subcommand: str, preset: str | None, config: dict, seed: int) -> int | None:
    """
    Records the start of a CLI run. The run config is stored as a JSON string.

    Returns:
        The new run id, or None if the insert failed.
    """
    cursor = conn.cursor()
    try:
        cursor.execute('''
            INSERT INTO runs (subcommand, preset, config, seed)
            VALUES (?, ?, ?, ?)
        ''', (subcommand, preset, json.dumps(config, default=str), seed))
        conn.commit()
        logger.info(f"Run {cursor.lastrowid} recorded: {subcommand} (preset: {preset})")
        return cursor.lastrowid
    except (sqlite3.Error, TypeError) as e:
        logger.error(f"Database error in save_run for {subcommand}: {e}", exc_info=True)
        return None

def finish_run(conn: sqlite3.Connection, run_id: int, status: str) -> None:
    """Sets the final status ('ok', 'config-error', 'numerical-error') of a run."""
    cursor = conn.cursor()
    try:
        cursor.execute("UPDATE runs SET status = ? WHERE id = ?", (status, run_id))
        conn.commit()
        logger.debug(f"Run {run_id} finished with status {status}")
    except sqlite3.Error as e:
        logger.error(f"Database error in finish_run for run {run_id}: {e}", exc_info=True)

def save_critical_values(conn: sqlite3.Connection, run_id: int, rows) -> None:
    """
    Stores (quantity, lo, hi, method) rows, e.g. from CriticalValueReport.rows().
    """
    cursor = conn.cursor()
    try:
        cursor.executemany('''
            INSERT INTO critical_values (run_id, quantity, lo, hi, method)
            VALUES (?, ?, ?, ?, ?)
        ''', [(run_id, q, float(lo), float(hi), method) for q, lo, hi, method in rows])
        conn.commit()
        logger.info(f"Stored {len(rows)} critical values for run {run_id}")
    except sqlite3.Error as e:
        logger.error(f"Database error in save_critical_values for run {run_id}: {e}", exc_info=True)

def save_orbit(conn: sqlite3.Connection, run_id: int, report: CriticalPointReport) -> None:
    """
    Stores the residuals of a critical-point report. The conormal residual pair
    and the winding are stored as JSON strings.
    """
    data = report.to_dict()
    cursor = conn.cursor()
    try:
        cursor.execute('''
            INSERT INTO orbits (run_id, k, action, grad_norm, period, closure, drift, conormal_residual,
                                morse_index, winding, status)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            run_id,
            data["k"],
            data["value"],
            data["grad_norm"],
            data["T"],
            data["closure_residual"],
            data["energy_drift"],
            json.dumps(data["conormal_residual"]),
            data["index"],
            json.dumps(data["winding"]),
            data["status"]
        ))
        conn.commit()
        logger.info(f"Orbit stored for run {run_id}: status {data['status']}, action {data['value']:.6g}")
    except sqlite3.Error as e:
        logger.error(f"Database error in save_orbit for run {run_id}: {e}", exc_info=True)

def get_run(conn: sqlite3.Connection, run_id: int) -> dict | None:
    """
    Retrieves a run by id, with its config decoded.

    Returns:
        A dict with keys id, subcommand, preset, config, seed, status, created; None if not found.
    """
    cursor = conn.cursor()
    try:
        cursor.execute("SELECT id, subcommand, preset, config, seed, status, created FROM runs WHERE id = ?", (run_id,))
        row = cursor.fetchone()
        if row:
            return {
                "id": row[0],
                "subcommand": row[1],
                "preset": row[2],
                "config": json.loads(row[3] or '{}'), # Handle null from DB
                "seed": row[4],
                "status": row[5],
                "created": row[6],
            }
        logger.debug(f"No run found with id {run_id}")
        return None
    except sqlite3.Error as e:
        logger.error(f"Database error in get_run for run {run_id}: {e}", exc_info=True)
        return None
    except json.JSONDecodeError as e:
        logger.error(f"JSON decode error in get_run for run {run_id}: {e}", exc_info=True)
        return None

def get_critical_values(conn: sqlite3.Connection, run_id: int) -> list[tuple]:
    """Returns the (quantity, lo, hi, method) rows of a run, in insertion order."""
    cursor = conn.cursor()
    try:
        cursor.execute("SELECT quantity, lo, hi, method FROM critical_values WHERE run_id = ? ORDER BY rowid", (run_id,))
        return [tuple(row) for row in cursor.fetchall()]
    except sqlite3.Error as e:
        logger.error(f"Database error in get_critical_values for run {run_id}: {e}", exc_info=True)
        return []

def get_orbits(conn: sqlite3.Connection, run_id: int) -> list[dict]:
    cursor = conn.cursor()
    try:
        cursor.execute('''
            SELECT k, action, grad_norm, period, closure, drift, conormal_residual, morse_index, winding, status
            FROM orbits WHERE run_id = ? ORDER BY rowid
        ''', (run_id,))
        keys = ["k", "action", "grad_norm", "T", "closure", "drift", "conormal_residual", "index", "winding", "status"]
        orbits = []
        for row in cursor.fetchall():
            entry = dict(zip(keys, row))
            entry["conormal_residual"] = json.loads(entry["conormal_residual"] or 'null')
            entry["winding"] = json.loads(entry["winding"] or 'null')
            orbits.append(entry)
        return orbits
    except (sqlite3.Error, json.JSONDecodeError) as e:
        logger.error(f"Database error in get_orbits for run {run_id}: {e}", exc_info=True)
        return []

def list_runs(conn: sqlite3.Connection, limit: int = 20) -> list[tuple]:
    """The most recent runs as (id, subcommand, preset, status, created)."""
    cursor = conn.cursor()
    try:
        cursor.execute("SELECT id, subcommand, preset, status, created FROM runs ORDER BY id DESC LIMIT ?", (limit,))
        return [tuple(row) for row in cursor.fetchall()]
    except sqlite3.Error as e:
        logger.error(f"Database error in list_runs: {e}", exc_info=True)
        return []

if __name__ == '__main__':
    # Basic logging setup for standalone testing
    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    logger.info("Starting database.py standalone test...")

    db_conn = init_db(db_name="test_orbit_reports.db") # Use a test DB for standalone runs
    run = save_run(db_conn, "mane", "hyperbolic-horocycle", {"k_lo": 0.0, "k_hi": 1.0}, 0)
    save_critical_values(db_conn, run, [("c", 0.495, 0.5, "negative loop / u=0")])
    finish_run(db_conn, run, "ok")
    logger.info(f"Retrieved run: {get_run(db_conn, run)}")
    logger.info(f"Critical values: {get_critical_values(db_conn, run)}")
    db_conn.close()
