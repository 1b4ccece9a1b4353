# src/cli/commands.py
"""
Subcommands of the orbit search runner.

Every subcommand reads a run config (YAML file and/or preset), applies the
command-line overrides, writes its CSV tables plus one JSON summary into the
output directory, and returns an exit status: 0 on success, 1 on a config
error, 2 on a numerical failure.
"""
import argparse
import csv
import json
import logging
import os
import sqlite3

import numpy as np

from src.cli.presets import presets
from src.cli.runconfig import RunConfig, load_run_config, parse_k_grid, preset_run_config
from src.core import database
from src.core.critical import minimize
from src.core.descent import tracked_value, value_kind
from src.core.dynamics import shoot, validate_bounds
from src.core.errors import ClippedError, ConfigError, OrbitSearchError
from src.core.mane import (LoopSearchConfig, chain_check, critical_value_report, e0, k_q, loop_seeds, mane_bracket,
                           mane_upper, upper_cap)
from src.core.minimax import family_alpha, mechanical_family, minimax_sweep, mountain_pass, sphere_latitude_family
from src.core.paths import action, length, mean_energy, theta_line_integral, write_path_csv
from src.core.taimanov import taimanov_scan, tau_plus_bracket, write_scan_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class ChainViolation(OrbitSearchError):
    """The chain of critical values failed its bracket-aware check."""


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _out(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, name)


def _bracket_dict(bracket) -> dict:
    return {"lo": bracket.lo, "hi": bracket.hi, "method_lo": bracket.method_lo, "method_hi": bracket.method_hi,
            "heuristic_hi": bracket.heuristic_hi, "widened": bracket.widened}


def _family_builder(run: RunConfig):
    model = run.model
    if run.family == "mechanical":
        return lambda k: mechanical_family(model)
    if run.family == "sphere-latitudes":
        return lambda k: sphere_latitude_family(model, k)
    raise ConfigError("this command needs a minimax family: set 'family' (mechanical, sphere-latitudes)",
                      run.lines.line("family"))


# --- subcommand handlers ---------------------------------------------------------

def cmd_action_eval(run: RunConfig, args, out_dir: str, store) -> dict:
    k = run.require_k()
    path = run.initial_path()
    model = run.model
    kind = value_kind(model, path)
    value = action(model, path, k)
    summary = {"k": k, "action": value, "T": path.T, "nodes": path.n_segments,
               "length": length(path, model.surface), "mean_energy": mean_energy(model, path),
               "theta_integral": theta_line_integral(model, path), "value_kind": kind}
    if kind == "capped":
        summary["capped_action"] = tracked_value(model, path, k, kind)
    ok, worst = validate_bounds(model, rng=np.random.default_rng(run.seed))
    summary["bounds_check"] = {"ok": ok, "worst_margin": worst}
    write_path_csv(path, _out(out_dir, "action_eval_path.csv"), k)
    print(f"action = {value:.10g}")
    return summary


def cmd_shoot(run: RunConfig, args, out_dir: str, store) -> dict:
    spec = run.section("shoot")
    q0 = args.q0 if args.q0 is not None else spec.get("q0")
    v0 = args.v0 if args.v0 is not None else spec.get("v0")
    if q0 is None or v0 is None:
        raise ConfigError("shoot needs an initial state: a 'shoot' table or --q0/--v0", run.lines.line("shoot"))
    T = float(args.T if args.T is not None else spec.get("T", 1.0))
    steps = int(args.steps if args.steps is not None else spec.get("steps", 1000))
    try:
        path, cert = shoot(run.model, q0, v0, T, steps, chart=int(spec.get("chart", 0)), k=run.k)
    except ClippedError as e:
        if e.partial_path is not None:
            write_path_csv(e.partial_path, _out(out_dir, "shoot_partial.csv"), run.k)
        raise
    write_path_csv(path, _out(out_dir, "shoot_path.csv"), run.k)
    print(f"closure = {cert.closure_residual:.3e}, energy drift = {cert.energy_drift:.3e}")
    return {"q0": q0, "v0": v0, "T": T, "steps": steps, "closure_residual": cert.closure_residual,
            "energy_drift": cert.energy_drift, "conormal_residual": list(cert.conormal_residual)}


def cmd_minimize(run: RunConfig, args, out_dir: str, store) -> dict:
    k = run.require_k()
    report = minimize(run.model, run.initial_path(), k, run.flow, with_index=args.index)
    write_path_csv(report.path, _out(out_dir, "minimize_path.csv"), k)
    store(report)
    print(f"{report.status}: value = {report.value}, |eta_k| = {report.grad_norm:.3e}, T = {report.path.T:.6g}")
    return report.to_dict()


def cmd_mountain_pass(run: RunConfig, args, out_dir: str, store) -> dict:
    k = run.require_k()
    family = _family_builder(run)(k)
    history = []
    c, report = mountain_pass(run.model, family, k, run.flow, rounds=args.rounds, with_index=args.index,
                              history=history)
    write_path_csv(report.path, _out(out_dir, "mountain_pass_candidate.csv"), k)
    store(report)
    summary = {"c": c, "rounds": len(history) - 1, "family": family.label, "candidate": report.to_dict()}
    alpha = family_alpha(run.model, family, k)
    if alpha is not None:
        summary["alpha"] = alpha
        summary["above_alpha"] = c > alpha
        if c <= alpha:
            logger.warning(f"c({k:g}) = {c:.6g} does not exceed alpha(k) = {alpha:.6g}")
    print(f"c({k:g}) = {c:.10g}; candidate {report.status}")
    return summary


def cmd_sweep(run: RunConfig, args, out_dir: str, store) -> dict:
    k_grid = run.require_k_grid()
    table = minimax_sweep(run.model, _family_builder(run), k_grid, run.flow, rounds=args.rounds)
    table.to_csv(_out(out_dir, "sweep.csv"))
    print(f"monotone: {table.monotone()} (largest drop {table.max_violation:.3e})")
    return {"k_grid": k_grid, "monotone": table.monotone(), "max_violation": table.max_violation,
            "slopes": table.slopes(), "rows": [[r.k, r.c, r.T, r.alpha, r.status] for r in table.rows]}


def cmd_mane(run: RunConfig, args, out_dir: str, store) -> dict:
    model = run.model
    floor, cap = e0(model), upper_cap(model)
    search = LoopSearchConfig(descent_iters=args.descent)
    seeds = loop_seeds(model, search)
    seed = run.document.get("seed_potential")
    c = mane_bracket(model, floor - 1.0, cap + 1.0, "c", search, args.tol, seeds, mane_upper(model, "fourier"))
    cu = mane_bracket(model, floor - 1.0, cap + 1.0, "c_u", search, args.tol, seeds,
                      mane_upper(model, "fourier+linear", seed=seed))
    rows = [("e0", floor, floor, "grid + refinement"),
            ("c_u", cu.lo, cu.hi, f"{cu.method_lo} / {cu.method_hi}"),
            ("c", c.lo, c.hi, f"{c.method_lo} / {c.method_hi}"),
            ("upper_cap", cap, cap, "e0 + |theta|^2/(4a)")]
    summary = {"e0": floor, "c": _bracket_dict(c), "c_u": _bracket_dict(cu), "upper_cap": cap}
    if run.q0 is not None:
        kq = k_q(model, run.q0, run.q1)
        rows += [("kQ_minus", kq[0], kq[0], "min E on Q0∩Q1 + max |theta|^2/(4a)"),
                 ("kQ", kq[1], kq[1], "max E on Q0∩Q1 + max |theta|^2/(4a)")]
        summary["kQ"] = kq
    with open(_out(out_dir, "mane_bracket.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "lo", "hi", "method"])
        for quantity, lo, hi, method in rows:
            writer.writerow([quantity, repr(float(lo)), repr(float(hi)), method])
    store(rows)
    print(f"c(L) in [{c.lo:.6g}, {c.hi:.6g}], c_u(L) in [{cu.lo:.6g}, {cu.hi:.6g}]")
    return summary


def _taimanov_grid(run: RunConfig, args) -> np.ndarray:
    if args.k_grid is not None or (run.k_grid is not None and not run.section("taimanov")):
        return run.require_k_grid()
    spec = run.section("taimanov")
    if "k_grid" not in spec:
        raise ConfigError("taimanov needs an energy grid: a 'taimanov.k_grid' entry or --k-grid",
                          run.lines.line("taimanov"))
    lo, hi, n = spec["k_grid"]
    if spec.get("spacing") == "geometric":
        if float(lo) <= 0:
            raise ConfigError("a geometric k grid needs lo > 0", run.lines.line("taimanov", "k_grid"))
        return np.geomspace(float(lo), float(hi), int(n))
    return parse_k_grid([lo, hi, n], run.lines)


def cmd_taimanov(run: RunConfig, args, out_dir: str, store) -> dict:
    k_grid = _taimanov_grid(run, args)
    size = int(args.grid or run.section("taimanov").get("grid", 128))
    rows = taimanov_scan(run.model, k_grid, size)
    write_scan_csv(rows, _out(out_dir, "taimanov_scan.csv"))
    bracket = tau_plus_bracket(run.model, k_grid, size, rows=rows)
    summary = {"grid": size, "tau_plus": _bracket_dict(bracket),
               "rows": [[r.k, r.value, r.label] for r in rows]}
    if args.refine:
        fine = tau_plus_bracket(run.model, k_grid, 2 * size)
        summary["tau_plus_refined"] = _bracket_dict(fine)
    store([("tau_plus", bracket.lo, bracket.hi, f"{bracket.method_lo} / {bracket.method_hi}")])
    print(f"tau_+ in [{bracket.lo:.6g}, {bracket.hi:.6g}]")
    return summary


def cmd_chain_check(runs: list[RunConfig], args, out_dir: str, store) -> dict:
    results = {}
    all_rows = []
    failed = []
    for run in runs:
        if run.q0 is None:
            raise ConfigError(f"chain-check needs a boundary table (model {run.model.name})")
        report = critical_value_report(run.model, run.q0, run.q1, LoopSearchConfig(descent_iters=args.descent),
                                       args.tol, seed=run.document.get("seed_potential"))
        if args.with_tau and run.model.has_sigma and run.surface.is_torus:
            report.tau_plus = tau_plus_bracket(run.model, np.geomspace(0.01, 10.0, 13))
        ok, violations = chain_check(report)
        report.to_csv(_out(out_dir, f"chain_{run.model.name}.csv"))
        store(report.rows())
        all_rows += [(run.model.name,) + row for row in report.rows()]
        results[run.model.name] = {"ok": ok, "violations": violations, "rows": report.rows()}
        print(f"{run.model.name}: {'ok' if ok else 'VIOLATED'}")
        if not ok:
            failed.append(run.model.name)
    with open(_out(out_dir, "chain_check.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "quantity", "lo", "hi", "method"])
        for name, quantity, lo, hi, method in all_rows:
            writer.writerow([name, quantity, repr(float(lo)), repr(float(hi)), method])
    if failed:
        summary_path = _out(out_dir, "summary.json")
        with open(summary_path, "w") as fh:
            json.dump(_jsonable({"subcommand": "chain-check", "status": "violated", "results": results}), fh, indent=2)
        raise ChainViolation(f"chain of critical values violated for: {', '.join(failed)}")
    return results


HANDLERS = {
    "action-eval": cmd_action_eval,
    "shoot": cmd_shoot,
    "minimize": cmd_minimize,
    "mountain-pass": cmd_mountain_pass,
    "sweep": cmd_sweep,
    "mane": cmd_mane,
    "taimanov": cmd_taimanov,
}


# --- parser and runner -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbit-search",
                                     description="Energy-k orbits of magnetic flows on model surfaces.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config")
    common.add_argument("--preset", help="named preset (see the 'presets' command)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--k", type=float, help="energy level")
    common.add_argument("--k-grid", dest="k_grid", help="energy grid lo:hi:n")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--no-store", dest="no_store", action="store_true", help="do not record the run")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("action-eval", parents=[common], help="action of the configured path")
    shoot_parser = sub.add_parser("shoot", parents=[common], help="integrate the flow from an initial state")
    shoot_parser.add_argument("--q0", type=float, nargs=2)
    shoot_parser.add_argument("--v0", type=float, nargs=2)
    shoot_parser.add_argument("--T", type=float)
    shoot_parser.add_argument("--steps", type=int)
    minimize_parser = sub.add_parser("minimize", parents=[common], help="descend to a critical point")
    minimize_parser.add_argument("--index", action="store_true", help="compute the Morse index")
    for name, text in (("mountain-pass", "minimax over the configured family"),
                       ("sweep", "minimax values over a k grid")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--rounds", type=int, default=300)
        p.add_argument("--index", action="store_true", help="compute the Morse index of the candidate")
    for name, text in (("mane", "brackets for c(L) and c_u(L)"), ("chain-check", "chain of critical values")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--tol", type=float, default=5e-3, help="bisection tolerance")
        p.add_argument("--descent", type=int, default=0, help="flow iterations on the best seed loops")
        if name == "chain-check":
            p.add_argument("--with-tau", dest="with_tau", action="store_true", help="add tau_+ for sigma models")
    taimanov_parser = sub.add_parser("taimanov", parents=[common], help="Taimanov functional scan and tau_+")
    taimanov_parser.add_argument("--grid", type=int, help="film grid size M")
    taimanov_parser.add_argument("--refine", action="store_true", help="repeat at grid 2M")
    sub.add_parser("presets", help="list the presets")
    return parser


def _load(args) -> list[RunConfig]:
    if args.config:
        runs = [load_run_config(args.config, args.preset)]
    elif args.preset:
        runs = [preset_run_config(args.preset)]
    elif args.command == "chain-check":
        runs = [preset_run_config(name) for name, _ in presets()]
    else:
        raise ConfigError("give a run config (--config) or a preset (--preset)")
    for run in runs:
        if args.k is not None:
            run.k = args.k
        if args.k_grid is not None:
            run.k_grid = parse_k_grid(args.k_grid)
        if args.seed is not None:
            run.seed = args.seed
        if args.out is not None:
            run.output_dir = args.out
    return runs


def run(argv=None, db_conn: sqlite3.Connection | None = None) -> int:
    """
    Parses the command line and executes one subcommand.

    Args:
        argv: Argument list (defaults to sys.argv[1:]).
        db_conn: Report store; runs are recorded unless --no-store is given.

    Returns:
        The exit status.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags; here 2 means a numerical failure
        if e.code in (0, None):
            return EXIT_OK
        logger.error(f"Config error: invalid command line {argv!r}")
        return EXIT_CONFIG
    if args.command == "presets":
        for name, description in presets():
            print(f"{name:28s} {description}")
        return EXIT_OK

    try:
        runs = _load(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG

    first = runs[0]
    out_dir = first.output_dir
    store_enabled = db_conn is not None and not args.no_store
    run_id = None
    if store_enabled:
        document = first.document if len(runs) == 1 else {"presets": [r.preset for r in runs]}
        run_id = database.save_run(db_conn, args.command, first.preset, document, first.seed)

    def store(item):
        if run_id is None:
            return
        if isinstance(item, list):
            database.save_critical_values(db_conn, run_id, item)
        else:
            database.save_orbit(db_conn, run_id, item)

    status, code = "ok", EXIT_OK
    try:
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "chain-check":
            results = cmd_chain_check(runs, args, out_dir, store)
        else:
            results = HANDLERS[args.command](first, args, out_dir, store)
        summary = {"subcommand": args.command, "preset": first.preset, "seed": first.seed, "status": status,
                   "results": results}
        with open(_out(out_dir, "summary.json"), "w") as fh:
            json.dump(_jsonable(summary), fh, indent=2)
        logger.info(f"{args.command} finished; artifacts in {out_dir}")
    except ConfigError as e:
        logger.error(f"Config error in {args.command}: {e}", exc_info=True)
        status, code = "config-error", EXIT_CONFIG
    except OrbitSearchError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        status, code = "numerical-error", EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"Could not write artifacts to {out_dir}: {e}", exc_info=True)
        status, code = "numerical-error", EXIT_NUMERICAL
    if run_id is not None:
        database.finish_run(db_conn, run_id, status)
    return code


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(name)s - [%(funcName)s] %(message)s',
                        handlers=[logging.StreamHandler()])
    raise SystemExit(run(["presets"]))
