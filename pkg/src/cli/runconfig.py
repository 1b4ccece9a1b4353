# src/cli/runconfig.py
"""
YAML run configs.

A run config names an optional preset and overrides any of its tables:

    preset: torus-psi-cutoff
    lagrangian:
      theta: ["bump(y, 0.1, 0.3, 0.7, 0.9)", "0"]
      potential: "0"
    solver: {nodes: 128, tol: 1.0e-8, max_iters: 4000, metric: H1}
    k: 0.3
    k_grid: "0.1:0.9:9"
    seed: 0
    output: runs/psi

Every validation failure raises ConfigError carrying the YAML line of the
offending key when it can be traced.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import yaml

from src.cli.presets import merge, preset_document
from src.core.descent import FlowConfig
from src.core.dynamics import LagrangianModel
from src.core.errors import ConfigError, OrbitSearchError
from src.core.paths import (DiscretePath, circle_loop, constant_path, hyperbolic_circle, latitude_loop,
                            read_path_csv, straight_loop)
from src.core.surface import Circle, SurfaceModel
from src.utils import config

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {"preset", "surface", "lagrangian", "boundary", "solver", "k", "k_grid", "seed", "output",
                  "path", "family", "shoot", "taimanov", "seed_potential", "search"}


class _Lines:
    """Maps key paths of the parsed document to 1-based YAML lines."""

    def __init__(self, root=None):
        self.root = root

    def line(self, *keys) -> int | None:
        node = self.root
        if node is None:
            return None
        for key in keys:
            if not isinstance(node, yaml.MappingNode):
                break
            for key_node, value_node in node.value:
                if key_node.value == key:
                    node = value_node
                    break
            else:
                break
        return node.start_mark.line + 1

    def fail(self, message: str, *keys) -> ConfigError:
        return ConfigError(message, self.line(*keys))


@dataclass
class RunConfig:
    """
    A validated run configuration.

    Attributes:
        model: The Lagrangian model (surface, θ, V, σ, bounds).
        q0, q1: Endpoint submanifolds (None when the config has no boundary table).
        flow: Step policy and stopping rules.
        nodes: Default number of path segments.
        k: Energy level, if given.
        k_grid: Energy grid, if given.
        seed: Random seed.
        output_dir: Where artifacts go.
        path: Initial path spec (table), if given.
        family: Minimax family name, if any.
        document: The merged config document (stored with the run).
    """
    model: LagrangianModel
    q0: Circle | None
    q1: Circle | None
    flow: FlowConfig
    nodes: int
    k: float | None
    k_grid: np.ndarray | None
    seed: int
    output_dir: str
    path: dict | None = None
    family: str | None = None
    preset: str | None = None
    document: dict = field(default_factory=dict)
    lines: _Lines = field(default_factory=_Lines, repr=False)

    @property
    def surface(self) -> SurfaceModel:
        return self.model.surface

    def section(self, name: str) -> dict:
        value = self.document.get(name) or {}
        if not isinstance(value, dict):
            raise self.lines.fail(f"'{name}' must be a table", name)
        return value

    def require_k(self) -> float:
        if self.k is None:
            raise ConfigError("this command needs an energy level: set 'k' or pass --k")
        return self.k

    def require_k_grid(self) -> np.ndarray:
        if self.k_grid is None:
            raise ConfigError("this command needs an energy grid: set 'k_grid' or pass --k-grid lo:hi:n")
        return self.k_grid

    def initial_path(self, nodes: int | None = None) -> DiscretePath:
        """
        Builds the initial path from the 'path' table.

        Raises:
            ConfigError: If the table is missing or malformed.
        """
        spec = self.path
        if not spec:
            raise ConfigError("no initial path: add a 'path' table")
        n = int(spec.get("nodes", nodes or self.nodes))
        kind = spec.get("kind")
        try:
            if kind == "straight":
                return straight_loop(spec["start"], spec["winding"], self.surface.periods, n, float(spec.get("T", 1.0)))
            if kind == "circle":
                return circle_loop(spec["center"], float(spec["radius"]), n, float(spec.get("T", 1.0)),
                                   bool(spec.get("clockwise", True)), int(spec.get("chart", 0)))
            if kind == "hyperbolic_circle":
                return hyperbolic_circle(float(spec["r"]), n, spec.get("center", (0.0, 1.0)),
                                         bool(spec.get("clockwise", True)), spec.get("T"))
            if kind == "latitude":
                return latitude_loop(self.surface, float(spec["rho"]), n, float(spec.get("T", 1.0)),
                                     bool(spec.get("clockwise", True)))
            if kind == "constant":
                return constant_path(spec["point"], n, float(spec.get("T", 1.0)), chart=int(spec.get("chart", 0)))
            if kind == "csv":
                return read_path_csv(spec["file"])[0]
        except KeyError as e:
            raise self.lines.fail(f"path of kind {kind!r} needs the field {e.args[0]!r}", "path") from e
        except (TypeError, ValueError, OSError) as e:
            raise self.lines.fail(f"invalid path table: {e}", "path") from e
        except OrbitSearchError as e:
            raise self.lines.fail(f"invalid path: {e}", "path") from e
        raise self.lines.fail(f"unknown path kind {kind!r}", "path", "kind")


def parse_k_grid(value, lines: _Lines | None = None) -> np.ndarray:
    """
    Parses 'lo:hi:n' or [lo, hi, n] into an increasing grid of n points.

    Raises:
        ConfigError: If the value is malformed or not increasing.
    """
    lines = lines or _Lines()
    try:
        if isinstance(value, str):
            lo, hi, n = value.split(":")
        else:
            lo, hi, n = value
        lo, hi, n = float(lo), float(hi), int(n)
    except (TypeError, ValueError) as e:
        raise lines.fail(f"k_grid must be 'lo:hi:n' or [lo, hi, n], got {value!r}", "k_grid") from e
    if n < 1 or (n > 1 and hi <= lo):
        raise lines.fail(f"k_grid needs lo < hi and n ≥ 1, got {value!r}", "k_grid")
    return np.linspace(lo, hi, n)


def _surface(doc: dict, lines: _Lines) -> SurfaceModel:
    spec = doc.get("surface")
    if not isinstance(spec, dict):
        raise lines.fail("a 'surface' table is required", "surface")
    kind = spec.get("kind")
    try:
        if kind == "torus":
            return SurfaceModel.flat_torus(float(spec.get("lx", 1.0)), float(spec.get("ly", 1.0)))
        if kind == "hyperbolic":
            return SurfaceModel.hyperbolic(tuple(float(v) for v in spec.get("box", (-1000.0, 1000.0, 1e-3, 1e3))))
        if kind == "sphere":
            return SurfaceModel.round_sphere(float(spec.get("radius", 1.0)),
                                             float(spec.get("chart_switch", config.SPHERE_CHART_SWITCH)))
    except (TypeError, ValueError, OrbitSearchError) as e:
        raise lines.fail(f"invalid surface: {e}", "surface") from e
    raise lines.fail(f"unknown surface kind {kind!r} (torus, hyperbolic, sphere)", "surface", "kind")


def _model(doc: dict, surface: SurfaceModel, lines: _Lines) -> LagrangianModel:
    spec = doc.get("lagrangian") or {}
    if not isinstance(spec, dict):
        raise lines.fail("'lagrangian' must be a table", "lagrangian")
    theta = spec.get("theta", ["0", "0"])
    if not isinstance(theta, (list, tuple)) or len(theta) != 2:
        raise lines.fail("theta must be a list of two expressions", "lagrangian", "theta")
    bounds = spec.get("bounds", [0.5, 0.0])
    try:
        a, b = float(bounds[0]), float(bounds[1])
    except (TypeError, ValueError, IndexError) as e:
        raise lines.fail(f"bounds must be [a, b], got {bounds!r}", "lagrangian", "bounds") from e
    if a <= 0:
        raise lines.fail(f"the quadratic bound a must be positive, got {a}", "lagrangian", "bounds")
    name = doc.get("preset") or "custom"
    try:
        model = LagrangianModel.build(surface, theta=tuple(theta), potential=spec.get("potential", "0"),
                                      sigma_density=spec.get("sigma", "0"), bounds=(a, b),
                                      parameters=spec.get("parameters"), name=name)
    except ConfigError as e:
        raise ConfigError(str(e), lines.line("lagrangian")) from e
    if surface.is_sphere and model.has_sigma and model.sigma_density.expr.free_symbols:
        raise lines.fail("on the sphere only a constant sigma density is supported", "lagrangian", "sigma")
    if surface.is_sphere and (model.has_theta or not model.potential.is_zero):
        raise lines.fail("on the sphere theta and the potential must vanish (set sigma instead)", "lagrangian")
    return model


def _circle(spec, lines: _Lines, key: str) -> Circle:
    if not isinstance(spec, dict):
        raise lines.fail(f"{key} must be a table", "boundary", key)
    kind = spec.get("kind")
    try:
        if kind == "point":
            return Circle.point(*map(float, spec["center"]))
        if kind == "horizontal":
            return Circle.horizontal(float(spec["level"]))
        if kind == "vertical":
            return Circle.vertical(float(spec["level"]))
        if kind == "round":
            cx, cy = map(float, spec["center"])
            return Circle.round(cx, cy, float(spec["radius"]))
    except (KeyError, TypeError, ValueError) as e:
        raise lines.fail(f"invalid {key}: {e}", "boundary", key) from e
    raise lines.fail(f"unknown {key} kind {kind!r} (point, horizontal, vertical, round)", "boundary", key)


def _flow(doc: dict, lines: _Lines) -> tuple[FlowConfig, int]:
    spec = doc.get("solver") or {}
    if not isinstance(spec, dict):
        raise lines.fail("'solver' must be a table", "solver")
    known = {"nodes", "step", "tol", "max_iters", "t_floor", "metric", "polish", "adaptive", "max_step"}
    for key in spec:
        if key not in known:
            raise lines.fail(f"unknown solver option {key!r}", "solver", key)
    try:
        flow = FlowConfig(step=float(spec.get("step", 0.5)),
                          adaptive=bool(spec.get("adaptive", True)),
                          max_step=float(spec.get("max_step", 2.0)),
                          tol=float(spec.get("tol", config.GRAD_TOL)),
                          max_iters=int(spec.get("max_iters", config.MAX_ITERS)),
                          t_floor=float(spec.get("t_floor", config.T_FLOOR)),
                          metric=str(spec.get("metric", "H1")),
                          polish=bool(spec.get("polish", True)))
        nodes = int(spec.get("nodes", config.DEFAULT_NODES))
    except (TypeError, ValueError, OrbitSearchError) as e:
        raise lines.fail(f"invalid solver table: {e}", "solver") from e
    if nodes < 8:
        raise lines.fail(f"solver.nodes must be at least 8, got {nodes}", "solver", "nodes")
    return flow, nodes


def build_run_config(doc: dict, lines: _Lines | None = None) -> RunConfig:
    """Validates a merged config document into a RunConfig."""
    lines = lines or _Lines()
    for key in doc:
        if key not in TOP_LEVEL_KEYS:
            raise lines.fail(f"unknown key {key!r}", key)
    surface = _surface(doc, lines)
    model = _model(doc, surface, lines)
    q0 = q1 = None
    boundary = doc.get("boundary")
    if boundary:
        if not isinstance(boundary, dict) or "q0" not in boundary or "q1" not in boundary:
            raise lines.fail("boundary needs both q0 and q1", "boundary")
        q0 = _circle(boundary["q0"], lines, "q0")
        q1 = _circle(boundary["q1"], lines, "q1")
    flow, nodes = _flow(doc, lines)
    k = doc.get("k")
    if k is not None:
        try:
            k = float(k)
        except (TypeError, ValueError) as e:
            raise lines.fail(f"k must be a number, got {k!r}", "k") from e
    k_grid = parse_k_grid(doc["k_grid"], lines) if doc.get("k_grid") is not None else None
    try:
        seed = int(doc.get("seed", config.DEFAULT_SEED))
    except (TypeError, ValueError) as e:
        raise lines.fail(f"seed must be an integer, got {doc.get('seed')!r}", "seed") from e
    path = doc.get("path")
    if path is not None and not isinstance(path, dict):
        raise lines.fail("'path' must be a table", "path")
    family = doc.get("family")
    if family is not None and family not in ("mechanical", "sphere-latitudes"):
        raise lines.fail(f"unknown family {family!r} (mechanical, sphere-latitudes)", "family")
    run = RunConfig(model=model, q0=q0, q1=q1, flow=flow, nodes=nodes, k=k, k_grid=k_grid, seed=seed,
                    output_dir=str(doc.get("output", config.OUTPUT_DIR)), path=path, family=family,
                    preset=doc.get("preset"), document=doc, lines=lines)
    logger.debug(f"Run config built for model {model.name}")
    return run


def parse_run_config(text: str, preset: str | None = None) -> RunConfig:
    """
    Parses YAML text, merges it onto its preset (or the `preset` argument), and validates it.

    Raises:
        ConfigError: On YAML syntax errors or invalid content, with the line when known.
    """
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}",
                          mark.line + 1 if mark is not None else None) from e
    lines = _Lines(root)
    if not isinstance(doc, dict):
        raise ConfigError("a run config must be a mapping", 1)
    name = doc.get("preset", preset)
    if name is not None:
        try:
            doc = merge(preset_document(name), doc)
        except ConfigError as e:
            raise ConfigError(str(e), lines.line("preset")) from e
    return build_run_config(doc, lines)


def load_run_config(filename: str, preset: str | None = None) -> RunConfig:
    """Reads and parses a YAML run config file."""
    try:
        with open(filename, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {filename!r}: {e}") from e
    logger.info(f"Loaded run config {filename}")
    return parse_run_config(text, preset)


def preset_run_config(name: str) -> RunConfig:
    return build_run_config(preset_document(name))
