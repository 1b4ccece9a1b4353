# src/cli/presets.py
"""
Named model presets.

Each preset is a run-config document (the same schema as a YAML run config,
see `src/cli/runconfig.py`); a user config naming a preset is merged on top of
it, so any field can be overridden.
"""
import copy
import logging

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

PSI = "bump(y, 0.1, 0.3, 0.7, 0.9)"
"""Cutoff ψ(y): values in [0, 1], zero near y = 0 ≡ 1, equal to 1 on [0.3, 0.7]."""

PRESETS: dict[str, dict] = {
    "hyperbolic-horocycle": {
        "description": "Hyperbolic half-plane, theta = dx/y (d theta = area form); c(L) = 1/2.",
        "surface": {"kind": "hyperbolic", "box": [-1000.0, 1000.0, 1e-3, 1e3]},
        "lagrangian": {"theta": ["1/y", "0"], "bounds": [0.5, 10.0]},
        "boundary": {"q0": {"kind": "point", "center": [0.0, 1.0]},
                     "q1": {"kind": "horizontal", "level": 1.0}},
        "k": 0.25,
        "path": {"kind": "hyperbolic_circle", "r": 1.0, "clockwise": True},
    },
    "torus-psi-cutoff": {
        "description": "Flat torus, theta = psi(y) dx with a cutoff psi; c(L) = 1/2, c_u(L) <= 1/8.",
        "surface": {"kind": "torus", "lx": 1.0, "ly": 1.0},
        "lagrangian": {"theta": [PSI, "0"], "bounds": [0.5, 10.0]},
        "boundary": {"q0": {"kind": "point", "center": [0.5, 0.5]},
                     "q1": {"kind": "horizontal", "level": 0.5}},
        "k": 0.3,
        "path": {"kind": "straight", "start": [0.0, 0.5], "winding": [-1, 0], "T": 1.0},
        "seed_potential": [0.5, 0.0],
    },
    "torus-constant-B": {
        "description": "Flat torus with the constant non-exact 2-form sigma = dx^dy; orbits are circles.",
        "surface": {"kind": "torus", "lx": 1.0, "ly": 1.0},
        "lagrangian": {"sigma": "1", "bounds": [0.5, 0.0]},
        "boundary": {"q0": {"kind": "horizontal", "level": 0.0},
                     "q1": {"kind": "vertical", "level": 0.5}},
        "k": 0.5,
        "path": {"kind": "circle", "center": [0.5, 0.5], "radius": 0.8, "clockwise": True, "T": 5.0},
        "shoot": {"q0": [0.5, 0.5], "v0": [1.0, 0.0], "T": 6.283185307179586, "steps": 6284},
    },
    "torus-oscillating": {
        "description": "Flat torus with the oscillating 2-form sigma = (1/2 + 5 sin 2pi x sin 2pi y) dx^dy.",
        "surface": {"kind": "torus", "lx": 1.0, "ly": 1.0},
        "lagrangian": {"sigma": "1/2 + 5*sin(2*pi*x)*sin(2*pi*y)", "bounds": [0.5, 0.0]},
        "boundary": {"q0": {"kind": "horizontal", "level": 0.0},
                     "q1": {"kind": "vertical", "level": 0.5}},
        "k": 0.05,
        "path": {"kind": "circle", "center": [0.75, 0.25], "radius": 0.1, "clockwise": True, "T": 1.0},
        "taimanov": {"k_grid": [0.01, 10.0, 13], "spacing": "geometric", "grid": 128},
    },
    "sphere-standard-magnetic": {
        "description": "Round unit sphere with sigma = area form; energy-k orbits are latitude-size circles.",
        "surface": {"kind": "sphere", "radius": 1.0},
        "lagrangian": {"sigma": "1", "bounds": [0.5, 0.0]},
        "boundary": {"q0": {"kind": "point", "center": [0.0, 0.0]},
                     "q1": {"kind": "horizontal", "level": 0.0}},
        "k": 0.5,
        "path": {"kind": "latitude", "rho": 1.0, "clockwise": True, "T": 2.0},
        "family": "sphere-latitudes",
        "k_grid": [0.3, 0.7, 5],
    },
    "mechanical-torus": {
        "description": "Flat torus, theta = 0, V = cos(2pi x) cos(2pi y); all Mane values equal max V = 1.",
        "surface": {"kind": "torus", "lx": 1.0, "ly": 1.0},
        "lagrangian": {"potential": "cos(2*pi*x)*cos(2*pi*y)", "bounds": [0.5, 1.0]},
        "boundary": {"q0": {"kind": "horizontal", "level": 0.0},
                     "q1": {"kind": "vertical", "level": 0.5}},
        "k": 0.5,
        "path": {"kind": "straight", "start": [0.0, 0.25], "winding": [1, 0], "T": 1.0},
        "family": "mechanical",
        "k_grid": [-0.7, 0.7, 8],
    },
}


def presets() -> list[tuple[str, str]]:
    """(name, one-line description) of every preset, in a stable order."""
    return [(name, doc["description"]) for name, doc in PRESETS.items()]


def preset_document(name: str) -> dict:
    """
    A deep copy of a preset's run-config document.

    Raises:
        ConfigError: If no preset has that name.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose one of: {', '.join(PRESETS)}")
    doc = copy.deepcopy(PRESETS[name])
    doc.pop("description", None)
    doc["preset"] = name
    logger.debug(f"Loaded preset {name}")
    return doc


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; `override` wins, nested tables are merged key by key."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged
