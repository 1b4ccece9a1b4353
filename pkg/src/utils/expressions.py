# src/utils/expressions.py
"""
Expression strings for model fields.

Potentials V, the components of a 1-form θ and the density f of a 2-form are
written in run configs as strings in the chart coordinates `x`, `y`, e.g.
``"cos(2*pi*x)*cos(2*pi*y)"`` or ``"bump(y, 0.1, 0.3, 0.7, 0.9)"``. They are
parsed with SymPy so the first derivatives the numerics need are exact, then
compiled to NumPy callables with `lambdify`.
"""
import logging

import numpy as np
import sympy as sp

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

X, Y = sp.symbols("x y", real=True)


def smoothstep(t):
    """Quintic C² ramp: 0 for t ≤ 0, 1 for t ≥ 1."""
    t = sp.sympify(t)
    return sp.Piecewise((0, t <= 0), (1, t >= 1), (6 * t**5 - 15 * t**4 + 10 * t**3, True))


def bump(s, a, b, c, d):
    """Plateau function equal to 1 on [b, c] and 0 outside [a, d]."""
    s = sp.sympify(s)
    return smoothstep((s - a) / sp.sympify(b - a)) * (1 - smoothstep((s - c) / sp.sympify(d - c)))


_LOCALS = {
    "x": X, "y": Y,
    "pi": sp.pi, "E": sp.E,
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan,
    "sinh": sp.sinh, "cosh": sp.cosh, "tanh": sp.tanh,
    "exp": sp.exp, "log": sp.log, "sqrt": sp.sqrt,
    "abs": sp.Abs, "Abs": sp.Abs,
    "Piecewise": sp.Piecewise,
    "smoothstep": smoothstep, "bump": bump,
}


def parse_expression(text, parameters: dict | None = None) -> sp.Expr:
    """
    Parses an expression string in the chart coordinates x, y.

    Args:
        text: The expression (a string or a plain number).
        parameters: Optional named numeric constants usable in the string.

    Returns:
        The SymPy expression.

    Raises:
        ConfigError: If the string does not parse or uses unknown symbols.
    """
    if isinstance(text, (int, float)):
        return sp.Float(text)
    locs = dict(_LOCALS)
    for name, value in (parameters or {}).items():
        locs[name] = sp.Float(value)
    try:
        expr = sp.sympify(str(text), locals=locs)
    except (sp.SympifyError, SyntaxError, TypeError, AttributeError) as e:
        raise ConfigError(f"cannot parse expression {text!r}: {e}") from e
    if not isinstance(expr, sp.Expr):
        raise ConfigError(f"expression {text!r} is not a scalar expression")
    unknown = expr.free_symbols - {X, Y}
    if unknown:
        names = ", ".join(sorted(str(s) for s in unknown))
        raise ConfigError(f"expression {text!r} uses unknown symbols: {names}")
    logger.debug(f"Parsed expression {text!r} -> {expr}")
    return expr


def _broadcast(value, x, y) -> np.ndarray:
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    return np.asarray(value, dtype=float) + np.zeros(shape)


class ScalarField:
    """
    A scalar function of the chart coordinates with its exact gradient.

    Attributes:
        expr (sympy.Expr): The symbolic definition.
        is_zero (bool): True when the field vanishes identically.
    """
    def __init__(self, expr, name: str = "field"):
        self.expr = sp.sympify(expr)
        self.name = name
        self.is_zero = bool(self.expr == 0)
        self._value = sp.lambdify((X, Y), self.expr, "numpy")
        self._dx = sp.lambdify((X, Y), sp.diff(self.expr, X), "numpy")
        self._dy = sp.lambdify((X, Y), sp.diff(self.expr, Y), "numpy")

    @classmethod
    def parse(cls, text, name: str = "field", parameters: dict | None = None) -> "ScalarField":
        return cls(parse_expression(text, parameters), name=name)

    @classmethod
    def zero(cls, name: str = "field") -> "ScalarField":
        return cls(sp.Integer(0), name=name)

    def __call__(self, x, y) -> np.ndarray:
        return _broadcast(self._value(x, y), x, y)

    def gradient(self, x, y) -> np.ndarray:
        """Returns ∂_x, ∂_y stacked on a trailing axis of length 2."""
        return np.stack([_broadcast(self._dx(x, y), x, y), _broadcast(self._dy(x, y), x, y)], axis=-1)

    def __repr__(self) -> str:
        return f"ScalarField({self.name}={self.expr})"
