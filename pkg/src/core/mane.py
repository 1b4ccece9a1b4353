# src/core/mane.py
"""
Critical-value estimation: e0, the conormal thresholds k⁻_Q ≤ k_Q, Mañé
critical values by negative-loop search and by the Hamiltonian bound, k0, and
the report with its chain check.

Lower sides are certified: a loop (path) of negative action at level k proves
k < c (k < k0). Upper sides come from trial potentials u, since
c ≤ sup_q [½‖d_qu − θ_q‖² + V(q)] for every admissible u (periodic u for c,
u with linear part for c_u). When σ is not dθ these quantities refer to L
alone.
"""
import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from src.core.dynamics import LagrangianModel, theta_sup_norm
from src.core.errors import DomainError, OrbitSearchError, PreconditionError
from src.core.paths import (BoundarySpec, DiscretePath, action, circle_loop, constant_path, hyperbolic_circle,
                            latitude_loop, straight_loop, theta_line_integral)
from src.core.surface import Circle, HomotopyClass, homotopy_class, intersect
from src.utils.expressions import ScalarField

logger = logging.getLogger(__name__)


def lagrangian_only(model: LagrangianModel) -> LagrangianModel:
    """The model without its extra 2-form."""
    if not model.has_sigma:
        return model
    return replace(model, sigma_density=ScalarField.zero("f"))


# --- e0 and the conormal thresholds -------------------------------------------------

def e0(model: LagrangianModel, n: int = 96) -> float:
    """max_q E(q, 0) = max V, by grid sampling and local refinement."""
    surface = model.surface
    if model.potential.is_zero:
        return 0.0
    pts, _ = surface.grid(n)
    values = model.potential_at(pts)
    best = int(np.argmax(values))
    grid_max = float(values[best])

    def negative(q):
        try:
            if not surface.in_box(q):
                return -grid_max
            surface.conformal(q[None, :])
        except DomainError:
            return -grid_max
        return -float(model.potential_at(q[None, :])[0])

    result = optimize.minimize(negative, pts[best], method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-12})
    refined = -float(result.fun)
    return max(grid_max, refined)


def k_q(model: LagrangianModel, q0: Circle, q1: Circle) -> tuple[float, float]:
    """
    (k⁻_Q, k_Q): min resp. max of E(q, 0) over Q0∩Q1 plus max ‖θ_q‖²/(4a).

    Raises:
        PreconditionError: If Q0 and Q1 do not intersect.
    """
    pts = intersect(model.surface, q0, q1)
    if len(pts) == 0:
        raise PreconditionError("Q0 and Q1 do not intersect")
    energies = model.potential_at(pts)
    lam, _ = model.surface.conformal(pts)
    theta_sq = np.sum(model.theta_at(pts)**2, axis=-1) / lam
    extra = float(np.max(theta_sq)) / (4.0 * model.bounds[0])
    return float(np.min(energies)) + extra, float(np.max(energies)) + extra


def upper_cap(model: LagrangianModel) -> float:
    """e0 + ‖θ‖∞²/(4a), the top of the chain of critical values."""
    return e0(model) + theta_sup_norm(model)**2 / (4.0 * model.bounds[0])


# --- negative-loop search --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LoopSeed:
    """
    A seed loop with the T-dependence of its action split off:
    A_k(x, T) = alpha/T + (k − mean_potential)·T + offset.
    """
    label: str
    path: DiscretePath
    alpha: float
    mean_potential: float
    offset: float
    winding: HomotopyClass

    def min_action(self, k: float) -> float:
        b = k - self.mean_potential
        if b < 0:
            return -np.inf
        if b == 0:
            return self.offset
        return 2.0 * np.sqrt(self.alpha * b) + self.offset

    def best_T(self, k: float) -> float:
        b = k - self.mean_potential
        if b <= 0 or self.alpha == 0:
            return self.path.T
        return float(np.sqrt(self.alpha / b))


@dataclass(frozen=True)
class LoopSearchConfig:
    """
    Seed families for the negative-action search.

    Attributes:
        levels: Number of base levels for torus geodesics, circles and rectangles.
        radii: Circle radii as fractions of the injectivity scale.
        widths: Rectangle widths in periods.
        hyperbolic_radii: Hyperbolic radii of the γ_r family.
        segment_length: Target hyperbolic length of a γ_r segment.
        max_nodes: Node cap per seed.
        nodes_per_length: Chart node density of the torus seeds.
        descent_iters: Flow iterations spent on the best non-negative seeds (0 disables).
    """
    levels: int = 8
    radii: tuple = (0.05, 0.1, 0.2, 0.4, 0.8)
    widths: tuple = (1, 2, 4, 8, 16)
    hyperbolic_radii: tuple = tuple(np.linspace(0.25, 6.0, 24))
    segment_length: float = 0.05
    max_nodes: int = 25000
    nodes_per_length: int = 64
    descent_iters: int = 0


@dataclass(frozen=True)
class LoopSearchResult:
    """Outcome of `mane_lower`: whether a negative loop was found, and the best seed."""
    found: bool
    best_value: float
    best_label: str

    def __bool__(self) -> bool:
        return self.found


def _make_seed(model: LagrangianModel, label: str, path: DiscretePath) -> LoopSeed:
    unit = path.with_T(1.0)
    pot = model.potential_at(unit.nodes)
    mean_pot = float(unit.ds * np.sum(0.5 * (pot[:-1] + pot[1:])))
    offset = theta_line_integral(model, unit)
    alpha = action(model, unit, 0.0) + mean_pot - offset
    return LoopSeed(label, unit, max(alpha, 0.0), mean_pot, offset, homotopy_class(model.surface, unit))


def _rectangle(x0, y0, width, height, n_per_length, clockwise):
    corners = np.array([[x0, y0], [x0 + width, y0], [x0 + width, y0 + height], [x0, y0 + height], [x0, y0]])
    if clockwise:
        corners = corners[::-1]
    pieces = []
    for a, b in zip(corners[:-1], corners[1:]):
        m = max(2, int(np.ceil(np.linalg.norm(b - a) * n_per_length)))
        t = np.linspace(0.0, 1.0, m + 1)[:-1, None]
        pieces.append(a + t * (b - a))
    pieces.append(corners[-1:])
    return np.vstack(pieces)


def _maxima_points(model: LagrangianModel, count: int = 4, n: int = 64):
    pts, charts = model.surface.grid(n)
    values = model.potential_at(pts)
    order = np.argsort(values)[::-1][:count]
    return pts[order], charts[order]


def loop_seeds(model: LagrangianModel, search: LoopSearchConfig | None = None) -> list[LoopSeed]:
    """
    Seed loops for the surface: constant loops at the maxima of V, lattice
    geodesics and rectangles (torus), circles, the hyperbolic circles γ_r
    (clockwise, uniform in hyperbolic arclength) and sphere latitudes.
    """
    search = search or LoopSearchConfig()
    model = lagrangian_only(model)
    surface = model.surface
    seeds = []
    peaks, peak_charts = _maxima_points(model)
    for p, ch in zip(peaks, peak_charts):
        seeds.append(_make_seed(model, "constant", constant_path(p, 8, 1.0, chart=int(ch))))

    if surface.is_torus:
        lx, ly = surface.lx, surface.ly
        levels = np.arange(search.levels) / search.levels
        density = search.nodes_per_length
        for winding in [(1, 0), (0, 1), (1, 1), (1, -1)]:
            for sign in (1, -1):
                w = (sign * winding[0], sign * winding[1])
                n = max(16, int(np.ceil(np.hypot(w[0] * lx, w[1] * ly) * density)))
                for level in levels:
                    start = (0.0, level * ly) if winding != (0, 1) else (level * lx, 0.0)
                    seeds.append(_make_seed(model, f"geodesic{w}", straight_loop(start, w, surface.periods, n, 1.0)))
        scale = surface.injectivity_scale()
        for cx in levels * lx:
            for cy in levels * ly:
                for r in search.radii:
                    radius = r * scale
                    n = max(32, int(np.ceil(2 * np.pi * radius * density)))
                    for cw in (True, False):
                        seeds.append(_make_seed(model, "circle", circle_loop((cx, cy), radius, n, 1.0, clockwise=cw)))
        for i, lo in enumerate(levels):
            for hi in levels[i + 1:]:
                for width in search.widths:
                    for cw in (True, False):
                        horizontal = _rectangle(0.0, lo * ly, width * lx, (hi - lo) * ly, density, cw)
                        vertical = _rectangle(lo * lx, 0.0, (hi - lo) * lx, width * ly, density, cw)
                        seeds.append(_make_seed(model, "rectangle", DiscretePath(horizontal, 1.0)))
                        seeds.append(_make_seed(model, "rectangle", DiscretePath(vertical, 1.0)))
    elif surface.is_hyperbolic:
        for r in search.hyperbolic_radii:
            n = int(min(search.max_nodes, max(64, np.ceil(2 * np.pi * np.sinh(r) / search.segment_length))))
            for cw in (True, False):
                loop = hyperbolic_circle(r, n, clockwise=cw)
                if surface.in_box(loop.nodes):
                    seeds.append(_make_seed(model, f"gamma_r(r={r:.3g})", loop))
        for cy in (0.1, 1.0, 10.0):
            for r in (0.05, 0.2, 0.5):
                radius = r * cy
                for cw in (True, False):
                    seeds.append(_make_seed(model, "circle", circle_loop((0.0, cy), radius, 256, 1.0, clockwise=cw)))
    else:
        for rho in np.linspace(0.1, np.pi - 0.1, 16):
            for cw in (True, False):
                seeds.append(_make_seed(model, "latitude", latitude_loop(surface, rho, 256, 1.0, clockwise=cw)))
    logger.debug(f"{len(seeds)} loop seeds for {model.name}")
    return seeds


def _admissible(seed: LoopSeed, quantity: str, subgroup=()) -> bool:
    if quantity == "c":
        return True
    if quantity in ("c_u", "c_0"):
        return seed.winding.is_trivial
    if quantity == "c_q":
        return seed.winding.reduced(list(subgroup)).is_trivial
    raise PreconditionError(f"unknown critical value {quantity!r}")


def mane_lower(model: LagrangianModel, k: float, search: LoopSearchConfig | None = None, quantity: str = "c",
               seeds: list | None = None, subgroup=()) -> LoopSearchResult:
    """
    Looks for a loop of negative A_k among the admissible seeds.

    quantity selects the loop class: "c" all loops, "c_u"/"c_0" contractible
    (on T² null-homologous and contractible coincide), "c_q" loops trivial
    modulo the lattice subgroup `subgroup`. With `descent_iters` the best
    seeds are also flowed down at level k.
    """
    from src.core.descent import FlowConfig, flow_until

    search = search or LoopSearchConfig()
    seeds = seeds if seeds is not None else loop_seeds(model, search)
    candidates = [s for s in seeds if _admissible(s, quantity, subgroup)]
    if not candidates:
        return LoopSearchResult(False, np.inf, "none")
    values = np.array([s.min_action(k) for s in candidates])
    best = int(np.argmin(values))
    found = bool(values[best] < 0)
    best_value, best_label = float(values[best]), candidates[best].label
    if not found and search.descent_iters > 0:
        plain = lagrangian_only(model)
        cfg = FlowConfig(max_iters=search.descent_iters, polish=False)
        for idx in np.argsort(values)[:3]:
            seed = candidates[idx]
            try:
                _, trace = flow_until(plain, seed.path.with_T(seed.best_T(k)), k, cfg)
            except OrbitSearchError as e:
                logger.debug(f"descent from seed {seed.label} stopped: {e}")
                continue
            low = float(np.min(trace.values))
            if low < best_value:
                best_value, best_label = low, f"{seed.label}+descent"
            if low < 0:
                found = True
                break
    return LoopSearchResult(found, best_value, best_label)


@dataclass(frozen=True)
class Bracket:
    """
    An interval for a critical value.

    Attributes:
        lo, hi: The bracket.
        method_lo, method_hi: How each side was obtained.
        heuristic_hi: Smallest k at which the search found no negative loop (budget-limited).
        widened: True when the search could not certify the requested lower end.
    """
    lo: float
    hi: float
    method_lo: str
    method_hi: str
    heuristic_hi: float | None = None
    widened: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol


def mane_bracket(model: LagrangianModel, k_lo: float, k_hi: float, quantity: str = "c",
                 search: LoopSearchConfig | None = None, tol: float = 5e-3, seeds: list | None = None,
                 upper=None, subgroup=()) -> Bracket:
    """
    Bisection for a Mañé critical value between k_lo and k_hi.

    The lower side is the largest k with a certified negative loop. The upper
    side is the rigorous Hamiltonian bound when it is below k_hi; otherwise
    the bisection's heuristic side, labelled as such.

    Raises:
        PreconditionError: If k_lo >= k_hi.
    """
    if k_lo >= k_hi:
        raise PreconditionError(f"mane_bracket needs k_lo < k_hi, got {k_lo}, {k_hi}")
    search = search or LoopSearchConfig()
    seeds = seeds if seeds is not None else loop_seeds(model, search)
    upper = upper if upper is not None else mane_upper(model, "fourier+linear" if quantity in ("c_u", "c_0") else "fourier")
    lagrangian = lagrangian_only(model)

    def negative(k):
        return mane_lower(lagrangian, k, search, quantity, seeds, subgroup).found

    hi = min(k_hi, upper.value)
    if not negative(k_lo):
        floor = e0(lagrangian)
        logger.info(f"{quantity}: no negative loop at k_lo={k_lo:.6g}; widening to e0={floor:.6g}")
        lo = min(floor, k_lo)
        return Bracket(lo, max(hi, lo), "e0 (constant loops)", upper.method if hi < k_hi else "search budget",
                       heuristic_hi=k_lo, widened=True)
    lo, top = k_lo, hi
    if negative(top):
        lo = top
    while top - lo > tol:
        mid = 0.5 * (lo + top)
        if negative(mid):
            lo = mid
        else:
            top = mid
    method_hi = upper.method if upper.value <= k_hi else "search budget (heuristic)"
    bracket = Bracket(lo, hi if upper.value <= k_hi else top, "negative loop", method_hi, heuristic_hi=top)
    logger.info(f"{quantity} bracket: [{bracket.lo:.6g}, {bracket.hi:.6g}] ({bracket.method_lo} / {bracket.method_hi})")
    return bracket


# --- Hamiltonian upper bound ------------------------------------------------------

@dataclass(frozen=True)
class UpperBound:
    """sup_q [½‖d_qu − θ_q‖² + V(q)] for the best trial potential u found."""
    value: float
    method: str
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _fourier_basis(surface, order: int, linear: bool):
    """Callables returning (values, gradients) of the trial basis on points (m, 2)."""
    lx, ly = surface.lx, surface.ly
    modes = [(i, j) for i in range(-order, order + 1) for j in range(0, order + 1)
             if (j > 0 or i > 0)]

    def evaluate(pts):
        grads = []
        for i, j in modes:
            phase = 2 * np.pi * (i * pts[:, 0] / lx + j * pts[:, 1] / ly)
            dphase = 2 * np.pi * np.array([i / lx, j / ly])
            grads.append(-np.sin(phase)[:, None] * dphase)
            grads.append(np.cos(phase)[:, None] * dphase)
        if linear:
            grads.append(np.tile([1.0, 0.0], (len(pts), 1)))
            grads.append(np.tile([0.0, 1.0], (len(pts), 1)))
        return np.stack(grads, axis=0) if grads else np.zeros((0, len(pts), 2))
    return evaluate


def _bump_basis(surface, count: int):
    xmin, xmax, ymin, ymax = surface.box
    xs = np.linspace(xmin, xmax, count + 2)[1:-1]
    ys = np.geomspace(ymin, ymax, count + 2)[1:-1]
    centers = [(x, y) for x in xs for y in ys]

    def evaluate(pts):
        grads = []
        for cx, cy in centers:
            # bump in hyperbolic-like coordinates (x/y, log y) around the centre
            dx = (pts[:, 0] - cx) / cy
            dy = np.log(pts[:, 1] / cy)
            g = np.exp(-0.5 * (dx**2 + dy**2))
            grads.append(np.stack([-g * dx / cy, -g * dy / pts[:, 1]], axis=-1))
        return np.stack(grads, axis=0)
    return evaluate


def _far_field(surface, n: int) -> np.ndarray:
    """Points far outside the hyperbolic box, where the box bumps have decayed."""
    xmin, xmax, ymin, ymax = surface.box
    reach = xmax - xmin + 10.0 * ymax
    xs = np.linspace(xmin - reach, xmax + reach, n)
    ys = np.geomspace(ymin * 1e-3, ymax * 1e3, n)
    rows = [np.stack([xs, np.full(n, y)], axis=-1) for y in (ymin * 1e-3, ymax * 1e3)]
    cols = [np.stack([np.full(n, x), ys], axis=-1) for x in (xmin - reach, xmax + reach)]
    return np.concatenate(rows + cols)


def _hamiltonian(model, pts, lam, theta, pot, grads, coeffs):
    du = np.tensordot(coeffs, grads, axes=(0, 0)) if len(coeffs) else np.zeros_like(theta)
    diff = du - theta
    return 0.5 * np.sum(diff * diff, axis=-1) / lam + pot, diff


def mane_upper(model: LagrangianModel, basis: str = "fourier", order: int = 3, seed=None,
               fit_grid: int = 48, check_grid: int = 256) -> UpperBound:
    """
    Upper bound min_u sup_q [½‖d_qu − θ_q‖² + V(q)] over a finite trial basis.

    The coefficients are fitted with a soft-max of decreasing temperature on a
    coarse grid, then the sup is re-evaluated on a fine grid. Any coefficients
    give a valid bound, so an optimizer stall only weakens it. On the hyperbolic
    plane the fine grid is the box grid plus a far-field frame well outside the
    box, so a small custom box cannot hide the value the bumps leave untouched.

    Args:
        basis: "zero", "fourier" (periodic u, bounds c), "fourier+linear"
            (adds a·x + b·y, bounds c_u), or "bumps" (hyperbolic box).
        seed: Optional explicit trial u as (a, b) linear coefficients (torus) whose
            bound is kept if it beats the fit.
    """
    model = lagrangian_only(model)
    surface = model.surface
    if basis != "zero" and not model.has_theta:
        basis = "zero"
    if basis in ("fourier", "fourier+linear") and not surface.is_torus:
        basis = "bumps" if surface.is_hyperbolic else "zero"
    if basis == "bumps" and not surface.is_hyperbolic:
        basis = "zero"

    if basis == "zero":
        evaluate = None
    elif basis == "bumps":
        evaluate = _bump_basis(surface, 4)
    else:
        evaluate = _fourier_basis(surface, order, basis == "fourier+linear")

    def sup_on(n, coeffs, ev):
        pts, _ = surface.grid(n)
        if surface.is_hyperbolic:
            pts = np.concatenate([pts, _far_field(surface, n)])
        lam, _ = surface.conformal(pts)
        theta, pot = model.theta_at(pts), model.potential_at(pts)
        grads = ev(pts) if ev is not None else np.zeros((0, len(pts), 2))
        h, _ = _hamiltonian(model, pts, lam, theta, pot, grads, coeffs)
        return float(np.max(h))

    coeffs = np.zeros(0)
    if evaluate is not None:
        pts, _ = surface.grid(fit_grid)
        lam, _ = surface.conformal(pts)
        theta, pot = model.theta_at(pts), model.potential_at(pts)
        grads = evaluate(pts)
        coeffs = np.zeros(len(grads))
        scale = max(float(np.max(0.5 * np.sum(theta**2, axis=-1) / lam + pot) - np.min(pot)), 1e-6)

        for temperature in scale * np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3]):
            def objective(c, temperature=temperature):
                h, diff = _hamiltonian(model, pts, lam, theta, pot, grads, c)
                smooth = temperature * logsumexp(h / temperature)
                weights = np.exp(h / temperature - smooth / temperature)
                gradient = np.tensordot(grads, weights[:, None] * diff / lam[:, None], axes=([1, 2], [0, 1]))
                return smooth, gradient
            result = optimize.minimize(objective, coeffs, jac=True, method="L-BFGS-B")
            if not result.success:
                logger.warning(f"mane_upper: optimizer stopped at temperature {temperature:.2e}: {result.message}")
            coeffs = result.x

    value = sup_on(check_grid, coeffs, evaluate)
    method = {"zero": "u=0", "fourier": "periodic Fourier u (bounds c)",
              "fourier+linear": "Fourier + linear u (bounds c_u)", "bumps": "box bumps u"}[basis]
    if evaluate is not None:
        plain = sup_on(check_grid, np.zeros(0), None)
        if plain <= value:
            value, coeffs, method = plain, np.zeros(0), "u=0"
    if seed is not None and surface.is_torus:
        linear = _fourier_basis(surface, 0, True)
        seed_value = sup_on(check_grid, np.asarray(seed, dtype=float), linear)
        if seed_value < value:
            value, coeffs, method = seed_value, np.asarray(seed, dtype=float), f"seed u = {seed[0]}x + {seed[1]}y"
    logger.info(f"mane_upper ({method}): {value:.6g}")
    return UpperBound(value, method, coeffs)


# --- k0 and the report ----------------------------------------------------------------

def path_seeds(model: LagrangianModel, q0: Circle, q1: Circle, samples: int = 8, n: int = 64) -> list[LoopSeed]:
    """Constant paths on Q0∩Q1 and straight Q0→Q1 segments (all nearby lattice copies)."""
    model = lagrangian_only(model)
    surface = model.surface
    boundary = BoundarySpec.conormal(q0, q1, surface=surface)
    seeds = []
    for p in intersect(surface, q0, q1):
        seeds.append(_make_seed(model, "constant path", constant_path(p, 8, 1.0, boundary)))
    starts, _ = q0.sample(surface, samples)
    ends, _ = q1.sample(surface, samples)
    shifts = [np.zeros(2)]
    if surface.is_torus:
        shifts = [surface.periods * np.array([i, j]) for i in (-1, 0, 1) for j in (-1, 0, 1)]
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    for a in starts:
        for b in ends:
            for shift in shifts:
                nodes = a + s * (b + shift - a)
                try:
                    seeds.append(_make_seed(model, "segment", DiscretePath(nodes, 1.0, boundary)))
                except OrbitSearchError:
                    continue
    return seeds


def k0_bracket(model: LagrangianModel, q0: Circle, q1: Circle, c_bracket: Bracket, tol: float = 5e-3) -> Bracket:
    """
    Lower side max(c lower side, Q0→Q1 negative-path search); upper side the cap
    e0 + ‖θ‖∞²/(4a).
    """
    cap = upper_cap(model)
    lagrangian = lagrangian_only(model)
    seeds = path_seeds(lagrangian, q0, q1)
    lo, top = c_bracket.lo, cap
    method_lo = "c lower side"

    def negative(k):
        return any(seed.min_action(k) < 0 for seed in seeds)

    if top > lo and negative(lo):
        while top - lo > tol:
            mid = 0.5 * (lo + top)
            if negative(mid):
                lo, method_lo = mid, "negative Q0->Q1 path"
            else:
                top = mid
    return Bracket(min(lo, cap), cap, method_lo, "e0 + |theta|^2/(4a)", heuristic_hi=top)


@dataclass
class CriticalValueReport:
    """
    Estimates of the chain e0 ≤ c_u ≤ c(L;Q0,Q1) ≤ c ≤ k0 ≤ e0 + ‖θ‖∞²/(4a).
    """
    e0: float
    cu: Bracket
    c: Bracket
    k0: Bracket
    upper_cap: float
    kq: tuple
    cq: Bracket | None = None
    tau_plus: Bracket | None = None
    model_name: str = "custom"

    def chain(self) -> list[tuple[str, float, float]]:
        items = [("e0", self.e0, self.e0), ("c_u", self.cu.lo, self.cu.hi)]
        if self.cq is not None:
            items.append(("c_q", self.cq.lo, self.cq.hi))
        items += [("c", self.c.lo, self.c.hi), ("k0", self.k0.lo, self.k0.hi),
                  ("upper_cap", self.upper_cap, self.upper_cap)]
        return items

    def rows(self) -> list[tuple[str, float, float, str]]:
        rows = [("e0", self.e0, self.e0, "grid + refinement"),
                ("c_u", self.cu.lo, self.cu.hi, f"{self.cu.method_lo} / {self.cu.method_hi}")]
        if self.cq is not None:
            rows.append(("c_q", self.cq.lo, self.cq.hi, f"{self.cq.method_lo} / {self.cq.method_hi}"))
        rows += [("c", self.c.lo, self.c.hi, f"{self.c.method_lo} / {self.c.method_hi}"),
                 ("k0", self.k0.lo, self.k0.hi, f"{self.k0.method_lo} / {self.k0.method_hi}"),
                 ("upper_cap", self.upper_cap, self.upper_cap, "e0 + |theta|^2/(4a)"),
                 ("kQ_minus", self.kq[0], self.kq[0], "min E on Q0∩Q1 + max |theta|^2/(4a)"),
                 ("kQ", self.kq[1], self.kq[1], "max E on Q0∩Q1 + max |theta|^2/(4a)")]
        if self.tau_plus is not None:
            rows.append(("tau_plus", self.tau_plus.lo, self.tau_plus.hi,
                         f"{self.tau_plus.method_lo} / {self.tau_plus.method_hi}"))
        return rows

    def to_csv(self, filename: str) -> None:
        with open(filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["quantity", "lo", "hi", "method"])
            for quantity, lo, hi, method in self.rows():
                writer.writerow([quantity, repr(float(lo)), repr(float(hi)), method])
        logger.info(f"Critical value report for {self.model_name} written to {filename}")


def chain_check(report: CriticalValueReport, tol: float = 1e-6) -> tuple[bool, list[str]]:
    """
    Bracket-aware chain check: consecutive quantities A ≤ B pass when lo_A ≤ hi_B + tol.

    Returns:
        (ok, list of violation messages).
    """
    violations = []
    chain = report.chain()
    for (name_a, lo_a, _), (name_b, _, hi_b) in zip(chain[:-1], chain[1:]):
        if lo_a > hi_b + tol:
            violations.append(f"{name_a} lower side {lo_a:.6g} exceeds {name_b} upper side {hi_b:.6g}")
    if violations:
        logger.warning(f"chain check failed for {report.model_name}: {violations}")
    return not violations, violations


def critical_value_report(model: LagrangianModel, q0: Circle, q1: Circle, search: LoopSearchConfig | None = None,
                          tol: float = 5e-3, seed=None) -> CriticalValueReport:
    """Assembles e0, c_u, c(L;Q0,Q1) (torus), c, k0, the cap and k_Q for one model."""
    lagrangian = lagrangian_only(model)
    search = search or LoopSearchConfig()
    value_e0 = e0(lagrangian)
    cap = upper_cap(lagrangian)
    seeds = loop_seeds(lagrangian, search)
    k_lo = value_e0 - 1.0
    k_hi = cap + 1.0
    c_upper = mane_upper(lagrangian, "fourier")
    cu_upper = mane_upper(lagrangian, "fourier+linear", seed=seed)
    c = mane_bracket(lagrangian, k_lo, k_hi, "c", search, tol, seeds, c_upper)
    cu = mane_bracket(lagrangian, k_lo, k_hi, "c_u", search, tol, seeds, cu_upper)
    cq = None
    if lagrangian.surface.is_torus:
        subgroup = q0.homology(lagrangian.surface) + q1.homology(lagrangian.surface)
        cq = mane_bracket(lagrangian, k_lo, k_hi, "c_q", search, tol, seeds, c_upper, subgroup)
    k0 = k0_bracket(lagrangian, q0, q1, c, tol)
    report = CriticalValueReport(value_e0, cu, c, k0, cap, k_q(lagrangian, q0, q1), cq, model_name=model.name)
    logger.info(f"Critical values for {model.name}: e0={value_e0:.6g}, c_u=[{cu.lo:.6g}, {cu.hi:.6g}], "
                f"c=[{c.lo:.6g}, {c.hi:.6g}], k0=[{k0.lo:.6g}, {k0.hi:.6g}], cap={cap:.6g}")
    return report


if __name__ == '__main__':
    from src.core.surface import SurfaceModel
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    plane = LagrangianModel.build(SurfaceModel.hyperbolic(), theta=("1/y", "0"), bounds=(0.5, 10.0), name="demo")
    logger.info(f"hyperbolic c(L) bracket: {mane_bracket(plane, 0.0, 1.0)}")
