# src/core/minimax.py
"""
Mountain-pass search over one-parameter families of paths.

A family is a string of members u(ξ_0), …, u(ξ_M) with fixed end members.
Every round each interior member takes one bounded descent step, the member
with the largest value climbs instead (the energy is increased along the
string tangent and decreased across it), and the interior is redistributed
to equal arclength on either side of the climber. The minimax estimate is the
smallest per-round maximum.
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from src.core.critical import CriticalPointReport, ORBIT_GRAD_TOL, assess, polish
from src.core.descent import FlowConfig, flow_step, tracked_value, value_kind
from src.core.errors import DomainError, InvalidFamilyError, NumericalError, OrbitSearchError, PreconditionError
from src.core.mane import k_q
from src.core.paths import (BoundarySpec, DiscretePath, PathCoordinates, constant_path, eta_k, gradient_data,
                            kinetic, latitude_loop, metric_norm, winding_number)
from src.core.surface import Circle, intersect

logger = logging.getLogger(__name__)

ALPHA_EPS = 0.025


@dataclass(eq=False)
class MinimaxFamily:
    """
    A discretized one-parameter family of paths.

    Attributes:
        members: Paths u(ξ_j) sharing node count and boundary.
        xi: Family parameters in [0, 1].
        kind: "gamma" (constant path to a negative path) or "sphere" (constant
            loop at the south pole to the constant loop at the north pole).
        k_floor: Energies at or below it make the family invalid (k_{Q0∩Q1}).
        label: Free text for logs and reports.
        q0, q1: Boundary circles of a Γ-family, used for the α(k) lower bound.
    """
    members: list
    xi: np.ndarray
    kind: str = "gamma"
    k_floor: float = -np.inf
    label: str = "family"
    q0: Circle | None = None
    q1: Circle | None = None

    def __post_init__(self):
        if len(self.members) < 3:
            raise PreconditionError("a minimax family needs at least 3 members")
        sizes = {m.n_segments for m in self.members}
        if len(sizes) != 1:
            raise PreconditionError(f"family members must share the node count, got {sorted(sizes)}")
        if self.kind not in ("gamma", "sphere"):
            raise PreconditionError(f"unknown family kind {self.kind!r}")


# --- string method core ---------------------------------------------------

class EuclideanSpace:
    """
    Members are points of ℝⁿ with a smooth energy; used for surrogate problems.
    """
    def __init__(self, energy, gradient, step: float = 0.05):
        self.energy = energy
        self.gradient = gradient
        self.step = step

    def values(self, members) -> np.ndarray:
        return np.array([float(self.energy(m)) for m in members])

    def descend(self, member):
        g = self.gradient(member)
        return member - self.step * g / np.sqrt(1.0 + g @ g)

    def climb(self, member, prev, nxt, h: float):
        g = self.gradient(member)
        tau = nxt - prev
        tau = tau / np.linalg.norm(tau)
        direction = -g + 2.0 * tau * (g @ tau)
        candidate = member + h * direction / np.sqrt(1.0 + direction @ direction)
        return candidate, float(np.linalg.norm(g)), float(np.linalg.norm(self.gradient(candidate)))

    def embed(self, member) -> np.ndarray:
        return np.asarray(member, dtype=float)

    def restore(self, vector, like):
        return vector


class PathSpace:
    """Members are DiscretePaths; the energy is the tracked action value at level k."""
    def __init__(self, model, k: float, cfg: FlowConfig, kind: str, family_kind: str):
        self.model = model
        self.surface = model.surface
        self.k = k
        self.cfg = cfg
        self.kind = kind
        self.family_kind = family_kind

    def values(self, members) -> np.ndarray:
        if self.kind != "delta_s":
            values = np.array([tracked_value(self.model, m, self.k, self.kind) for m in members])
            if self.family_kind == "sphere" and kinetic(members[-1]) == 0.0 and members[-1].chart == 1:
                # the north-pole constant loop, valued by continuity along the family
                turns = winding_number(members[-2].in_chart(self.surface, 1).nodes)
                total = float(self.model.sigma_density(0.0, 0.0)) * self.surface.total_area
                values[-1] -= turns * total
            return values
        values = [tracked_value(self.model, members[0], self.k, "action")]
        for a, b in zip(members[:-1], members[1:]):
            coords = PathCoordinates(a, self.surface)
            za, zb = coords.pack(a), coords.pack(b)
            eta_a = coords.covector(eta_k(self.model, a, self.k), za, a.T)
            eta_b = coords.covector(eta_k(self.model, b, self.k), zb, b.T)
            values.append(values[-1] + float(0.5 * (eta_a + eta_b) @ (zb - za)))
        return np.array(values)

    def descend(self, member):
        return flow_step(self.model, member, self.k, self.cfg)

    def climb(self, member, prev, nxt, h: float):
        member = member.best_chart(self.surface)
        gd = gradient_data(self.model, member, self.k, self.cfg.metric)
        try:
            zp = gd.coords.pack(prev.in_chart(self.surface, member.chart))
            zn = gd.coords.pack(nxt.in_chart(self.surface, member.chart))
        except DomainError:
            return self.descend(member), gd.norm, gd.norm
        tau = zn - zp
        tau_norm = metric_norm(gd.gram, tau)
        if tau_norm == 0:
            return member, gd.norm, gd.norm
        tau = tau / tau_norm
        direction = -gd.sharp + 2.0 * tau * float(gd.eta @ tau)
        length = metric_norm(gd.gram, direction)
        z_new = gd.z + h * direction / np.sqrt(1.0 + length**2)
        try:
            candidate = gd.coords.unpack(z_new)
            new_norm = gradient_data(self.model, candidate, self.k, self.cfg.metric).norm
        except (DomainError, PreconditionError, NumericalError):
            return member, gd.norm, np.inf
        return candidate, gd.norm, new_norm

    def embed(self, member) -> np.ndarray:
        ambient = self.surface.to_ambient(member.nodes, member.charts)
        return np.concatenate([ambient.ravel() * np.sqrt(member.ds), [np.log(member.T)]])

    def restore(self, vector, like):
        n = like.n_segments + 1
        ambient = vector[:-1].reshape(n, -1) / np.sqrt(like.ds)
        nodes, charts = self.surface.from_ambient(ambient)
        boundary = like.boundary
        if not boundary.is_periodic:
            t0, off0 = boundary.q0.locate(nodes[0], self.surface)
            t1, off1 = boundary.q1.locate(nodes[-1], self.surface)
            nodes[0] = boundary.q0.param(t0, off0)
            nodes[-1] = boundary.q1.param(t1, off1)
        else:
            nodes[-1] = nodes[0] + (like.nodes[-1] - like.nodes[0]) if self.surface.is_torus else nodes[0]
        return DiscretePath(nodes, float(np.exp(vector[-1])), boundary, charts)


def _equal_arclength(space, members, lo: int, hi: int) -> None:
    """Redistributes members lo+1..hi−1 to equal arclength between the fixed members lo and hi."""
    if hi - lo < 2:
        return
    vectors = [space.embed(m) for m in members[lo:hi + 1]]
    gaps = np.array([np.linalg.norm(b - a) for a, b in zip(vectors[:-1], vectors[1:])])
    arc = np.concatenate([[0.0], np.cumsum(gaps)])
    if arc[-1] == 0:
        return
    targets = np.linspace(0.0, arc[-1], hi - lo + 1)
    for j in range(1, hi - lo):
        seg = min(int(np.searchsorted(arc, targets[j], side="right")) - 1, len(gaps) - 1)
        w = 0.0 if gaps[seg] == 0 else (targets[j] - arc[seg]) / gaps[seg]
        vector = (1.0 - w) * vectors[seg] + w * vectors[seg + 1]
        members[lo + j] = space.restore(vector, members[lo + j])


@dataclass
class StringRun:
    """Result of the string iteration: final members, per-round maxima and the climber index."""
    members: list
    maxima: list = field(default_factory=list)
    climber: int = 1
    climber_norm: float = np.inf
    converged: bool = False

    @property
    def minimax(self) -> float:
        return float(min(self.maxima))


def string_method(space, members, rounds: int = 300, tol: float = 1e-6, step: float = 0.5,
                  climb: bool = True) -> StringRun:
    """
    Generic climbing-string iteration with fixed end members.

    Args:
        space: Adapter exposing values/descend/climb/embed/restore.
        members: Initial members (the first and last stay fixed).
        rounds: Round budget.
        tol: Stops once the climber's gradient norm is below it.
        step: Initial climbing step.
        climb: Disable to run a plain string with descent steps only.
    """
    members = list(members)
    run = StringRun(members)
    h = step
    for r in range(rounds):
        values = space.values(members)
        run.maxima.append(float(np.max(values)))
        i_max = 1 + int(np.argmax(values[1:-1]))
        run.climber = i_max
        updated = list(members)
        for i in range(1, len(members) - 1):
            if climb and i == i_max:
                candidate, old_norm, new_norm = space.climb(members[i], members[i - 1], members[i + 1], h)
                run.climber_norm = old_norm
                if new_norm <= 1.5 * old_norm:
                    updated[i] = candidate
                    h = min(1.2 * h, step)
                else:
                    h *= 0.5
            else:
                updated[i] = space.descend(members[i])
        _equal_arclength(space, updated, 0, i_max)
        _equal_arclength(space, updated, i_max, len(updated) - 1)
        members = updated
        run.members = members
        if r % 25 == 0:
            logger.debug(f"round {r}: max={run.maxima[-1]:.8g} at member {i_max}, climber |grad|={run.climber_norm:.3e}")
        if climb and run.climber_norm < tol:
            run.converged = True
            break
    values = space.values(members)
    run.maxima.append(float(np.max(values)))
    run.climber = 1 + int(np.argmax(values[1:-1]))
    return run


# --- families and the path-space mountain pass ----------------------------------------

def validate_family(model, family: MinimaxFamily, k: float, values: np.ndarray) -> None:
    """
    Raises:
        InvalidFamilyError: If k is at or below the family's floor, all members are
            non-positive, or a Γ-family does not end at a negative value.
    """
    if k <= family.k_floor:
        raise InvalidFamilyError(f"k = {k} is not above k_Q = {family.k_floor:.6g}")
    if np.all(values <= 0):
        raise InvalidFamilyError("every member has non-positive value")
    if family.kind == "gamma" and values[-1] >= 0:
        raise InvalidFamilyError(f"end member value {values[-1]:.6g} is not negative")
    if family.kind == "sphere" and (kinetic(family.members[0]) > 0 or kinetic(family.members[-1]) > 0):
        raise InvalidFamilyError("sphere family must start and end at constant loops")


def mountain_pass(model, family0: MinimaxFamily, k: float, cfg: FlowConfig | None = None, rounds: int = 300,
                  with_index: bool = True, history: list | None = None) -> tuple[float, CriticalPointReport]:
    """
    Minimax value of a family class and the certified candidate at its top.

    Returns:
        (c_value, report). c_value is the smallest per-round maximum over the
        deformation history; the report carries the (possibly polished)
        candidate and its own value.

    Raises:
        InvalidFamilyError: See `validate_family`.
    """
    cfg = cfg or FlowConfig()
    kind = value_kind(model, family0.members[1])
    space = PathSpace(model, k, cfg, kind, family0.kind)
    validate_family(model, family0, k, space.values(family0.members))
    run = string_method(space, family0.members, rounds=rounds, tol=ORBIT_GRAD_TOL, step=cfg.step)
    if history is not None:
        history.extend(run.maxima)

    candidate = run.members[run.climber]
    values = space.values(run.members)
    top_value = float(values[run.climber])
    if cfg.polish:
        candidate = polish(model, candidate, k, cfg.metric)
    value = None if kind != "delta_s" else top_value
    report = assess(model, candidate, k, metric=cfg.metric, value=value, kind=kind, with_index=with_index)
    c_value = run.minimax
    logger.info(f"mountain pass ({family0.label}, k={k:.6g}): c={c_value:.8g} after {len(run.maxima) - 1} rounds, "
                f"candidate {report.status}")
    return c_value, report


def _warp(s):
    return s - np.sin(2 * np.pi * s) / (2 * np.pi)


def gamma_family(model, q0: Circle, q1: Circle, start, end_path: DiscretePath,
                 members: int = 17, T0: float = 0.05, label: str = "gamma") -> MinimaxFamily:
    """
    Straight-line family from the constant path at `start` ∈ Q0∩Q1 to `end_path`:
    x_ξ = start + ξ(x_end − start), log T interpolated from log T0.
    """
    start = np.asarray(start, dtype=float)
    boundary = end_path.boundary
    k_floor = k_q(model, q0, q1)[1]
    xi = np.linspace(0.0, 1.0, members)
    paths = []
    for t in xi:
        nodes = start + t * (end_path.nodes - start)
        T = float(np.exp((1 - t) * np.log(T0) + t * np.log(end_path.T)))
        paths.append(DiscretePath(nodes, T, boundary))
    return MinimaxFamily(paths, xi, "gamma", k_floor, label, q0, q1)


def mechanical_family(model, members: int = 17, n: int = 64, T0: float = 0.05,
                      T_end: float = 40.0) -> MinimaxFamily:
    """Γ-family of the mechanical conormal problem Q0 = {y=0}, Q1 = {x=½} through (½, 0)."""
    q0, q1 = Circle.horizontal(0.0), Circle.vertical(0.5)
    boundary = BoundarySpec.conormal(q0, q1, surface=model.surface)
    s = np.linspace(0.0, 1.0, n + 1)
    w = 0.5 * _warp(s)
    end = DiscretePath(np.stack([w, w], axis=-1), T_end, boundary)
    return gamma_family(model, q0, q1, (0.5, 0.0), end, members, T0, label="mechanical-conormal")


def sphere_latitude_family(model, k: float, members: int = 17, n: int = 64, T0: float = 0.05) -> MinimaxFamily:
    """
    Latitudes from the south to the north pole, clockwise in the south chart,
    with the unit-speed-optimal period (floored at T0).
    """
    surface = model.surface
    if not surface.is_sphere:
        raise InvalidFamilyError("the latitude family lives on the sphere")
    xi = np.linspace(0.0, 1.0, members)
    paths = []
    speed = np.sqrt(2.0 * max(k, 1e-12))
    for t in xi:
        rho = np.pi * t
        T = max(T0, 2 * np.pi * surface.radius * np.sin(rho) / speed)
        if t in (0.0, 1.0):
            paths.append(constant_path((0.0, 0.0), n, T0, chart=0 if t == 0.0 else 1))
        else:
            paths.append(latitude_loop(surface, rho, n, T))
    return MinimaxFamily(paths, xi, "sphere", -np.inf, "sphere-latitudes")


def alpha_bound(model, q0: Circle, q1: Circle, k: float, eps: float, samples: int = 64) -> float:
    """
    (2√(a(k − c_E)) − c_θ)·ε with c_E = sup E(q, 0) and c_θ = sup ‖θ_q‖ over the
    ε-neighbourhood of Q0∩Q1; a lower bound for the Γ-minimax value at small ε.

    Raises:
        PreconditionError: If Q0 and Q1 do not meet.
    """
    surface = model.surface
    centers = intersect(surface, q0, q1)
    if len(centers) == 0:
        raise PreconditionError("Q0 and Q1 do not intersect")
    r = eps * np.sqrt(np.linspace(0.0, 1.0, samples))[:, None]
    phi = np.linspace(0.0, 2 * np.pi, samples)[None, :]
    disc = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1).reshape(-1, 2)
    pts = (centers[:, None, :] + disc[None, :, :]).reshape(-1, 2)
    c_e = float(np.max(model.potential_at(pts)))
    lam, _ = surface.conformal(pts)
    c_theta = float(np.max(np.linalg.norm(model.theta_at(pts), axis=-1) / np.sqrt(lam))) if model.has_theta else 0.0
    a = model.bounds[0]
    if k <= c_e:
        return -np.inf
    return (2.0 * np.sqrt(a * (k - c_e)) - c_theta) * eps


def family_alpha(model, family: MinimaxFamily, k: float, eps: float = ALPHA_EPS) -> float | None:
    """α(k) of a Γ-family with boundary circles, None for other families or when the bound is vacuous."""
    if family.kind != "gamma" or family.q0 is None or family.q1 is None:
        return None
    alpha = alpha_bound(model, family.q0, family.q1, k, eps)
    return alpha if alpha > 0 else None


# --- sweeps ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    k: float
    c: float | None
    T: float | None
    status: str
    alpha: float | None = None


@dataclass
class SweepTable:
    """c(k) over a grid with the monotonicity and slope diagnostics."""
    rows: list

    def _ok(self):
        return [r for r in self.rows if r.c is not None]

    @property
    def max_violation(self) -> float:
        ok = self._ok()
        drops = [a.c - b.c for a, b in zip(ok[:-1], ok[1:])]
        return float(max([0.0] + drops))

    def monotone(self, tol: float = 1e-6) -> bool:
        return self.max_violation < tol

    def slopes(self) -> list[tuple[float, float]]:
        """(k midpoint, (c(k2) − c(k1))/(k2 − k1)) for consecutive successful rows."""
        ok = self._ok()
        return [(0.5 * (a.k + b.k), (b.c - a.c) / (b.k - a.k)) for a, b in zip(ok[:-1], ok[1:])]

    def to_csv(self, filename: str) -> None:
        with open(filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "c", "T", "alpha", "status"])
            for r in self.rows:
                writer.writerow([repr(r.k)] + ["" if v is None else repr(float(v)) for v in (r.c, r.T, r.alpha)] + [r.status])
        logger.info(f"Sweep table with {len(self.rows)} rows written to {filename}")


def minimax_sweep(model, family_builder, k_grid, cfg: FlowConfig | None = None, rounds: int = 300,
                  alpha_eps: float = ALPHA_EPS) -> SweepTable:
    """
    Runs `mountain_pass` at every k of an increasing grid.

    Rows of Γ-families carry α(k); a minimax value at or below it is reported
    with status "below-alpha".

    Args:
        family_builder: Callable k -> MinimaxFamily.
        alpha_eps: Neighbourhood radius ε of the α(k) bound.

    Raises:
        PreconditionError: If k_grid is not strictly increasing.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if len(k_grid) == 0 or np.any(np.diff(k_grid) <= 0):
        raise PreconditionError("k_grid must be strictly increasing")
    rows = []
    for k in k_grid:
        try:
            family = family_builder(float(k))
            c, report = mountain_pass(model, family, float(k), cfg, rounds, with_index=False)
            status = report.status
            alpha = family_alpha(model, family, float(k), alpha_eps)
            if alpha is not None and c <= alpha:
                logger.warning(f"k={k:.6g}: minimax value {c:.6g} does not exceed alpha(k) = {alpha:.6g}")
                status = "below-alpha"
            rows.append(SweepRow(float(k), float(c), report.path.T, status, alpha))
        except InvalidFamilyError as e:
            logger.info(f"k={k:.6g}: invalid family ({e})")
            rows.append(SweepRow(float(k), None, None, "invalid-family"))
        except OrbitSearchError as e:
            logger.error(f"k={k:.6g}: sweep point failed: {e}", exc_info=True)
            rows.append(SweepRow(float(k), None, None, "failed"))
    table = SweepTable(rows)
    if not table.monotone():
        logger.warning(f"c(k) not monotone: largest drop {table.max_violation:.3e}")
    return table


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])

    def double_well(p):
        return (p[0]**2 - 1)**2 + 2 * p[1]**2

    def double_well_grad(p):
        return np.array([4 * p[0] * (p[0]**2 - 1), 4 * p[1]])

    line = [np.array([x, 0.3 * (1 - x * x)]) for x in np.linspace(-1, 1, 11)]
    demo = string_method(EuclideanSpace(double_well, double_well_grad), line, rounds=2000, tol=1e-8, step=0.05)
    logger.info(f"double-well saddle value {demo.maxima[-1]:.6f} at {demo.members[demo.climber]}")
