# src/core/descent.py
"""
Truncated negative-gradient flow of the action 1-form.

One step moves the flat path coordinates z along

    X_k = −♯η_k / √(1 + ‖η_k‖²)

(norm < 1 in the Gram metric) scaled by the cutoff factor κ, with Armijo
backtracking on the trapezoid line integral of η_k over the step. The
integral is also the tracked value ΔS when the action itself is not defined
(non-exact σ on a path with no canonical capping disc).
"""
import csv
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from src.core.errors import DomainError, NumericalError, PreconditionError
from src.core.paths import (DiscretePath, action, capped_action, capping_integral, circle_loop, default_delta, eta_k,
                            gradient_data, kinetic, s_k_local, is_contractible)
from src.utils import config

logger = logging.getLogger(__name__)


class TerminationReason(str, Enum):
    CONVERGED = "Converged"
    T_COLLAPSE = "TCollapse"
    MAX_ITERS = "MaxIters"
    LEFT_DOMAIN = "LeftDomain"
    FROZEN = "Frozen"
    STALLED = "Stalled"


@dataclass(frozen=True)
class CutoffConfig:
    """
    Cutoff near constant loops.

    Attributes:
        delta: Size of V_δ = {e(x) < δ} (kinetic energy).
        epsilon: Lower bound ε for S_k on ∂V_δ; the flow is frozen where S_k ≤ ε/4.
    """
    delta: float
    epsilon: float

    def __post_init__(self):
        if self.delta <= 0 or self.epsilon <= 0:
            raise PreconditionError(f"cutoff needs delta > 0 and epsilon > 0, got {self.delta}, {self.epsilon}")


@dataclass(frozen=True)
class FlowConfig:
    """
    Step policy and stopping rules of the flow.

    Attributes:
        step: Initial step size h.
        adaptive: Grow h by `grow` after a step accepted at full length.
        max_step: Cap on h.
        min_step: Backtracking floor; below it the run is Stalled.
        armijo: Sufficient-decrease constant.
        tol: Dual-norm convergence tolerance.
        max_iters: Iteration budget.
        t_floor: TCollapse threshold on T.
        metric: "H1" or "L2".
        cutoff: Optional cutoff near constant loops.
        polish: Whether `critical.minimize` polishes the flow's endpoint.
    """
    step: float = 0.5
    adaptive: bool = True
    max_step: float = 2.0
    min_step: float = 1e-12
    armijo: float = 1e-4
    grow: float = 1.5
    shrink: float = 0.5
    tol: float = config.GRAD_TOL
    max_iters: int = config.MAX_ITERS
    t_floor: float = config.T_FLOOR
    metric: str = "H1"
    cutoff: CutoffConfig | None = None
    polish: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise PreconditionError(f"flow tolerance must be positive, got {self.tol}")
        if self.t_floor < 0:
            raise PreconditionError(f"T floor must be non-negative, got {self.t_floor}")
        if not (0 < self.step <= self.max_step) or not (0 < self.shrink < 1) or self.grow < 1:
            raise PreconditionError("inconsistent step policy")
        if self.metric not in ("H1", "L2"):
            raise PreconditionError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class FlowRecord:
    iteration: int
    value: float
    grad_norm: float
    T: float
    e: float
    step: float


@dataclass
class FlowTrace:
    """
    Per-iteration history of a flow run.

    Attributes:
        records: One FlowRecord per visited state.
        reason: Why the run stopped.
        value_kind: "action", "capped" (A_k plus capping flux) or "delta_s" (η line integral).
        tol: The convergence tolerance of the run.
        t_floor: The collapse threshold of the run.
    """
    records: list = field(default_factory=list)
    reason: TerminationReason | None = None
    value_kind: str = "action"
    tol: float = config.GRAD_TOL
    t_floor: float = config.T_FLOOR

    def append(self, record: FlowRecord) -> None:
        self.records.append(record)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.records])

    @property
    def periods(self) -> np.ndarray:
        return np.array([r.T for r in self.records])

    @property
    def final(self) -> FlowRecord:
        return self.records[-1]

    def to_csv(self, filename: str) -> None:
        with open(filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "action", "gradnorm", "T", "e"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.value), repr(r.grad_norm), repr(r.T), repr(r.e)])
        logger.info(f"Flow trace ({len(self.records)} rows, {self.reason}) written to {filename}")


@dataclass(frozen=True, eq=False)
class _StepOutcome:
    path: DiscretePath
    grad_norm: float
    kappa: float
    step: float
    delta_value: float
    first_try: bool
    reason: TerminationReason | None = None


def value_kind(model, path: DiscretePath) -> str:
    """Which value a flow on this path can track."""
    if not model.has_sigma:
        return "action"
    if path.boundary.is_periodic and is_contractible(model, path):
        return "capped"
    return "delta_s"


def tracked_value(model, path: DiscretePath, k: float, kind: str, delta_s: float = 0.0) -> float:
    if kind == "action":
        return action(model, path, k)
    if kind == "capped":
        return capped_action(model, path, k)
    return delta_s


def _smoothstep(t: float) -> float:
    t = min(max(t, 0.0), 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def cutoff_factor(model, path: DiscretePath, k: float, cutoff: CutoffConfig | None) -> float:
    """
    κ ∈ [0, 1]: 0 where S_k ≤ ε/4 inside V_δ, 1 where S_k ≥ ε/2 or outside V_δ.
    """
    if cutoff is None or not path.boundary.is_periodic:
        return 1.0
    if kinetic(path, model.surface) >= cutoff.delta or not is_contractible(model, path):
        return 1.0
    quarter = 0.25 * cutoff.epsilon
    s = s_k_local(model, path, k, cutoff.delta)
    return _smoothstep((s - quarter) / quarter)


def _advance(model, path: DiscretePath, k: float, cfg: FlowConfig, step: float) -> _StepOutcome:
    gd = gradient_data(model, path, k, cfg.metric)
    if gd.norm <= cfg.tol:
        return _StepOutcome(path, gd.norm, 1.0, 0.0, 0.0, True, TerminationReason.CONVERGED)
    kappa = cutoff_factor(model, path, k, cfg.cutoff)
    if kappa <= 0.0:
        return _StepOutcome(path, gd.norm, 0.0, 0.0, 0.0, True, TerminationReason.FROZEN)

    field_x = -gd.sharp / np.sqrt(1.0 + gd.norm**2)
    slope = float(gd.eta @ field_x)
    coords = gd.coords
    h = step
    first_try = True
    while h >= cfg.min_step:
        dz = h * kappa * field_x
        z_new = gd.z + dz
        try:
            candidate = coords.unpack(z_new)
            if not model.surface.in_box(candidate.nodes):
                return _StepOutcome(candidate, gd.norm, kappa, h, 0.0, first_try, TerminationReason.LEFT_DOMAIN)
            eta_new = coords.covector(eta_k(model, candidate, k), z_new, candidate.T)
        except (DomainError, PreconditionError) as e:
            logger.debug(f"Step h={h:.3g} rejected: {e}")
            h *= cfg.shrink
            first_try = False
            continue
        delta = float(0.5 * (gd.eta + eta_new) @ dz)
        if np.isfinite(delta) and delta <= cfg.armijo * h * kappa * slope:
            return _StepOutcome(candidate, gd.norm, kappa, h, delta, first_try)
        h *= cfg.shrink
        first_try = False
    logger.warning(f"Line search exhausted at |eta|={gd.norm:.3e}, T={path.T:.4g}")
    return _StepOutcome(path, gd.norm, kappa, 0.0, 0.0, False, TerminationReason.STALLED)


def flow_step(model, path: DiscretePath, k: float, cfg: FlowConfig, step: float | None = None) -> DiscretePath:
    """
    One backtracked explicit step along κX_k.

    Returns the input unchanged at a critical point (‖η_k‖ ≤ tol), inside the
    frozen cutoff region, or when no admissible step exists. The displacement
    in the Gram metric is at most the step size because ‖X_k‖ < 1.
    """
    outcome = _advance(model, path, k, cfg, cfg.step if step is None else step)
    return outcome.path


def flow_until(model, path: DiscretePath, k: float, cfg: FlowConfig) -> tuple[DiscretePath, FlowTrace]:
    """
    Runs the truncated flow until a termination reason applies.

    Returns:
        The final path and its trace. The trace's value is non-increasing per
        step up to line-search slack.
    """
    surface = model.surface
    path = path.best_chart(surface)
    kind = value_kind(model, path)
    trace = FlowTrace(value_kind=kind, tol=cfg.tol, t_floor=cfg.t_floor)
    h = cfg.step
    delta_s = 0.0

    for it in range(cfg.max_iters + 1):
        if path.T < cfg.t_floor:
            trace.append(FlowRecord(it, tracked_value(model, path, k, kind, delta_s), float("nan"),
                                    path.T, kinetic(path, surface), 0.0))
            trace.reason = TerminationReason.T_COLLAPSE
            break
        value = tracked_value(model, path, k, kind, delta_s)
        if it == cfg.max_iters:
            gd = gradient_data(model, path, k, cfg.metric)
            trace.append(FlowRecord(it, value, gd.norm, path.T, kinetic(path, surface), 0.0))
            trace.reason = TerminationReason.CONVERGED if gd.norm <= cfg.tol else TerminationReason.MAX_ITERS
            break
        try:
            outcome = _advance(model, path, k, cfg, h)
        except NumericalError as e:
            logger.warning(f"Flow stopped at iteration {it}: {e}")
            trace.append(FlowRecord(it, value, float("nan"), path.T, kinetic(path, surface), 0.0))
            trace.reason = TerminationReason.STALLED
            break
        trace.append(FlowRecord(it, value, outcome.grad_norm, path.T, kinetic(path, surface), outcome.step))
        if outcome.reason is not None:
            trace.reason = outcome.reason
            break
        path = outcome.path.best_chart(surface)
        delta_s += outcome.delta_value
        if cfg.adaptive and outcome.first_try:
            h = min(outcome.step * cfg.grow, cfg.max_step)
        else:
            h = outcome.step
        if it % 100 == 0:
            logger.debug(f"iter {it}: value={value:.8g} |eta|={outcome.grad_norm:.3e} T={path.T:.5g} h={h:.3g}")

    if trace.reason == TerminationReason.FROZEN:
        # ε is an estimate halved from the sampled minimum; within a factor 2 of ε/4 the freeze is uncertain
        s = s_k_local(model, path, k, cfg.cutoff.delta)
        if s > cfg.cutoff.epsilon / 8.0:
            logger.warning(f"Frozen with S_k={s:.4g} inside the uncertainty band (epsilon/4={cfg.cutoff.epsilon / 4:.4g})")
    last = trace.final
    logger.info(f"Flow finished: {trace.reason.value} after {last.iteration} iterations, "
                f"value={last.value:.8g}, |eta|={last.grad_norm:.3e}, T={last.T:.5g}")
    return path, trace


@dataclass(frozen=True)
class PSDiagnostics:
    """Palais-Smale flags of a flow run and its classification."""
    bounded_T: bool
    T_away_from_zero: bool
    grad_to_zero: bool
    classification: str


def ps_monitor(trace: FlowTrace, blowup_factor: float = 10.0, zero_level_tol: float = 1e-3) -> PSDiagnostics:
    """
    Classifies a run as "convergent", "collapse-at-zero-level", "collapse",
    "period-blowup" or "undetermined".

    Raises:
        PreconditionError: If the trace is empty.
    """
    if not trace.records:
        raise PreconditionError("ps_monitor needs a non-empty trace")
    periods = trace.periods
    tail = periods[-max(1, len(periods) // 4):]
    grown = periods[-1] >= blowup_factor * max(periods[0], 1.0)
    bounded_T = not (grown and tail[-1] >= tail[0])
    collapsed = trace.reason is TerminationReason.T_COLLAPSE or np.min(tail) <= 10.0 * trace.t_floor
    finite_norms = trace.grad_norms[np.isfinite(trace.grad_norms)]
    grad_to_zero = trace.reason is TerminationReason.CONVERGED or (
        len(finite_norms) > 0 and finite_norms[-1] <= trace.tol)

    if collapsed:
        final = trace.final.value
        label = "collapse-at-zero-level" if abs(final) <= zero_level_tol else "collapse"
    elif not bounded_T:
        label = "period-blowup"
    elif grad_to_zero:
        label = "convergent"
    else:
        label = "undetermined"
    diagnostics = PSDiagnostics(bounded_T, not collapsed, grad_to_zero, label)
    logger.debug(f"PS diagnostics: {diagnostics}")
    return diagnostics


def estimate_epsilon(model, k: float, delta: float | None = None, centers: int = 4, nodes: int = 64) -> CutoffConfig:
    """
    Estimates ε: half the minimum of S_k over circles on ∂V_δ.

    Circles of kinetic energy δ are placed on a grid of centres in both
    orientations, and T is optimised per circle.

    Raises:
        PreconditionError: If S_k is not bounded below by a positive value there
            (k is too low for the small-loop geometry).
    """
    surface = model.surface
    delta = default_delta(surface) if delta is None else delta
    points, charts = surface.grid(centers)
    best = np.inf
    for center, chart in zip(points, charts):
        lam, _ = surface.conformal(center)
        radius = np.sqrt(delta / float(lam)) / (2 * np.pi)
        for clockwise in (True, False):
            def local_value(log_t, c=center, ch=chart, cw=clockwise):
                loop = circle_loop(c, radius, nodes, float(np.exp(log_t)), clockwise=cw, chart=int(ch))
                try:
                    return action(model, loop, k) + capping_integral(model, loop)
                except DomainError:
                    return np.inf
            result = optimize.minimize_scalar(local_value, bounds=(np.log(1e-6), np.log(1e3)), method="bounded")
            best = min(best, float(result.fun))
    if not np.isfinite(best) or best <= 0:
        raise PreconditionError(f"S_k on the boundary of V_delta is not positive (min {best:.4g}); is k above e0?")
    logger.info(f"Cutoff estimate: delta={delta:.4g}, epsilon={0.5 * best:.4g}")
    return CutoffConfig(delta=delta, epsilon=0.5 * best)
