# src/core/dynamics.py
"""
Electromagnetic Lagrangians on the model surfaces and their flows.

    L(q, v) = ½ λ(q)|v|² + θ_q(v) − V(q)        E(q, v) = ½ λ(q)|v|² + V(q)

The pair (L, σ) carries a second magnetic term: the closed 2-form σ = f·μ_g,
given by its density f against the area form, whose chart density is f·λ.
The flow of (L, σ) is the Euler-Lagrange flow of L plus the Lorentz force of σ;
with β = ∂_xθ_y − ∂_yθ_x the chart equation reads

    λ(q) (∇_t v) = (β + f·λ)(q) · (v_y, −v_x) − ∇V(q).

So a positive density turns trajectories clockwise in chart orientation: on the
flat torus with f = B the velocity obeys v̇ = B(v_y, −v_x). When σ = dθ' this is
exactly the Euler-Lagrange field of L + θ'.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from src.core.errors import ClippedError, DomainError, PreconditionError
from src.core.surface import SurfaceModel, Circle, geodesic_acceleration, wrap
from src.utils.expressions import ScalarField

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LagrangianModel:
    """
    Electromagnetic data on a model surface.

    Attributes:
        surface: The surface and its chart policy.
        theta: Components (θ_x, θ_y) of the 1-form in L.
        potential: The potential V.
        sigma_density: Density f of the extra 2-form σ = f·μ_g (zero when σ is absent).
        bounds: (a, b) with L(q, v) ≥ a‖v‖² − b on the working region.
        name: Label used in logs and reports.
    """
    surface: SurfaceModel
    theta: tuple
    potential: ScalarField
    sigma_density: ScalarField
    bounds: tuple = (0.5, 0.0)
    name: str = "custom"

    @classmethod
    def build(cls, surface: SurfaceModel, theta=("0", "0"), potential="0", sigma_density="0",
              bounds=(0.5, 0.0), parameters: dict | None = None, name: str = "custom") -> "LagrangianModel":
        """Parses expression strings (or SymPy expressions) into a model."""
        def field(value, label):
            if isinstance(value, ScalarField):
                return value
            if isinstance(value, str) or isinstance(value, (int, float)):
                return ScalarField.parse(value, name=label, parameters=parameters)
            return ScalarField(value, name=label)
        return cls(surface=surface,
                   theta=(field(theta[0], "theta_x"), field(theta[1], "theta_y")),
                   potential=field(potential, "V"),
                   sigma_density=field(sigma_density, "f"),
                   bounds=(float(bounds[0]), float(bounds[1])),
                   name=name)

    @property
    def has_theta(self) -> bool:
        return not (self.theta[0].is_zero and self.theta[1].is_zero)

    @property
    def has_sigma(self) -> bool:
        """True when an extra (possibly non-exact) 2-form is present."""
        return not self.sigma_density.is_zero

    # --- vectorised field evaluation -------------------------------------

    def theta_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if not self.has_theta:
            return np.zeros(q.shape)
        return np.stack([self.theta[0](q[..., 0], q[..., 1]), self.theta[1](q[..., 0], q[..., 1])], axis=-1)

    def theta_jacobian(self, q) -> np.ndarray:
        """Array [..., i, j] = ∂_j θ_i."""
        q = np.asarray(q, dtype=float)
        if not self.has_theta:
            return np.zeros(q.shape + (2,))
        return np.stack([self.theta[0].gradient(q[..., 0], q[..., 1]),
                         self.theta[1].gradient(q[..., 0], q[..., 1])], axis=-2)

    def dtheta_density(self, q) -> np.ndarray:
        """Chart density β of dθ = β dx∧dy."""
        jac = self.theta_jacobian(q)
        return jac[..., 1, 0] - jac[..., 0, 1]

    def potential_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.potential(q[..., 0], q[..., 1])

    def potential_gradient(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.potential.is_zero:
            return np.zeros(q.shape)
        return self.potential.gradient(q[..., 0], q[..., 1])

    def sigma_chart_density(self, q) -> np.ndarray:
        """Chart density f·λ of the extra 2-form σ."""
        q = np.asarray(q, dtype=float)
        if not self.has_sigma:
            return np.zeros(q.shape[:-1])
        lam, _ = self.surface.conformal(q)
        return self.sigma_density(q[..., 0], q[..., 1]) * lam

    def magnetic_density(self, q) -> np.ndarray:
        """Total chart density β + f·λ driving the Lorentz force."""
        return self.dtheta_density(q) + self.sigma_chart_density(q)


@dataclass(frozen=True)
class OrbitCertificate:
    """
    Residuals of an integrated trajectory.

    Attributes:
        closure_residual: Chart distance between the endpoints (periodic) or from
            the final point to Q1 (conormal).
        energy_drift: max |E − k| along the trajectory (k = initial energy if not given).
        conormal_residual: Norms of d_vL restricted to TQ0 and TQ1 at the two ends.
    """
    closure_residual: float
    energy_drift: float
    conormal_residual: tuple = (0.0, 0.0)

    def passes(self, closure_tol: float = 1e-4, drift_tol: float = 1e-6, conormal_tol: float = 1e-4) -> bool:
        return (self.closure_residual < closure_tol and self.energy_drift < drift_tol
                and max(self.conormal_residual) < conormal_tol)


def lagrangian_value(model: LagrangianModel, q, v) -> np.ndarray:
    """½ g_q(v, v) + θ_q(v) − V(q); vectorised over leading axes."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam, _ = model.surface.conformal(q)
    return 0.5 * lam * np.sum(v * v, axis=-1) + np.sum(model.theta_at(q) * v, axis=-1) - model.potential_at(q)


def energy(model: LagrangianModel, q, v) -> np.ndarray:
    """½ g_q(v, v) + V(q)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam, _ = model.surface.conformal(q)
    return 0.5 * lam * np.sum(v * v, axis=-1) + model.potential_at(q)


def legendre_energy(model: LagrangianModel, q, v) -> np.ndarray:
    """d_vL(q, v)[v] − L(q, v); equals `energy` for electromagnetic models."""
    v = np.asarray(v, dtype=float)
    return np.sum(fiber_derivative(model, q, v) * v, axis=-1) - lagrangian_value(model, q, v)


def fiber_derivative(model: LagrangianModel, q, v) -> np.ndarray:
    """d_vL = λ v + θ."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam, _ = model.surface.conformal(q)
    return lam[..., None] * v + model.theta_at(q)


def base_derivative(model: LagrangianModel, q, v) -> np.ndarray:
    """d_qL = ½ ∇λ |v|² + (Dθ)ᵀ v − ∇V."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    _, dlam = model.surface.conformal(q)
    vv = np.sum(v * v, axis=-1)
    dtheta_v = np.einsum("...ji,...j->...i", model.theta_jacobian(q), v)
    return 0.5 * dlam * vv[..., None] + dtheta_v - model.potential_gradient(q)


def el_field(model: LagrangianModel, q, v) -> tuple[np.ndarray, np.ndarray]:
    """
    First-order field (q̇, v̇) of the (L, σ) flow.

    Raises:
        DomainError: If q is not admissible.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam, _ = model.surface.conformal(q)
    rho = model.magnetic_density(q)
    lorentz = rho[..., None] * np.stack([v[..., 1], -v[..., 0]], axis=-1)
    accel = geodesic_acceleration(model.surface, q, v) + (lorentz - model.potential_gradient(q)) / lam[..., None]
    return v.copy(), accel


def classical_el_field(model: LagrangianModel, q, v) -> tuple[np.ndarray, np.ndarray]:
    """
    Euler-Lagrange field of L alone, solved from d/dt d_vL = d_qL.

    Ignores `sigma_density`; used to cross-check `el_field` when σ is exact.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam, dlam = model.surface.conformal(q)
    mixed = np.sum(dlam * v, axis=-1)[..., None] * v + np.einsum("...ij,...j->...i", model.theta_jacobian(q), v)
    accel = (base_derivative(model, q, v) - mixed) / lam[..., None]
    return v.copy(), accel


def _rk4_step(model: LagrangianModel, q, v, dt):
    k1q, k1v = el_field(model, q, v)
    k2q, k2v = el_field(model, q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
    k3q, k3v = el_field(model, q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
    k4q, k4v = el_field(model, q + dt * k3q, v + dt * k3v)
    return (q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
            v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


def conormal_norm(model: LagrangianModel, q, v, circle: Circle) -> float:
    """|d_vL(q, v)[t]| / ‖t‖_g for the tangent t of `circle` at its point nearest q."""
    if circle.dim == 0:
        return 0.0
    t, _ = circle.locate(q, model.surface)
    tangent = circle.tangent(t)
    lam, _ = model.surface.conformal(np.asarray(q, dtype=float)[None, :])
    p = fiber_derivative(model, np.asarray(q)[None, :], np.asarray(v)[None, :])[0]
    return float(abs(p @ tangent) / np.sqrt(lam[0] * (tangent @ tangent)))


def _endpoint_distance(surface: SurfaceModel, a, chart_a, b, chart_b) -> float:
    if surface.is_torus:
        d = np.asarray(b) - np.asarray(a)
        d = d - surface.periods * np.round(d / surface.periods)
        return float(np.linalg.norm(d))
    if surface.is_sphere and chart_a != chart_b:
        b = surface.change_chart(np.asarray(b, dtype=float))
    return float(np.linalg.norm(np.asarray(b) - np.asarray(a)))


def shoot(model: LagrangianModel, q0, v0, T: float, steps: int, chart: int = 0,
          k: float | None = None, boundary=None):
    """
    Integrates the (L, σ) flow with fixed-step RK4 (dt = T/steps).

    Sphere trajectories change chart whenever |q| exceeds the surface's switch
    radius; the returned path records the chart of every node.

    Args:
        model: The Lagrangian model.
        q0, v0: Initial chart point and velocity.
        T: Integration time.
        steps: Number of RK4 steps (at least 16).
        chart: Chart of q0 (sphere only).
        k: Reference energy for the drift; defaults to E(q0, v0).
        boundary: BoundarySpec for the returned path (periodic when None).

    Returns:
        (DiscretePath, OrbitCertificate)

    Raises:
        PreconditionError: If T <= 0 or steps < 16.
        ClippedError: If the trajectory leaves the admissible region or the
            hyperbolic working box; carries the partial path.
    """
    from src.core.paths import BoundarySpec, DiscretePath

    if T <= 0:
        raise PreconditionError(f"shoot needs T > 0, got {T}")
    if steps < 16:
        raise PreconditionError(f"shoot needs at least 16 steps, got {steps}")
    boundary = boundary if boundary is not None else BoundarySpec.periodic()
    surface = model.surface
    dt = T / steps
    q = np.asarray(q0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    e_ref = float(energy(model, q, v)) if k is None else float(k)
    nodes = np.empty((steps + 1, 2))
    charts = np.full(steps + 1, chart, dtype=int)
    velocities = np.empty((steps + 1, 2))
    drift = abs(float(energy(model, q, v)) - e_ref)
    nodes[0], velocities[0] = q, v
    current = chart
    for i in range(1, steps + 1):
        try:
            q, v = _rk4_step(model, q, v, dt)
            if not np.all(np.isfinite(q)) or not np.all(np.isfinite(v)):
                raise DomainError("non-finite state")
            if surface.is_sphere and q @ q > surface.chart_switch**2:
                q, v = surface.change_chart(q, v)
                current = 1 - current
            if not surface.in_box(q):
                raise DomainError(f"left the working box at t = {i * dt:.4g}")
            drift = max(drift, abs(float(energy(model, q, v)) - e_ref))
        except DomainError as e:
            partial = None
            if i >= 3:
                partial = DiscretePath(nodes[:i].copy(), dt * (i - 1), boundary, charts[:i].copy())
            logger.warning(f"shoot clipped after {i - 1} of {steps} steps: {e}")
            raise ClippedError(f"trajectory clipped: {e}", partial_path=partial) from e
        nodes[i], velocities[i], charts[i] = q, v, current

    path = DiscretePath(nodes, T, boundary, charts)
    if boundary.is_periodic:
        closure = _endpoint_distance(surface, nodes[0], charts[0], nodes[-1], charts[-1])
        residual = (0.0, 0.0)
    else:
        closure = boundary.q1.distance(nodes[-1], surface)
        residual = (conormal_norm(model, nodes[0], velocities[0], boundary.q0),
                    conormal_norm(model, nodes[-1], velocities[-1], boundary.q1))
    certificate = OrbitCertificate(closure_residual=closure, energy_drift=drift, conormal_residual=residual)
    logger.debug(f"shoot: T={T:.6g}, steps={steps}, closure={closure:.3e}, drift={drift:.3e}")
    return path, certificate


def endpoint_velocities(path) -> tuple[np.ndarray, np.ndarray]:
    """Second-order one-sided difference velocities x'(s)/T at both ends of a path."""
    x = path.nodes
    h = path.T / path.n_segments
    v0 = (-3 * x[0] + 4 * x[1] - x[2]) / (2 * h)
    v1 = (3 * x[-1] - 4 * x[-2] + x[-3]) / (2 * h)
    return v0, v1


def conormal_residual(model: LagrangianModel, path, q0: Circle, q1: Circle, tol: float = 1e-6) -> tuple[float, float]:
    """
    Norms of d_vL restricted to TQ0 at the start and to TQ1 at the end of a path.

    Raises:
        PreconditionError: If an endpoint is farther than `tol` from its submanifold.
    """
    surface = model.surface
    d0 = q0.distance(path.nodes[0], surface)
    d1 = q1.distance(path.nodes[-1], surface)
    if d0 > tol or d1 > tol:
        raise PreconditionError(f"path endpoints are off the submanifolds (distances {d0:.3e}, {d1:.3e})")
    v0, v1 = endpoint_velocities(path)
    return conormal_norm(model, path.nodes[0], v0, q0), conormal_norm(model, path.nodes[-1], v1, q1)


def min_conormal_energy(model: LagrangianModel, circle: Circle, samples: int = 512) -> float:
    """
    min over q ∈ Q of ½‖P_q w_q‖², w_q the vector dual to θ_q and P the
    projection onto T_qQ. Below this energy no orbit meets Q conormally.
    """
    if circle.dim == 0 or not model.has_theta:
        return 0.0
    surface = model.surface

    def value_at(t):
        q = circle.param(t)
        tangent = circle.tangent(t)
        lam, _ = surface.conformal(q[None, :])
        pairing = model.theta_at(q[None, :])[0] @ tangent
        return 0.5 * pairing**2 / (lam[0] * (tangent @ tangent))

    pts, _ = circle.sample(surface, samples)
    ts = np.array([circle.locate(p, surface)[0] for p in pts])
    values = np.array([value_at(t) for t in ts])
    best = int(np.argmin(values))
    step = np.min(np.abs(np.diff(ts))) if len(ts) > 1 else 0.0
    if step > 0:
        res = optimize.minimize_scalar(value_at, bounds=(ts[best] - step, ts[best] + step), method="bounded")
        if res.success and res.fun < values[best]:
            return float(max(res.fun, 0.0))
    return float(values[best])


def theta_sup_norm(model: LagrangianModel, n: int = 96) -> float:
    """sup_q ‖θ_q‖ (dual metric norm) over a grid of the working region."""
    if not model.has_theta:
        return 0.0
    pts, _ = model.surface.grid(n)
    lam, _ = model.surface.conformal(pts)
    return float(np.max(np.linalg.norm(model.theta_at(pts), axis=-1) / np.sqrt(lam)))


def validate_bounds(model: LagrangianModel, samples: int = 1000, vmax: float = 10.0,
                    rng: np.random.Generator | None = None) -> tuple[bool, float]:
    """
    Samples (q, v) with ‖v‖_g ≤ vmax and checks L(q, v) ≥ a‖v‖² − b.

    Returns:
        (ok, worst margin L − a‖v‖² + b over the samples).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    a, b = model.bounds
    q, _ = model.surface.sample(samples, rng)
    lam, _ = model.surface.conformal(q)
    angle = rng.uniform(0, 2 * np.pi, samples)
    speed = vmax * np.sqrt(rng.uniform(0, 1, samples))
    v = (speed / np.sqrt(lam))[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    margin = lagrangian_value(model, q, v) - a * speed**2 + b
    worst = float(np.min(margin))
    if worst < 0:
        logger.warning(f"model {model.name}: L >= a|v|^2 - b fails on samples (worst margin {worst:.4g})")
    return worst >= 0, worst


if __name__ == '__main__':
    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    torus = SurfaceModel.flat_torus()
    magnetic = LagrangianModel.build(torus, sigma_density="1", name="constant-B")
    path, cert = shoot(magnetic, (0.5, 0.5), (1.0, 0.0), 2 * np.pi, 6284)
    logger.info(f"constant-B circle: closure {cert.closure_residual:.2e}, drift {cert.energy_drift:.2e}")
    logger.info(f"wrapped end point: {wrap(torus, path.nodes[-1])}")
