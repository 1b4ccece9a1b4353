# src/core/critical.py
"""
Critical points of the free-time action: minimization, polishing, orbit
certification by shooting, and the Morse index of the discrete Hessian.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from src.core.descent import FlowConfig, PSDiagnostics, TerminationReason, flow_until, ps_monitor, tracked_value, value_kind
from src.core.dynamics import OrbitCertificate, conormal_norm, endpoint_velocities, min_conormal_energy, shoot
from src.core.errors import ClippedError, DomainError, NumericalError, PreconditionError
from src.core.paths import DiscretePath, PathCoordinates, eta_k, gradient_data
from src.core.surface import HomotopyClass, homotopy_class

logger = logging.getLogger(__name__)

ORBIT_GRAD_TOL = 1e-6
"""Dual norm of η_k below which a path counts as critical for reporting."""

CLOSURE_TOL = 1e-4
DRIFT_TOL = 1e-6
CONORMAL_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class CriticalPointReport:
    """
    Outcome of a critical-point search.

    Attributes:
        path: The final path.
        k: Energy level.
        value: Action, capped action, or ΔS (see value_kind).
        value_kind: Which value was tracked.
        grad_norm: Dual norm of η_k at the final path.
        certificate: Shooting residuals (None if shooting was impossible).
        return_time: First-return (periodic) or hitting (conormal) time of the shot orbit.
        index: Negative-eigenvalue count of the discrete Hessian, when computed.
        homotopy: Class of the final path.
        reason: Flow termination reason.
        diagnostics: Palais-Smale classification of the flow.
        status: "orbit", "not-certified", "collapse", "infeasible", "class-changed" or "failed".
    """
    path: DiscretePath
    k: float
    value: float
    value_kind: str
    grad_norm: float
    certificate: OrbitCertificate | None
    return_time: float | None
    index: int | None
    homotopy: HomotopyClass
    reason: TerminationReason | None
    diagnostics: PSDiagnostics | None
    status: str

    @property
    def is_orbit(self) -> bool:
        return self.status == "orbit"

    def to_dict(self) -> dict:
        cert = self.certificate
        return {
            "k": self.k,
            "value": self.value,
            "value_kind": self.value_kind,
            "grad_norm": self.grad_norm,
            "T": self.path.T,
            "nodes": self.path.n_segments,
            "closure_residual": None if cert is None else cert.closure_residual,
            "energy_drift": None if cert is None else cert.energy_drift,
            "conormal_residual": None if cert is None else list(cert.conormal_residual),
            "return_time": self.return_time,
            "index": self.index,
            "winding": None if self.homotopy.winding is None else list(self.homotopy.winding),
            "reason": None if self.reason is None else self.reason.value,
            "classification": None if self.diagnostics is None else self.diagnostics.classification,
            "status": self.status,
        }


# --- certification -----------------------------------------------------------

def _rescale_to_energy(model, q, v, k: float) -> np.ndarray:
    lam, _ = model.surface.conformal(q[None, :])
    room = k - float(model.potential_at(q[None, :])[0])
    speed = np.sqrt(lam[0] * (v @ v))
    if room <= 0 or speed == 0:
        return v
    return v * np.sqrt(2.0 * room) / speed


def _conormal_start(model, q, v, k: float, circle) -> np.ndarray:
    """
    Energy-k velocity at q closest in direction to v with d_vL annihilating T_qQ0.
    Falls back to the rescaled v when the energy is too low for such a velocity.
    """
    if circle.dim == 0:
        return _rescale_to_energy(model, q, v, k)
    t, _ = circle.locate(q, model.surface)
    tangent = circle.tangent(t)
    unit = tangent / np.linalg.norm(tangent)
    normal = np.array([-unit[1], unit[0]])
    lam = float(model.surface.conformal(q[None, :])[0][0])
    theta_t = float(model.theta_at(q[None, :])[0] @ unit)
    along = -theta_t / lam
    speed2 = 2.0 * (k - float(model.potential_at(q[None, :])[0])) / lam
    if speed2 < along**2:
        return _rescale_to_energy(model, q, v, k)
    across = np.sqrt(speed2 - along**2) * (1.0 if v @ normal >= 0 else -1.0)
    return along * unit + across * normal


def _initial_state(model, path: DiscretePath, k: float):
    x = path.nodes
    h = path.T * path.ds
    if path.boundary.is_periodic:
        shift = x[-1] - x[0]
        v0 = (x[1] - (x[-2] - shift)) / (2 * h)
        return x[0].copy(), _rescale_to_energy(model, x[0], v0, k)
    v0, _ = endpoint_velocities(path)
    return x[0].copy(), _conormal_start(model, x[0], v0, k, path.boundary.q0)


def _embedded(surface, nodes, charts, anchor) -> np.ndarray:
    """Trajectory nodes in coordinates where distances to the anchor are Euclidean."""
    if surface.is_sphere:
        return surface.to_ambient(nodes, charts)
    if surface.is_torus:
        d = nodes - anchor
        return anchor + d - surface.periods * np.round(d / surface.periods)
    return nodes


def _local_quadratic(points, i: int, dt: float):
    prev, cur, nxt = points[i - 1], points[i], points[i + 1]
    vel = (nxt - prev) / (2 * dt)
    acc = (nxt - 2 * cur + prev) / dt**2
    return cur, vel, acc


def certify(model, path: DiscretePath, k: float, window: float = 0.2) -> tuple[OrbitCertificate | None, float | None]:
    """
    Shoots from the path's initial condition and measures how well the orbit
    closes (or meets Q1) near time T.

    The initial velocity comes from the path (central difference for loops,
    one-sided for conormal paths), rescaled to energy k and, for conormal paths,
    projected onto the conormal condition at Q0. The trajectory is integrated to
    (1 + window)·T and the return (hitting) time is located within ±window·T
    by a local quadratic fit between RK4 nodes.

    Returns:
        (certificate, return_time); (None, None) if the orbit was clipped.
    """
    surface = model.surface
    path = path.in_chart(surface, path.chart)
    q0, v0 = _initial_state(model, path, k)
    horizon = (1.0 + window) * path.T
    steps = int(min(max(2000, np.ceil(horizon / 1e-3)), 200000))
    dt = horizon / steps
    try:
        traj, cert = shoot(model, q0, v0, horizon, steps, chart=path.chart, k=k, boundary=path.boundary)
    except ClippedError as e:
        logger.warning(f"Certification shot clipped: {e}")
        return None, None

    lo = max(1, int(np.floor((1.0 - window) * path.T / dt)))
    hi = steps - 1
    if path.boundary.is_periodic:
        anchor = surface.to_ambient(q0[None, :], np.array([path.chart]))[0] if surface.is_sphere else q0
        pts = _embedded(surface, traj.nodes, traj.charts, q0)

        def miss(i, tau):
            cur, vel, acc = _local_quadratic(pts, i, dt)
            return float(np.linalg.norm(cur + tau * vel + 0.5 * tau**2 * acc - anchor))
    else:
        q1 = path.boundary.q1

        def miss(i, tau):
            cur, vel, acc = _local_quadratic(traj.nodes, i, dt)
            return q1.distance(cur + tau * vel + 0.5 * tau**2 * acc, surface)

    if path.boundary.is_periodic:
        distances = np.linalg.norm(pts[lo:hi] - anchor, axis=-1)
    else:
        distances = np.array([miss(i, 0.0) for i in range(lo, hi)])
    best = lo + int(np.argmin(distances))
    res = optimize.minimize_scalar(lambda tau: miss(best, tau), bounds=(-dt, dt), method="bounded")
    tau = float(res.x) if res.fun <= distances[best - lo] else 0.0
    closure = min(float(res.fun), float(distances[best - lo]))
    return_time = best * dt + tau

    residual = (0.0, 0.0)
    if not path.boundary.is_periodic:
        cur, vel, acc = _local_quadratic(traj.nodes, best, dt)
        q_end = cur + tau * vel + 0.5 * tau**2 * acc
        v_end = vel + tau * acc
        residual = (conormal_norm(model, q0, v0, path.boundary.q0), conormal_norm(model, q_end, v_end, path.boundary.q1))
    certificate = OrbitCertificate(closure_residual=closure, energy_drift=cert.energy_drift, conormal_residual=residual)
    logger.debug(f"certify: return time {return_time:.6g} (T={path.T:.6g}), closure {closure:.3e}, "
                 f"drift {cert.energy_drift:.3e}, conormal {residual}")
    return certificate, return_time


# --- polishing and index -------------------------------------------------------

def _eta_z(model, coords: PathCoordinates, k: float):
    def residual(z):
        try:
            candidate = coords.unpack(z)
            return coords.covector(eta_k(model, candidate, k), z, candidate.T)
        except (DomainError, PreconditionError):
            return np.full(coords.size, 1e6)
    return residual


def polish(model, path: DiscretePath, k: float, metric: str = "H1", max_nfev: int = 50) -> DiscretePath:
    """
    Gauss-Newton solve of η_k = 0 started at `path`; kept only if the dual norm drops.

    Energy-k orbits are often saddles of A_k, where the flow slows down; the
    Newton-type solve converges quadratically there.
    """
    path = path.best_chart(model.surface)
    try:
        before = gradient_data(model, path, k, metric).norm
    except NumericalError as e:
        logger.warning(f"polish skipped: {e}")
        return path
    coords = PathCoordinates(path, model.surface)
    z0 = coords.pack(path)
    result = optimize.least_squares(_eta_z(model, coords, k), z0, method="trf", x_scale="jac",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    try:
        candidate = coords.unpack(result.x)
        after = gradient_data(model, candidate, k, metric).norm
    except (DomainError, PreconditionError, NumericalError) as e:
        logger.warning(f"polish rejected: {e}")
        return path
    if after < before:
        logger.info(f"polish: |eta| {before:.3e} -> {after:.3e}")
        return candidate
    logger.debug(f"polish did not improve |eta| ({before:.3e} -> {after:.3e})")
    return path


def hessian(model, path: DiscretePath, k: float, step: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Hessian of the action in z coordinates."""
    coords = PathCoordinates(path, model.surface)
    z0 = coords.pack(path)
    residual = _eta_z(model, coords, k)
    n = coords.size
    hess = np.empty((n, n))
    for j in range(n):
        dz = np.zeros(n)
        dz[j] = step
        hess[:, j] = (residual(z0 + dz) - residual(z0 - dz)) / (2 * step)
    return 0.5 * (hess + hess.T)


def hessian_index(model, path: DiscretePath, k: float, critical_tol: float = ORBIT_GRAD_TOL,
                  rel_tol: float = 1e-6, metric: str = "H1") -> int:
    """
    Number of negative eigenvalues of the finite-difference Hessian.

    Raises:
        PreconditionError: If the path is not critical (dual norm above critical_tol).
    """
    path = path.best_chart(model.surface)
    norm = gradient_data(model, path, k, metric).norm
    if norm > critical_tol:
        raise PreconditionError(f"hessian_index needs a critical path (|eta| = {norm:.3e} > {critical_tol:.1e})")
    eigenvalues = np.linalg.eigvalsh(hessian(model, path, k))
    scale = np.max(np.abs(eigenvalues))
    index = int(np.sum(eigenvalues < -rel_tol * scale))
    logger.debug(f"hessian_index: {index} negative of {len(eigenvalues)} (scale {scale:.3e})")
    return index


# --- reports ---------------------------------------------------------------

def conormal_infeasible(model, path: DiscretePath, k: float) -> bool:
    """True when k lies below the conormal obstruction of Q0 or Q1."""
    if path.boundary.is_periodic:
        return False
    boundary = path.boundary
    return k < max(min_conormal_energy(model, boundary.q0), min_conormal_energy(model, boundary.q1))


def assess(model, path: DiscretePath, k: float, *, metric: str = "H1", reason: TerminationReason | None = None,
           diagnostics: PSDiagnostics | None = None, value: float | None = None, kind: str | None = None,
           start_class: HomotopyClass | None = None, with_index: bool = False) -> CriticalPointReport:
    """Certifies a candidate path and assembles its report."""
    surface = model.surface
    kind = kind or value_kind(model, path)
    if value is None:
        value = tracked_value(model, path, k, kind)
    try:
        norm = gradient_data(model, path, k, metric).norm
    except NumericalError:
        norm = float("nan")
    cls = homotopy_class(surface, path)
    certificate, return_time = certify(model, path, k)

    if start_class is not None and cls != start_class:
        status = "class-changed"
    elif conormal_infeasible(model, path, k):
        status = "infeasible"
    elif diagnostics is not None and diagnostics.classification.startswith("collapse"):
        status = "collapse"
    elif (norm < ORBIT_GRAD_TOL and certificate is not None
          and certificate.passes(CLOSURE_TOL, DRIFT_TOL, CONORMAL_TOL)):
        status = "orbit"
    elif certificate is None:
        status = "failed"
    else:
        status = "not-certified"

    index = None
    if with_index and norm < ORBIT_GRAD_TOL:
        index = hessian_index(model, path, k, metric=metric)
    report = CriticalPointReport(path, k, float(value), kind, norm, certificate, return_time, index, cls,
                                 reason, diagnostics, status)
    logger.info(f"Critical point report: status={status}, value={value:.8g}, |eta|={norm:.3e}, T={path.T:.6g}")
    return report


def minimize(model, path0: DiscretePath, k: float, cfg: FlowConfig | None = None,
             with_index: bool = False) -> CriticalPointReport:
    """
    Flows `path0` down to a critical point in its homotopy class and certifies it.

    Collapse and period blowup are reported through the status and the
    Palais-Smale diagnostics, not raised.
    """
    cfg = cfg or FlowConfig()
    start_class = homotopy_class(model.surface, path0)
    path, trace = flow_until(model, path0, k, cfg)
    diagnostics = ps_monitor(trace)
    kind = trace.value_kind
    value = trace.final.value
    if cfg.polish and trace.reason not in (TerminationReason.T_COLLAPSE, TerminationReason.LEFT_DOMAIN,
                                           TerminationReason.FROZEN):
        polished = polish(model, path, k, cfg.metric)
        if polished is not path:
            if kind == "delta_s":
                coords = PathCoordinates(path, model.surface)
                z_old = coords.pack(path)
                z_new = coords.pack(polished)
                eta_old = _eta_z(model, coords, k)(z_old)
                eta_new = _eta_z(model, coords, k)(z_new)
                value += float(0.5 * (eta_old + eta_new) @ (z_new - z_old))
            else:
                value = None
            path = polished
    return assess(model, path, k, metric=cfg.metric, reason=trace.reason, diagnostics=diagnostics,
                  value=value, kind=kind, start_class=start_class, with_index=with_index)


if __name__ == '__main__':
    from src.core.dynamics import LagrangianModel
    from src.core.paths import straight_loop
    from src.core.surface import SurfaceModel
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    flat = LagrangianModel.build(SurfaceModel.flat_torus())
    start = straight_loop((0.0, 0.0), (1, 0), (1.0, 1.0), 64, 2.0)
    wobble = start.nodes.copy()
    wobble[1:-1, 1] += 0.05 * np.sin(2 * np.pi * np.linspace(0, 1, 65)[1:-1])
    report = minimize(flat, start.with_nodes(wobble), 0.5, with_index=True)
    logger.info(f"class-(1,0) minimizer: {report.to_dict()}")
