# src/core/paths.py
"""
Discretized path and loop spaces.

A path is N+1 chart nodes x_0..x_N on s ∈ [0, 1] (Δs = 1/N) plus a duration
T > 0; its velocity on segment i is v_i = Δx_i/(TΔs). Torus paths live on the
ℝ²-lift, so a periodic loop has x_N = x_0 + (lattice winding).

Discrete free-time action:

    A_k(x, T) = Σ_i TΔs · ½[ℓ(x_i, v_i) + ℓ(x_{i+1}, v_i)] + Σ_i ∫_0^1 θ(x_i + tΔx_i)·Δx_i dt + kT,

ℓ = ½λ|v|² − V, with the θ line integrals done by 3-point Gauss-Legendre on
each segment. `eta_k` is the exact gradient of this sum plus the pairing with
the extra 2-form σ; ∂A/∂T = k − (mean energy), so A is exactly affine in k.

Optimisation runs on a flat coordinate vector z (see `PathCoordinates`):
periodic z = [x_0, …, x_{N−1}, log T], conormal z = [t_0, x_1, …, x_{N−1}, t_1, log T]
with t_i the parameters of the endpoints on Q0, Q1 (absent for points).
"""
import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from src.core.errors import NumericalError, PreconditionError, UnsupportedError
from src.core.surface import Circle, CircleKind, SurfaceModel, homotopy_class

logger = logging.getLogger(__name__)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)
GL_T = 0.5 * (_GL_X + 1.0)
GL_W = 0.5 * _GL_W


def _circle_to_dict(circle: Circle | None):
    if circle is None:
        return None
    return {"kind": circle.kind.value, "center": list(circle.center), "level": circle.level, "radius": circle.radius}


def _circle_from_dict(data) -> Circle | None:
    if data is None:
        return None
    return Circle(CircleKind(data["kind"]), center=tuple(data.get("center", (0.0, 0.0))),
                  level=float(data.get("level", 0.0)), radius=float(data.get("radius", 0.0)))


@dataclass(frozen=True)
class BoundarySpec:
    """
    Boundary condition of a path space.

    Attributes:
        kind: "periodic" or "conormal".
        q0, q1: Endpoint submanifolds (conormal only).
        subgroup: Integer lattice vectors generating ⟨H0, H1⟩ (conormal only).
    """
    kind: str = "periodic"
    q0: Circle | None = None
    q1: Circle | None = None
    subgroup: tuple = ()

    def __post_init__(self):
        if self.kind not in ("periodic", "conormal"):
            raise PreconditionError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "conormal" and (self.q0 is None or self.q1 is None):
            raise PreconditionError("conormal boundary needs both Q0 and Q1")
        for vec in self.subgroup:
            if len(vec) != 2 or any(int(c) != c for c in vec):
                raise PreconditionError(f"subgroup vector {vec} is not an integer lattice vector")

    @classmethod
    def periodic(cls) -> "BoundarySpec":
        return cls("periodic")

    @classmethod
    def conormal(cls, q0: Circle, q1: Circle, subgroup=None, surface: SurfaceModel | None = None) -> "BoundarySpec":
        """Conormal boundary; the subgroup defaults to the lattice classes of Q0 and Q1."""
        if subgroup is None:
            subgroup = (q0.homology(surface) + q1.homology(surface)) if surface is not None else []
        return cls("conormal", q0, q1, tuple(tuple(int(c) for c in v) for v in subgroup))

    @property
    def is_periodic(self) -> bool:
        return self.kind == "periodic"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q0": _circle_to_dict(self.q0), "q1": _circle_to_dict(self.q1),
                "subgroup": [list(v) for v in self.subgroup]}

    @classmethod
    def from_dict(cls, data: dict) -> "BoundarySpec":
        return cls(data.get("kind", "periodic"), _circle_from_dict(data.get("q0")), _circle_from_dict(data.get("q1")),
                   tuple(tuple(v) for v in data.get("subgroup", [])))


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """
    N+1 chart nodes with a duration T.

    Attributes:
        nodes: Array (N+1, 2); torus nodes are on the ℝ²-lift.
        T: Duration, strictly positive.
        boundary: Periodic or conormal boundary data.
        charts: Chart tag of every node (sphere); zeros elsewhere.
    """
    nodes: np.ndarray
    T: float
    boundary: BoundarySpec = field(default_factory=BoundarySpec.periodic)
    charts: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 3:
            raise PreconditionError(f"a path needs at least 3 nodes of dimension 2, got shape {nodes.shape}")
        if not np.all(np.isfinite(nodes)):
            raise PreconditionError("path nodes must be finite")
        if not (np.isfinite(self.T) and self.T > 0):
            raise PreconditionError(f"path duration must be positive, got T={self.T}")
        charts = np.zeros(len(nodes), dtype=int) if self.charts is None else np.array(self.charts, dtype=int)
        if charts.shape != (len(nodes),):
            raise PreconditionError("one chart tag per node is required")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "charts", charts)

    @property
    def n_segments(self) -> int:
        return len(self.nodes) - 1

    @property
    def ds(self) -> float:
        return 1.0 / self.n_segments

    @property
    def chart(self) -> int:
        return int(self.charts[0])

    def with_nodes(self, nodes, T: float | None = None) -> "DiscretePath":
        return DiscretePath(nodes, self.T if T is None else T, self.boundary, self.charts.copy())

    def with_T(self, T: float) -> "DiscretePath":
        return DiscretePath(self.nodes.copy(), T, self.boundary, self.charts.copy())

    def in_chart(self, surface: SurfaceModel, chart: int) -> "DiscretePath":
        """The same sphere path with every node expressed in `chart`."""
        if not surface.is_sphere:
            return self
        nodes = self.nodes.copy()
        moved = self.charts != chart
        if np.any(moved):
            nodes[moved] = surface.change_chart(nodes[moved])
        return DiscretePath(nodes, self.T, self.boundary, np.full(len(nodes), chart, dtype=int))

    def best_chart(self, surface: SurfaceModel) -> "DiscretePath":
        """Sphere paths: moves to the chart keeping max |q| smallest once it exceeds the switch radius."""
        if not surface.is_sphere:
            return self
        uniform = self.in_chart(surface, self.chart)
        radius = np.max(np.linalg.norm(uniform.nodes, axis=-1))
        if radius <= surface.chart_switch:
            return uniform
        other = uniform.in_chart(surface, 1 - self.chart)
        if np.max(np.linalg.norm(other.nodes, axis=-1)) < radius:
            return other
        return uniform


@dataclass(frozen=True, eq=False)
class CovectorField:
    """
    A covector on the path space: one covector per node plus a dT component.
    """
    nodes: np.ndarray
    dT: float

    def pair(self, xi_nodes, xi_T: float = 0.0) -> float:
        """Dual pairing with a tangent perturbation (δx_0..δx_N, δT)."""
        return float(np.sum(self.nodes * np.asarray(xi_nodes)) + self.dT * xi_T)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.nodes)), abs(self.dT)))


# --- quadrature primitives ---------------------------------------------------

def _segments(path: DiscretePath):
    x = path.nodes
    d = np.diff(x, axis=0)
    h = path.T * path.ds
    return x, d, d / h, h


def _gauss_points(x, d):
    """Gauss-Legendre points on every segment, shape (N, 3, 2)."""
    return x[:-1, None, :] + GL_T[None, :, None] * d[:, None, :]


def theta_line_integral(model, path: DiscretePath) -> float:
    """Σ_i ∫_0^1 θ(x_i + tΔx_i)·Δx_i dt."""
    if not model.has_theta:
        return 0.0
    x, d, _, _ = _segments(path)
    pts = _gauss_points(x, d)
    integrand = np.sum(model.theta_at(pts) * d[:, None, :], axis=-1)
    return float(np.sum(integrand * GL_W[None, :]))


def action(model, path: DiscretePath, k: float) -> float:
    """
    Discrete free-time action A_k (without any contribution of the extra 2-form σ).

    Raises:
        PreconditionError: If T ≤ 0.
    """
    if path.T <= 0:
        raise PreconditionError(f"action needs T > 0, got {path.T}")
    x, d, v, h = _segments(path)
    lam, _ = model.surface.conformal(x)
    pot = model.potential_at(x)
    vv = np.sum(v * v, axis=-1)
    ell_left = 0.5 * lam[:-1] * vv - pot[:-1]
    ell_right = 0.5 * lam[1:] * vv - pot[1:]
    return float(h * np.sum(0.5 * (ell_left + ell_right)) + theta_line_integral(model, path) + k * path.T)


def mean_energy(model, path: DiscretePath) -> float:
    """Δs Σ ½[E(x_i, v_i) + E(x_{i+1}, v_i)]."""
    x, _, v, _ = _segments(path)
    lam, _ = model.surface.conformal(x)
    pot = model.potential_at(x)
    vv = np.sum(v * v, axis=-1)
    e_left = 0.5 * lam[:-1] * vv + pot[:-1]
    e_right = 0.5 * lam[1:] * vv + pot[1:]
    return float(path.ds * np.sum(0.5 * (e_left + e_right)))


def eta_k(model, path: DiscretePath, k: float) -> CovectorField:
    """
    The action 1-form η_k = dA_k + τ^σ at a discrete path.

    Node components are the exact x-gradient of `action` plus the pairing
    σ(x', ·) of the extra 2-form; the dT component is k minus the mean energy.
    """
    x, d, v, h = _segments(path)
    surface = model.surface
    lam, dlam = surface.conformal(x)
    dpot = model.potential_gradient(x)
    vv = np.sum(v * v, axis=-1)

    grad = np.zeros_like(x)
    dq_left = 0.5 * dlam[:-1] * vv[:, None] - dpot[:-1]
    dq_right = 0.5 * dlam[1:] * vv[:, None] - dpot[1:]
    grad[:-1] += 0.5 * h * dq_left
    grad[1:] += 0.5 * h * dq_right
    momentum = 0.5 * (lam[:-1] + lam[1:])[:, None] * v
    grad[:-1] -= momentum
    grad[1:] += momentum

    if model.has_theta or model.has_sigma:
        pts = _gauss_points(x, d)
        t = GL_T[None, :, None]
        w = GL_W[None, :, None]
        if model.has_theta:
            theta = model.theta_at(pts)
            dtheta_d = np.einsum("ntji,nj->nti", model.theta_jacobian(pts), d)
            grad[:-1] += np.sum(w * ((1 - t) * dtheta_d - theta), axis=1)
            grad[1:] += np.sum(w * (t * dtheta_d + theta), axis=1)
        if model.has_sigma:
            rho = model.sigma_chart_density(pts)[..., None]
            rot = np.stack([d[:, 1], -d[:, 0]], axis=-1)[:, None, :]
            grad[:-1] += np.sum(w * (1 - t) * rho * rot, axis=1)
            grad[1:] += np.sum(w * t * rho * rot, axis=1)

    dT = k - mean_energy(model, path)
    return CovectorField(grad, dT)


# --- coordinates, metric, gradient --------------------------------------------

class PathCoordinates:
    """
    Flat coordinates z of the free data of a path with fixed N and boundary.

    Attributes:
        size: Length of z (last entry is log T).
    """
    def __init__(self, path: DiscretePath, surface: SurfaceModel):
        self.surface = surface
        self.n = path.n_segments
        self.boundary = path.boundary
        self.charts = path.charts.copy()
        x = path.nodes
        if self.boundary.is_periodic:
            gap = x[-1] - x[0]
            if surface.is_torus:
                self.shift = surface.periods * np.round(gap / surface.periods)
            else:
                self.shift = np.zeros(2)
            self.size = 2 * self.n + 1
        else:
            _, self.offset0 = self.boundary.q0.locate(x[0], surface)
            _, self.offset1 = self.boundary.q1.locate(x[-1], surface)
            self.dim0 = self.boundary.q0.dim
            self.dim1 = self.boundary.q1.dim
            self.size = self.dim0 + 2 * (self.n - 1) + self.dim1 + 1

    def pack(self, path: DiscretePath) -> np.ndarray:
        x = path.nodes
        if self.boundary.is_periodic:
            return np.concatenate([x[:-1].ravel(), [np.log(path.T)]])
        parts = []
        if self.dim0:
            parts.append([self.boundary.q0.locate(x[0], self.surface)[0]])
        parts.append(x[1:-1].ravel())
        if self.dim1:
            parts.append([self.boundary.q1.locate(x[-1], self.surface)[0]])
        parts.append([np.log(path.T)])
        return np.concatenate(parts)

    def _split(self, z):
        z = np.asarray(z, dtype=float)
        if self.boundary.is_periodic:
            return None, z[:2 * self.n].reshape(self.n, 2), None, z[-1]
        i = 0
        t0 = None
        if self.dim0:
            t0, i = z[0], 1
        interior = z[i:i + 2 * (self.n - 1)].reshape(self.n - 1, 2)
        i += 2 * (self.n - 1)
        t1 = z[i] if self.dim1 else None
        return t0, interior, t1, z[-1]

    def unpack(self, z) -> DiscretePath:
        t0, inner, t1, log_t = self._split(z)
        if self.boundary.is_periodic:
            nodes = np.vstack([inner, inner[:1] + self.shift])
        else:
            start = self.boundary.q0.param(t0 if t0 is not None else 0.0, self.offset0)
            end = self.boundary.q1.param(t1 if t1 is not None else 0.0, self.offset1)
            nodes = np.vstack([start[None, :], inner, end[None, :]])
        return DiscretePath(nodes, float(np.exp(log_t)), self.boundary, self.charts.copy())

    def node_jacobian(self, z) -> sparse.csr_matrix:
        """Sparse map from z (without log T) to node perturbations, shape (2(N+1), size−1)."""
        n = self.n
        rows, cols, vals = [], [], []
        if self.boundary.is_periodic:
            for i in range(n):
                for c in range(2):
                    rows.append(2 * i + c); cols.append(2 * i + c); vals.append(1.0)
            for c in range(2):
                rows.append(2 * n + c); cols.append(c); vals.append(1.0)
            return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * (n + 1), self.size - 1))
        t0, _, t1, _ = self._split(z)
        col = 0
        if self.dim0:
            tangent = self.boundary.q0.tangent(t0)
            for c in range(2):
                rows.append(c); cols.append(0); vals.append(tangent[c])
            col = 1
        for i in range(1, n):
            for c in range(2):
                rows.append(2 * i + c); cols.append(col + 2 * (i - 1) + c); vals.append(1.0)
        if self.dim1:
            tangent = self.boundary.q1.tangent(t1)
            last = self.size - 2
            for c in range(2):
                rows.append(2 * n + c); cols.append(last); vals.append(tangent[c])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * (n + 1), self.size - 1))

    def covector(self, eta: CovectorField, z, T: float) -> np.ndarray:
        """Pulls η back to z coordinates (the log T entry is T·η_T)."""
        jac = self.node_jacobian(z)
        return np.concatenate([jac.T @ eta.nodes.ravel(), [T * eta.dT]])


def gram_matrix(model, path: DiscretePath, coords: PathCoordinates, z, metric: str = "H1") -> sparse.csc_matrix:
    """
    Discrete Riemannian metric on z.

    L2: Σ Δs·w_i g(x_i)(ξ_i, ξ_i); H1 adds Σ g(midpoint)(Δξ_i, Δξ_i)/Δs. The
    log T coordinate carries weight T², i.e. the product metric with dT².
    """
    if metric not in ("H1", "L2"):
        raise PreconditionError(f"unknown metric {metric!r}; use 'H1' or 'L2'")
    x = path.nodes
    n = path.n_segments
    lam, _ = model.surface.conformal(x)
    weights = np.full(n + 1, path.ds)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    g_nodes = sparse.diags(np.repeat(weights * lam, 2))
    if metric == "H1":
        mid_lam, _ = model.surface.conformal(0.5 * (x[:-1] + x[1:]))
        diff = sparse.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1))
        stiffness = diff.T @ sparse.diags(mid_lam / path.ds) @ diff
        g_nodes = g_nodes + sparse.kron(stiffness, sparse.identity(2))
    jac = coords.node_jacobian(z)
    g_x = jac.T @ g_nodes @ jac
    return sparse.block_diag([g_x, sparse.csr_matrix([[path.T**2]])]).tocsc()


@dataclass(frozen=True, eq=False)
class GradientData:
    """η_k in z coordinates with its Riesz representative and dual norm."""
    coords: PathCoordinates
    z: np.ndarray
    eta: np.ndarray
    sharp: np.ndarray
    gram: sparse.csc_matrix
    norm: float


def gradient_data(model, path: DiscretePath, k: float, metric: str = "H1") -> GradientData:
    """
    Evaluates η_k and solves the Gram system for its Riesz representative.

    Raises:
        NumericalError: If the Gram system is singular or the result is not finite.
    """
    coords = PathCoordinates(path, model.surface)
    z = coords.pack(path)
    eta = coords.covector(eta_k(model, path, k), z, path.T)
    gram = gram_matrix(model, path, coords, z, metric)
    sharp = sparse_linalg.spsolve(gram, eta)
    sharp = np.atleast_1d(np.asarray(sharp, dtype=float))
    if not np.all(np.isfinite(sharp)):
        raise NumericalError("singular Gram system while computing the gradient")
    norm = float(np.sqrt(max(eta @ sharp, 0.0)))
    return GradientData(coords, z, eta, sharp, gram, norm)


def grad(model, path: DiscretePath, k: float, metric: str = "H1") -> np.ndarray:
    """Riesz representative of η_k in z coordinates for the chosen discrete metric."""
    return gradient_data(model, path, k, metric).sharp


def metric_norm(gram, xi) -> float:
    return float(np.sqrt(max(xi @ (gram @ xi), 0.0)))


# --- local primitive near constant loops -----------------------------------

_INNER_X, _INNER_W = np.polynomial.legendre.leggauss(8)
INNER_T = 0.5 * (_INNER_X + 1.0)
INNER_W = 0.5 * _INNER_W


def capping_integral(model, path: DiscretePath) -> float:
    """
    ∮ F dy with F(x, y) = ∫_{x_c}^{x} ρ(s, y) ds and ρ the chart density of σ.

    dF∧dy = ρ dx∧dy, so for a closed loop on the lift this is the σ-flux
    through the disc it bounds, oriented by the loop. x_c is node 0's abscissa,
    which makes the value invariant under lattice translations.
    """
    if not model.has_sigma:
        return 0.0
    x, d, _, _ = _segments(path)
    pts = _gauss_points(x, d)
    xc = x[0, 0]
    span = pts[..., 0] - xc
    inner = np.stack([xc + INNER_T[None, None, :] * span[..., None],
                      np.broadcast_to(pts[..., 1][..., None], span.shape + (len(INNER_T),))], axis=-1)
    rho = model.sigma_chart_density(inner)
    primitive = span * np.sum(rho * INNER_W, axis=-1)
    return float(np.sum(primitive * GL_W[None, :] * d[:, None, 1]))


def _sphere_primitive_integral(model, path: DiscretePath) -> float:
    """∮ θ' for the chart primitive θ' = 2fr²/(1+|q|²)(−y dx + x dy) of a constant density f."""
    x, d, _, _ = _segments(path)
    pts = _gauss_points(x, d)
    f = float(model.sigma_density(0.0, 0.0))
    r2 = model.surface.radius**2
    scale = 2.0 * f * r2 / (1.0 + np.sum(pts * pts, axis=-1))
    form = scale[..., None] * np.stack([-pts[..., 1], pts[..., 0]], axis=-1)
    return float(np.sum(np.sum(form * d[:, None, :], axis=-1) * GL_W[None, :]))


def winding_number(nodes, center=(0.0, 0.0)) -> int:
    """Turns of a closed chart polygon around `center` (counter-clockwise positive)."""
    d = np.asarray(nodes, dtype=float) - np.asarray(center, dtype=float)
    angles = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    return int(np.round((angles[-1] - angles[0]) / (2 * np.pi)))


def default_delta(surface: SurfaceModel) -> float:
    return 1e-2 * surface.injectivity_scale()**2


def is_contractible(model, path: DiscretePath) -> bool:
    if model.surface.is_torus:
        return homotopy_class(model.surface, path).is_trivial
    return True


def s_k_local(model, path: DiscretePath, k: float, delta: float | None = None) -> float:
    """
    Local primitive S_k = A_k + ∫_{D_x} σ on the small-loop neighbourhood V_δ.

    Raises:
        PreconditionError: If the path is not a contractible loop with e(x) < δ.
    """
    delta = default_delta(model.surface) if delta is None else delta
    if not path.boundary.is_periodic:
        raise PreconditionError("s_k_local is defined on loops only")
    e = kinetic(path, model.surface)
    if e >= delta:
        raise PreconditionError(f"loop is outside V_delta (e = {e:.4g} >= delta = {delta:.4g})")
    if not is_contractible(model, path):
        raise PreconditionError("loop is not contractible")
    return action(model, path, k) + capping_integral(model, path)


def capped_action(model, path: DiscretePath, k: float) -> float:
    """
    A_k plus the σ-flux through a capping disc, for loops where one is canonical.

    Torus and half-plane: the disc bounded by a contractible loop on the lift.
    Sphere (constant density): the disc containing the south pole, so the
    value is continuous along families sweeping from the south to the north pole.

    Raises:
        PreconditionError: For non-contractible torus loops when σ is present.
        UnsupportedError: For non-constant sphere densities.
    """
    if not model.has_sigma:
        return action(model, path, k)
    if not path.boundary.is_periodic:
        raise PreconditionError("capped action is defined on loops only")
    surface = model.surface
    if surface.is_sphere:
        if model.sigma_density.expr.free_symbols:
            raise UnsupportedError("sphere capping needs a constant 2-form density")
        path = path.in_chart(surface, path.chart)
        base = action(model, path, k)
        flux = _sphere_primitive_integral(model, path)
        if path.chart == 1:
            # caps through the south pole and through the north pole differ by
            # the total flux, once per turn around the north pole
            flux -= winding_number(path.nodes) * float(model.sigma_density(0.0, 0.0)) * surface.total_area
        return base + flux
    if not is_contractible(model, path):
        raise PreconditionError("non-contractible loop has no capping disc")
    return action(model, path, k) + capping_integral(model, path)


# --- utilities ---------------------------------------------------------------

def resample(path: DiscretePath, n_new: int, surface: SurfaceModel | None = None) -> DiscretePath:
    """
    Linear-interpolation resampling to n_new segments (endpoints and closure kept).

    Sphere paths whose nodes sit in different charts are first moved to the
    chart of the first node, which needs the surface.

    Raises:
        PreconditionError: If n_new < 8, or the nodes mix charts and no surface is given.
    """
    if n_new < 8:
        raise PreconditionError(f"resample needs at least 8 segments, got {n_new}")
    if np.any(path.charts != path.chart):
        if surface is None:
            raise PreconditionError("resampling a path across sphere charts needs the surface")
        path = path.in_chart(surface, path.chart)
    s_old = np.linspace(0.0, 1.0, path.n_segments + 1)
    s_new = np.linspace(0.0, 1.0, n_new + 1)
    nodes = np.stack([np.interp(s_new, s_old, path.nodes[:, c]) for c in range(2)], axis=-1)
    return DiscretePath(nodes, path.T, path.boundary, np.full(n_new + 1, path.chart, dtype=int))


def _segment_metric(path: DiscretePath, surface: SurfaceModel | None):
    d = np.diff(path.nodes, axis=0)
    if surface is None:
        return d, np.ones(len(d))
    lam, _ = surface.conformal(0.5 * (path.nodes[:-1] + path.nodes[1:]))
    return d, lam


def length(path: DiscretePath, surface: SurfaceModel | None = None) -> float:
    """l(x) = Σ ‖Δx_i‖, metric evaluated at segment midpoints (Euclidean when no surface)."""
    d, lam = _segment_metric(path, surface)
    return float(np.sum(np.sqrt(lam * np.sum(d * d, axis=-1))))


def kinetic(path: DiscretePath, surface: SurfaceModel | None = None) -> float:
    """e(x) = Σ ‖Δx_i‖²/Δs."""
    d, lam = _segment_metric(path, surface)
    return float(np.sum(lam * np.sum(d * d, axis=-1)) / path.ds)


def constant_path(point, n: int, T: float, boundary: BoundarySpec | None = None, chart: int = 0) -> DiscretePath:
    nodes = np.tile(np.asarray(point, dtype=float), (n + 1, 1))
    return DiscretePath(nodes, T, boundary or BoundarySpec.periodic(), np.full(n + 1, chart, dtype=int))


def straight_loop(start, winding, periods, n: int, T: float) -> DiscretePath:
    """Closed torus geodesic from `start` with lattice winding (m, n)."""
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    shift = np.asarray(winding, dtype=float) * np.asarray(periods, dtype=float)
    return DiscretePath(np.asarray(start, dtype=float) + s * shift, T)


def circle_loop(center, radius: float, n: int, T: float, clockwise: bool = True, chart: int = 0) -> DiscretePath:
    """Chart circle traversed once, starting at angle 0."""
    sign = -1.0 if clockwise else 1.0
    phi = sign * np.linspace(0.0, 2 * np.pi, n + 1)
    nodes = np.asarray(center, dtype=float) + radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    nodes[-1] = nodes[0]
    return DiscretePath(nodes, T, BoundarySpec.periodic(), np.full(n + 1, chart, dtype=int))


def hyperbolic_circle(r: float, n: int, center=(0.0, 1.0), clockwise: bool = True, T: float | None = None) -> DiscretePath:
    """
    Half-plane circle of hyperbolic radius r, nodes uniform in hyperbolic arclength.

    Built in the disc model (Euclidean radius tanh(r/2)) and carried over by the
    Cayley map, which sends the disc centre to `center`. T defaults to the
    hyperbolic length 2π sinh r (unit speed).
    """
    sign = -1.0 if clockwise else 1.0
    phi = sign * np.linspace(0.0, 2 * np.pi, n + 1)
    w = np.tanh(0.5 * r) * np.exp(1j * phi)
    z = 1j * (1 + w) / (1 - w)
    cx, cy = center
    z = cx + cy * z
    nodes = np.stack([z.real, z.imag], axis=-1)
    nodes[-1] = nodes[0]
    return DiscretePath(nodes, 2 * np.pi * np.sinh(r) if T is None else T)


def latitude_loop(surface: SurfaceModel, rho: float, n: int, T: float, clockwise: bool = True) -> DiscretePath:
    """
    Sphere latitude at spherical angle rho from the south pole.

    The loop is stored in chart 0 for rho ≤ π/2 and in chart 1 otherwise; the
    orientation refers to chart 0 (a clockwise chart-0 loop is counter-clockwise
    seen in chart 1).
    """
    if not surface.is_sphere:
        raise UnsupportedError("latitude loops live on the sphere")
    sign = -1.0 if clockwise else 1.0
    phi = sign * np.linspace(0.0, 2 * np.pi, n + 1)
    if rho <= 0.5 * np.pi:
        radius, chart = np.tan(0.5 * rho), 0
    else:
        radius, chart, phi = np.tan(0.5 * (np.pi - rho)), 1, -phi
    nodes = radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    nodes[-1] = nodes[0]
    return DiscretePath(nodes, T, BoundarySpec.periodic(), np.full(n + 1, chart, dtype=int))


def write_path_csv(path: DiscretePath, filename: str, k: float | None = None) -> None:
    """Writes `# T=…; k=…; boundary=<json>` followed by rows s,x,y,chart."""
    s = np.linspace(0.0, 1.0, path.n_segments + 1)
    with open(filename, "w", newline="") as fh:
        fh.write(f"# T={path.T!r}; k={k!r}; boundary={json.dumps(path.boundary.to_dict())}\n")
        writer = csv.writer(fh)
        writer.writerow(["s", "x", "y", "chart"])
        for si, node, chart in zip(s, path.nodes, path.charts):
            writer.writerow([repr(float(si)), repr(float(node[0])), repr(float(node[1])), int(chart)])
    logger.debug(f"Path with {path.n_segments} segments written to {filename}")


def read_path_csv(filename: str) -> tuple[DiscretePath, float | None]:
    """Reads a file written by `write_path_csv`; returns (path, k)."""
    with open(filename, newline="") as fh:
        header = fh.readline().lstrip("#").strip()
        meta = {}
        for part in header.split("; "):
            key, _, value = part.partition("=")
            meta[key.strip()] = value
        rows = list(csv.DictReader(fh))
    nodes = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    charts = np.array([int(r["chart"]) for r in rows])
    boundary = BoundarySpec.from_dict(json.loads(meta["boundary"]))
    k = None if meta.get("k") in (None, "None") else float(meta["k"])
    return DiscretePath(nodes, float(meta["T"]), boundary, charts), k


if __name__ == '__main__':
    from src.core.dynamics import LagrangianModel
    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    plane = LagrangianModel.build(SurfaceModel.hyperbolic(), theta=("1/y", "0"), bounds=(0.5, 10.0))
    loop = hyperbolic_circle(1.0, 512)
    exact = (0.5 + 0.25) * 2 * np.pi * np.sinh(1.0) - 2 * np.pi * (np.cosh(1.0) - 1)
    logger.info(f"hyperbolic circle action {action(plane, loop, 0.25):.6f} vs closed form {exact:.6f}")
