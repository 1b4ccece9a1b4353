# src/core/surface.py
"""
Chart geometry of the three model surfaces.

All three metrics are conformal in their charts, g_q = λ(q)·I:
    flat torus           λ = 1
    hyperbolic half-plane λ = 1/y²
    round sphere          λ = 4r²/(1+|q|²)²  (two stereographic charts)

Sphere charts: chart 0 projects from the north pole, so the south pole sits at
its origin; chart 1 is (X, −Y)/(r + Z), which keeps the orientation of chart 0.
The transition q ↦ (x, −y)/|q|² is its own inverse.

Torus paths are stored on the ℝ²-lift; `wrap` gives the canonical
representative and `homotopy_class` reads off the lattice winding.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.core.errors import DomainError, UnsupportedError, ResolutionError
from src.utils import config

logger = logging.getLogger(__name__)

SPHERE_OVERFLOW = 1e6


class SurfaceKind(str, Enum):
    FLAT_TORUS = "flat-torus"
    HYPERBOLIC = "hyperbolic-half-plane"
    SPHERE = "round-sphere"


@dataclass(frozen=True)
class SurfaceModel:
    """
    A chart-based model surface.

    Attributes:
        kind: Which of the three model surfaces.
        lx, ly: Torus side lengths (FlatTorus only).
        box: (xmin, xmax, ymin, ymax) working rectangle inside {y > 0} (hyperbolic only).
        radius: Sphere radius (RoundSphere only).
        chart_switch: Stereographic radius beyond which sphere points change chart.
    """
    kind: SurfaceKind
    lx: float = 1.0
    ly: float = 1.0
    box: tuple = (-1000.0, 1000.0, 1e-3, 1e3)
    radius: float = 1.0
    chart_switch: float = config.SPHERE_CHART_SWITCH

    def __post_init__(self):
        if self.kind is SurfaceKind.FLAT_TORUS and (self.lx <= 0 or self.ly <= 0):
            raise DomainError(f"torus side lengths must be positive, got {self.lx}, {self.ly}")
        if self.kind is SurfaceKind.HYPERBOLIC:
            xmin, xmax, ymin, ymax = self.box
            if not (xmin < xmax and 0 < ymin < ymax):
                raise DomainError(f"hyperbolic box must satisfy xmin<xmax and 0<ymin<ymax, got {self.box}")
        if self.kind is SurfaceKind.SPHERE:
            if self.radius <= 0:
                raise DomainError(f"sphere radius must be positive, got {self.radius}")
            if self.chart_switch <= 1.0:
                raise DomainError(f"chart switch radius must exceed 1 so the charts overlap, got {self.chart_switch}")

    @classmethod
    def flat_torus(cls, lx: float = 1.0, ly: float = 1.0) -> "SurfaceModel":
        return cls(SurfaceKind.FLAT_TORUS, lx=lx, ly=ly)

    @classmethod
    def hyperbolic(cls, box=(-1000.0, 1000.0, 1e-3, 1e3)) -> "SurfaceModel":
        return cls(SurfaceKind.HYPERBOLIC, box=tuple(float(b) for b in box))

    @classmethod
    def round_sphere(cls, radius: float = 1.0, chart_switch: float = config.SPHERE_CHART_SWITCH) -> "SurfaceModel":
        return cls(SurfaceKind.SPHERE, radius=radius, chart_switch=chart_switch)

    @property
    def is_torus(self) -> bool:
        return self.kind is SurfaceKind.FLAT_TORUS

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind is SurfaceKind.HYPERBOLIC

    @property
    def is_sphere(self) -> bool:
        return self.kind is SurfaceKind.SPHERE

    @property
    def periods(self) -> np.ndarray:
        """Lattice side lengths (torus); raises for other surfaces."""
        if not self.is_torus:
            raise UnsupportedError(f"{self.kind.value} has no lattice")
        return np.array([self.lx, self.ly])

    @property
    def total_area(self) -> float | None:
        if self.is_torus:
            return self.lx * self.ly
        if self.is_sphere:
            return 4.0 * np.pi * self.radius**2
        return None

    def injectivity_scale(self) -> float:
        """Length scale used for the default size of the small-loop neighbourhood."""
        if self.is_torus:
            return 0.5 * min(self.lx, self.ly)
        if self.is_sphere:
            return np.pi * self.radius
        return 1.0

    def conformal(self, q) -> tuple[np.ndarray, np.ndarray]:
        """
        Conformal factor λ and its gradient at one or many chart points.

        Args:
            q: Array of shape (..., 2).

        Returns:
            (lam, dlam) with shapes (...) and (..., 2).

        Raises:
            DomainError: If any point is outside the chart's admissible set.
        """
        q = np.asarray(q, dtype=float)
        if not np.all(np.isfinite(q)):
            raise DomainError("non-finite chart point")
        x, y = q[..., 0], q[..., 1]
        if self.is_torus:
            return np.ones(x.shape), np.zeros(q.shape)
        if self.is_hyperbolic:
            if np.any(y <= 0):
                raise DomainError(f"hyperbolic point with y <= 0 (min y = {np.min(y):.3g})")
            lam = 1.0 / y**2
            dlam = np.stack([np.zeros(x.shape), -2.0 / y**3], axis=-1)
            return lam, dlam
        s = x**2 + y**2
        if np.any(s > SPHERE_OVERFLOW**2):
            raise DomainError(f"sphere chart overflow (|q| = {np.sqrt(np.max(s)):.3g})")
        r2 = self.radius**2
        lam = 4.0 * r2 / (1.0 + s)**2
        dlam = (-16.0 * r2 / (1.0 + s)**3)[..., None] * q
        return lam, dlam

    def in_box(self, q) -> bool:
        """True when every point lies in the hyperbolic working box (always True elsewhere)."""
        if not self.is_hyperbolic:
            return True
        q = np.asarray(q, dtype=float)
        xmin, xmax, ymin, ymax = self.box
        return bool(np.all((q[..., 0] >= xmin) & (q[..., 0] <= xmax) & (q[..., 1] >= ymin) & (q[..., 1] <= ymax)))

    def grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """
        A deterministic grid over the working region.

        Returns:
            (points, charts): points of shape (m, 2) and integer chart tags of shape (m,).
        """
        if self.is_torus:
            xs = np.arange(n) * self.lx / n
            ys = np.arange(n) * self.ly / n
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
            return pts, np.zeros(len(pts), dtype=int)
        if self.is_hyperbolic:
            xmin, xmax, ymin, ymax = self.box
            xs = np.linspace(xmin, xmax, n)
            ys = np.geomspace(ymin, ymax, n)
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
            return pts, np.zeros(len(pts), dtype=int)
        u = np.linspace(-1.0, 1.0, n)
        gx, gy = np.meshgrid(u, u, indexing="ij")
        disc = gx**2 + gy**2 <= 1.0
        half = np.stack([gx[disc], gy[disc]], axis=-1)
        pts = np.concatenate([half, half])
        charts = np.concatenate([np.zeros(len(half), dtype=int), np.ones(len(half), dtype=int)])
        return pts, charts

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Random admissible points (and chart tags) in the working region."""
        if self.is_torus:
            pts = rng.uniform(0.0, 1.0, size=(n, 2)) * self.periods
            return pts, np.zeros(n, dtype=int)
        if self.is_hyperbolic:
            xmin, xmax, ymin, ymax = self.box
            xs = rng.uniform(xmin, xmax, size=n)
            ys = np.exp(rng.uniform(np.log(ymin), np.log(ymax), size=n))
            return np.stack([xs, ys], axis=-1), np.zeros(n, dtype=int)
        radius = np.sqrt(rng.uniform(0.0, 1.0, size=n)) * self.chart_switch
        angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
        return pts, rng.integers(0, 2, size=n)

    # --- sphere charts -------------------------------------------------

    def change_chart(self, q, v=None):
        """
        Moves sphere chart points (and optionally tangent vectors) to the other chart.

        The transition is an involution, so the same call maps 0 → 1 and 1 → 0.
        """
        if not self.is_sphere:
            raise UnsupportedError(f"{self.kind.value} has a single chart")
        q = np.asarray(q, dtype=float)
        x, y = q[..., 0], q[..., 1]
        s = x**2 + y**2
        if np.any(s < 1.0 / SPHERE_OVERFLOW**2):
            raise DomainError("chart change at a pole of the target chart")
        q_new = np.stack([x / s, -y / s], axis=-1)
        if v is None:
            return q_new
        v = np.asarray(v, dtype=float)
        a = (y**2 - x**2) / s**2
        b = 2.0 * x * y / s**2
        v_new = np.stack([a * v[..., 0] - b * v[..., 1], b * v[..., 0] + a * v[..., 1]], axis=-1)
        return q_new, v_new

    def to_ambient(self, nodes, charts=None) -> np.ndarray:
        """Embeds chart points in ℝ³ (sphere) or returns a copy (flat charts)."""
        nodes = np.asarray(nodes, dtype=float)
        if not self.is_sphere:
            return nodes.copy()
        charts = np.zeros(nodes.shape[:-1], dtype=int) if charts is None else np.asarray(charts)
        x, y = nodes[..., 0], nodes[..., 1]
        s = x**2 + y**2
        sign = np.where(charts == 0, 1.0, -1.0)
        u = np.stack([2 * x, sign * 2 * y, sign * (s - 1)], axis=-1) / (1 + s)[..., None]
        return self.radius * u

    def from_ambient(self, points, chart: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Inverse of `to_ambient`; sphere points are projected radially first.

        Args:
            points: Array (..., 3) for the sphere, (..., 2) otherwise.
            chart: Common chart for all points; chosen from the mean height when None.

        Returns:
            (nodes, charts).
        """
        points = np.asarray(points, dtype=float)
        if not self.is_sphere:
            return points.copy(), np.zeros(points.shape[:-1], dtype=int)
        u = points / np.linalg.norm(points, axis=-1, keepdims=True)
        if chart is None:
            chart = 0 if np.mean(u[..., 2]) <= 0 else 1
        if chart == 0:
            nodes = np.stack([u[..., 0], u[..., 1]], axis=-1) / (1 - u[..., 2])[..., None]
        else:
            nodes = np.stack([u[..., 0], -u[..., 1]], axis=-1) / (1 + u[..., 2])[..., None]
        return nodes, np.full(points.shape[:-1], chart, dtype=int)


def metric_at(surface: SurfaceModel, q) -> np.ndarray:
    """
    Returns the 2×2 metric matrix g_q at a chart point.

    Raises:
        DomainError: If q is not admissible in the chart.
    """
    lam, _ = surface.conformal(np.asarray(q, dtype=float)[None, :])
    return lam[0] * np.eye(2)


def christoffel_at(surface: SurfaceModel, q) -> np.ndarray:
    """
    Returns Γ^i_{jk} at q as an array indexed [i, j, k].

    For g = e^{2φ}I: Γ^i_{jk} = δ_ij ∂_kφ + δ_ik ∂_jφ − δ_jk ∂_iφ, with φ = ½ log λ.
    """
    lam, dlam = surface.conformal(np.asarray(q, dtype=float)[None, :])
    dphi = dlam[0] / (2.0 * lam[0])
    delta = np.eye(2)
    return (np.einsum("ij,k->ijk", delta, dphi) + np.einsum("ik,j->ijk", delta, dphi)
            - np.einsum("jk,i->ijk", delta, dphi))


def geodesic_acceleration(surface: SurfaceModel, q, v) -> np.ndarray:
    """Vectorised −Γ^i_{jk} v^j v^k for arrays of points and velocities."""
    lam, dlam = surface.conformal(q)
    dphi = dlam / (2.0 * lam[..., None])
    v = np.asarray(v, dtype=float)
    vv = np.sum(v * v, axis=-1)
    return -2.0 * v * np.sum(dphi * v, axis=-1)[..., None] + dphi * vv[..., None]


def wrap(surface: SurfaceModel, q) -> np.ndarray:
    """
    Canonical representative of a torus point in [0, Lx) × [0, Ly).

    Raises:
        UnsupportedError: If the surface is not a flat torus.
    """
    if not surface.is_torus:
        raise UnsupportedError(f"wrap is only defined on the flat torus, not {surface.kind.value}")
    q = np.asarray(q, dtype=float)
    periods = surface.periods
    r = np.mod(q, periods)
    return np.where(r >= periods, r - periods, r)


def lift(surface: SurfaceModel, nodes) -> np.ndarray:
    """
    Nearest-representative unwrapping of torus nodes, anchored at nodes[0].

    Raises:
        ResolutionError: If a consecutive gap is too close to half a lattice period.
    """
    nodes = np.asarray(nodes, dtype=float)
    periods = surface.periods
    gaps = np.diff(nodes, axis=0)
    reduced = gaps - periods * np.round(gaps / periods)
    if np.any(np.abs(reduced) >= 0.5 * periods * (1.0 - 1e-9)):
        raise ResolutionError("consecutive nodes are half a period apart; the lift is ambiguous")
    return np.concatenate([nodes[:1], nodes[:1] + np.cumsum(reduced, axis=0)])


def _hermite_basis(vectors) -> list[np.ndarray]:
    """Row-reduces integer vectors to an upper-triangular basis of the subgroup they span."""
    rows = [np.array(v, dtype=np.int64) for v in vectors if np.any(np.array(v) != 0)]
    basis = []
    for col in (0, 1):
        pivot_rows = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(pivot_rows) > 1:
            pivot_rows.sort(key=lambda r: abs(r[col]))
            head = pivot_rows[0]
            reduced = [head]
            for r in pivot_rows[1:]:
                r = r - (r[col] // head[col]) * head
                (reduced if r[col] != 0 else rest).append(r)
            pivot_rows = reduced
        if pivot_rows:
            head = pivot_rows[0] * (1 if pivot_rows[0][col] > 0 else -1)
            basis.append(head)
        rows = [r for r in rest if np.any(r != 0)]
    return basis


@dataclass(frozen=True)
class HomotopyClass:
    """
    Winding pair of a torus loop or path; `winding=None` is the trivial marker
    used on simply connected charts.
    """
    winding: tuple | None = None

    def __add__(self, other: "HomotopyClass") -> "HomotopyClass":
        if self.winding is None:
            return other
        if other.winding is None:
            return self
        return HomotopyClass((self.winding[0] + other.winding[0], self.winding[1] + other.winding[1]))

    @property
    def is_trivial(self) -> bool:
        return self.winding is None or tuple(self.winding) == (0, 0)

    def reduced(self, subgroup) -> "HomotopyClass":
        """Canonical representative modulo the subgroup spanned by the given lattice vectors."""
        if self.winding is None or not subgroup:
            return self
        w = np.array(self.winding, dtype=np.int64)
        for h in _hermite_basis(subgroup):
            col = 0 if h[0] != 0 else 1
            w = w - (w[col] // h[col]) * h
        return HomotopyClass((int(w[0]), int(w[1])))


def homotopy_class(surface: SurfaceModel, path) -> HomotopyClass:
    """
    Winding pair of a discrete path's ℝ²-lift.

    For conormal paths the pair counts lattice copies between the copies of Q0 and
    Q1 met by the endpoints and is reduced modulo ⟨H0, H1⟩.

    Raises:
        ResolutionError: If the path is too coarse to lift.
    """
    if not surface.is_torus:
        return HomotopyClass(None)
    lifted = lift(surface, path.nodes)
    periods = surface.periods
    boundary = path.boundary
    if boundary.is_periodic:
        w = np.round((lifted[-1] - lifted[0]) / periods).astype(int)
        return HomotopyClass((int(w[0]), int(w[1])))
    _, off0 = boundary.q0.locate(lifted[0], surface)
    _, off1 = boundary.q1.locate(lifted[-1], surface)
    w = np.round((off1 - off0) / periods).astype(int)
    return HomotopyClass((int(w[0]), int(w[1]))).reduced(boundary.subgroup)


class CircleKind(str, Enum):
    POINT = "point"
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    ROUND = "round"


@dataclass(frozen=True)
class Circle:
    """
    An endpoint submanifold: a point, a coordinate line, or a round chart circle.

    Attributes:
        kind: Shape of the submanifold.
        center: Point location, or the centre of a round circle.
        level: The constant coordinate of a horizontal (y) or vertical (x) line.
        radius: Chart radius of a round circle.
    """
    kind: CircleKind
    center: tuple = (0.0, 0.0)
    level: float = 0.0
    radius: float = 0.0

    @classmethod
    def point(cls, x: float, y: float) -> "Circle":
        return cls(CircleKind.POINT, center=(float(x), float(y)))

    @classmethod
    def horizontal(cls, y: float) -> "Circle":
        return cls(CircleKind.HORIZONTAL, level=float(y))

    @classmethod
    def vertical(cls, x: float) -> "Circle":
        return cls(CircleKind.VERTICAL, level=float(x))

    @classmethod
    def round(cls, cx: float, cy: float, radius: float) -> "Circle":
        return cls(CircleKind.ROUND, center=(float(cx), float(cy)), radius=float(radius))

    @property
    def dim(self) -> int:
        return 0 if self.kind is CircleKind.POINT else 1

    def homology(self, surface: SurfaceModel) -> list[tuple]:
        """Lattice vectors traced by the submanifold itself (its H_i)."""
        if not surface.is_torus:
            return []
        if self.kind is CircleKind.HORIZONTAL:
            return [(1, 0)]
        if self.kind is CircleKind.VERTICAL:
            return [(0, 1)]
        return []

    def param(self, t, offset=(0.0, 0.0)) -> np.ndarray:
        """Point of the submanifold at parameter t, on the lattice copy `offset`."""
        offset = np.asarray(offset, dtype=float)
        if self.kind is CircleKind.POINT:
            return np.array(self.center, dtype=float) + offset
        if self.kind is CircleKind.HORIZONTAL:
            return np.array([t, self.level]) + offset
        if self.kind is CircleKind.VERTICAL:
            return np.array([self.level, t]) + offset
        c = np.array(self.center, dtype=float)
        return c + self.radius * np.array([np.cos(t), np.sin(t)]) + offset

    def tangent(self, t) -> np.ndarray:
        """Chart derivative of `param` with respect to t (zero for a point)."""
        if self.kind is CircleKind.POINT:
            return np.zeros(2)
        if self.kind is CircleKind.HORIZONTAL:
            return np.array([1.0, 0.0])
        if self.kind is CircleKind.VERTICAL:
            return np.array([0.0, 1.0])
        return self.radius * np.array([-np.sin(t), np.cos(t)])

    def locate(self, q, surface: SurfaceModel) -> tuple[float, np.ndarray]:
        """Nearest point parameter and lattice copy for a chart point q."""
        q = np.asarray(q, dtype=float)
        offset = np.zeros(2)
        if self.kind is CircleKind.HORIZONTAL:
            if surface.is_torus:
                offset[1] = surface.ly * np.round((q[1] - self.level) / surface.ly)
            return float(q[0]), offset
        if self.kind is CircleKind.VERTICAL:
            if surface.is_torus:
                offset[0] = surface.lx * np.round((q[0] - self.level) / surface.lx)
            return float(q[1]), offset
        c = np.array(self.center, dtype=float)
        if surface.is_torus:
            offset = surface.periods * np.round((q - c) / surface.periods)
        if self.kind is CircleKind.POINT:
            return 0.0, offset
        d = q - c - offset
        return float(np.arctan2(d[1], d[0])), offset

    def distance(self, q, surface: SurfaceModel) -> float:
        """Chart distance from q to the nearest lattice copy of the submanifold."""
        t, offset = self.locate(q, surface)
        return float(np.linalg.norm(np.asarray(q, dtype=float) - self.param(t, offset)))

    def sample(self, surface: SurfaceModel, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
        """
        Points and unit chart tangents along one period of the submanifold.

        Returns:
            (points (m, 2), tangents (m, 2)); a point returns one row with zero tangent.
        """
        if self.kind is CircleKind.POINT:
            return np.array([self.center], dtype=float), np.zeros((1, 2))
        if self.kind is CircleKind.ROUND:
            ts = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        elif surface.is_torus:
            span = surface.lx if self.kind is CircleKind.HORIZONTAL else surface.ly
            ts = np.linspace(0.0, span, n, endpoint=False)
        elif surface.is_hyperbolic:
            xmin, xmax, ymin, ymax = surface.box
            lo, hi = (xmin, xmax) if self.kind is CircleKind.HORIZONTAL else (ymin, ymax)
            ts = np.linspace(lo, hi, n)
        else:
            span = surface.chart_switch
            ts = np.linspace(-span, span, n)
        pts = np.array([self.param(t) for t in ts])
        tans = np.array([self.tangent(t) for t in ts])
        tans = tans / np.linalg.norm(tans, axis=-1, keepdims=True)
        return pts, tans


def intersect(surface: SurfaceModel, q0: Circle, q1: Circle, n: int = 2048, tol: float = 1e-9) -> np.ndarray:
    """
    Points of Q0 ∩ Q1 (one lattice copy each on the torus).

    Lines and points are intersected exactly; round circles are intersected by
    sampling Q0 and keeping samples within a chart distance of the sampling step.
    """
    kinds = {q0.kind, q1.kind}
    if q0.kind is CircleKind.POINT or q1.kind is CircleKind.POINT:
        point, other = (q0, q1) if q0.kind is CircleKind.POINT else (q1, q0)
        p = np.array(point.center, dtype=float)
        return p[None, :] if other.distance(p, surface) < tol else np.zeros((0, 2))
    if kinds == {CircleKind.HORIZONTAL, CircleKind.VERTICAL}:
        h, v = (q0, q1) if q0.kind is CircleKind.HORIZONTAL else (q1, q0)
        return np.array([[v.level, h.level]])
    if q0.kind is q1.kind and q0.kind in (CircleKind.HORIZONTAL, CircleKind.VERTICAL):
        probe = q0.param(0.0)
        if q1.distance(probe, surface) < tol:
            return q0.sample(surface, 64)[0]
        return np.zeros((0, 2))
    pts, _ = q0.sample(surface, n)
    step = 2 * np.pi * max(q0.radius, 1e-12) / n if q0.kind is CircleKind.ROUND else 1.0 / n
    keep = [p for p in pts if q1.distance(p, surface) < step]
    return np.array(keep) if keep else np.zeros((0, 2))


if __name__ == '__main__':
    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    torus = SurfaceModel.flat_torus()
    plane = SurfaceModel.hyperbolic()
    sphere = SurfaceModel.round_sphere()
    logger.info(f"torus metric at (0.3, 0.7):\n{metric_at(torus, (0.3, 0.7))}")
    logger.info(f"hyperbolic metric at (0, 2):\n{metric_at(plane, (0.0, 2.0))}")
    logger.info(f"sphere metric at the chart origin:\n{metric_at(sphere, (0.0, 0.0))}")
    logger.info(f"hyperbolic Γ^x_xy at (0, 2): {christoffel_at(plane, (0.0, 2.0))[0, 0, 1]}")
    logger.info(f"wrap(1.3, -0.2) = {wrap(torus, (1.3, -0.2))}")
