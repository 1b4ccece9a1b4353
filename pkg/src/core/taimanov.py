# src/core/taimanov.py
"""
Taimanov functional T_k(Π) = √(2k)·l(∂Π) + ∫_Π σ over films Π on the torus,
and a bracket for τ_+, the largest k at which some film has negative value.

A film is stored as a level function φ on an M×M grid (Π = {φ > 0}). The
boundary is the marching-squares contour of φ at 0; the σ-integral weights
every grid cell by its sub-pixel area fraction.
"""
import csv
import logging
from dataclasses import dataclass

import numpy as np
from skimage import measure

from src.core.dynamics import LagrangianModel
from src.core.errors import PreconditionError, UnsupportedError
from src.core.mane import Bracket
from src.core.surface import SurfaceModel

logger = logging.getLogger(__name__)

_TINY = 1e-12


@dataclass(frozen=True, eq=False)
class TaimanovFilm:
    """
    A film on the flat torus.

    Attributes:
        level: Array (M, M) sampled at (i·lx/M, j·ly/M); the film is {level > 0}.
        lx, ly: Torus periods.
        label: Where the film came from.
    """
    level: np.ndarray
    lx: float = 1.0
    ly: float = 1.0
    label: str = "film"

    def __post_init__(self):
        level = np.asarray(self.level, dtype=float)
        if level.ndim != 2 or level.shape[0] != level.shape[1] or level.shape[0] < 4:
            raise PreconditionError(f"a film needs a square grid of size ≥ 4, got {level.shape}")
        object.__setattr__(self, "level", level)

    @property
    def size(self) -> int:
        return self.level.shape[0]

    @property
    def spacing(self) -> tuple[float, float]:
        return self.lx / self.size, self.ly / self.size

    @property
    def indicator(self) -> np.ndarray:
        """Binary film on the grid."""
        return self.level > 0

    @classmethod
    def from_level(cls, surface: SurfaceModel, values, label: str = "film") -> "TaimanovFilm":
        return cls(np.asarray(values, dtype=float), surface.lx, surface.ly, label)

    @classmethod
    def empty(cls, surface: SurfaceModel, size: int) -> "TaimanovFilm":
        return cls(-np.ones((size, size)), surface.lx, surface.ly, "empty")

    @classmethod
    def full(cls, surface: SurfaceModel, size: int) -> "TaimanovFilm":
        return cls(np.ones((size, size)), surface.lx, surface.ly, "torus")

    @classmethod
    def disc(cls, surface: SurfaceModel, size: int, center, radius: float) -> "TaimanovFilm":
        """Disc of the given radius (periodic distance), as a signed distance."""
        x, y = film_grid(surface, size)
        dx = x - center[0]
        dy = y - center[1]
        dx -= surface.lx * np.round(dx / surface.lx)
        dy -= surface.ly * np.round(dy / surface.ly)
        return cls(radius - np.hypot(dx, dy), surface.lx, surface.ly, f"disc(r={radius:.3g})")

    def boundary_contours(self) -> list[np.ndarray]:
        """Boundary pieces in chart coordinates; pieces crossing the period are cut there."""
        hx, hy = self.spacing
        padded = np.pad(self.level, ((0, 1), (0, 1)), mode="wrap")
        if np.all(padded > 0) or np.all(padded <= 0):
            return []
        return [c * np.array([hx, hy]) for c in measure.find_contours(padded, 0.0)]

    def boundary_length(self) -> float:
        hx, hy = self.spacing
        total = 0.0
        for piece in self.boundary_contours():
            seg = np.diff(piece, axis=0)
            mid = 0.5 * (piece[:-1] + piece[1:])
            inside = (mid[:, 0] < self.lx - 0.5 * _TINY) & (mid[:, 1] < self.ly - 0.5 * _TINY)
            total += float(np.sum(np.linalg.norm(seg[inside], axis=-1)))
        return total

    def area_fractions(self) -> np.ndarray:
        """Share of each grid cell inside the film: clip(½ + φ/(|∇φ|h), 0, 1)."""
        hx, hy = self.spacing
        gx, gy = _gradient(self.level, hx, hy)
        norm = np.maximum(np.hypot(gx, gy), _TINY)
        h = np.sqrt(hx * hy)
        return np.clip(0.5 + self.level / (norm * h), 0.0, 1.0)

    def sigma_integral(self, model: LagrangianModel) -> float:
        hx, hy = self.spacing
        density = sigma_on_grid(model, self.size)
        return float(np.sum(self.area_fractions() * density) * hx * hy)


def film_grid(surface: SurfaceModel, size: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.arange(size) * surface.lx / size
    ys = np.arange(size) * surface.ly / size
    return np.meshgrid(xs, ys, indexing="ij")


def sigma_on_grid(model: LagrangianModel, size: int) -> np.ndarray:
    """Chart density of σ on the film grid."""
    if not model.surface.is_torus:
        raise UnsupportedError("Taimanov films are implemented on the torus only")
    x, y = film_grid(model.surface, size)
    return np.broadcast_to(model.sigma_chart_density(np.stack([x, y], axis=-1)), x.shape)


def _gradient(phi, hx, hy):
    gx = (np.roll(phi, -1, axis=0) - np.roll(phi, 1, axis=0)) / (2 * hx)
    gy = (np.roll(phi, -1, axis=1) - np.roll(phi, 1, axis=1)) / (2 * hy)
    return gx, gy


def _curvature(phi, hx, hy):
    """Boundary curvature κ = −div(∇φ/|∇φ|), positive for convex films."""
    gx, gy = _gradient(phi, hx, hy)
    gxx = (np.roll(phi, -1, axis=0) - 2 * phi + np.roll(phi, 1, axis=0)) / hx**2
    gyy = (np.roll(phi, -1, axis=1) - 2 * phi + np.roll(phi, 1, axis=1)) / hy**2
    gxy = (np.roll(np.roll(phi, -1, 0), -1, 1) - np.roll(np.roll(phi, -1, 0), 1, 1)
           - np.roll(np.roll(phi, 1, 0), -1, 1) + np.roll(np.roll(phi, 1, 0), 1, 1)) / (4 * hx * hy)
    norm = np.maximum(np.hypot(gx, gy), _TINY)
    return -(gxx * gy**2 - 2 * gx * gy * gxy + gyy * gx**2) / norm**3, norm


def taimanov_value(model: LagrangianModel, film: TaimanovFilm, k: float) -> float:
    """
    T_k(Π) = √(2k)·l(∂Π) + ∫_Π σ.

    Raises:
        PreconditionError: If k < 0.
    """
    if k < 0:
        raise PreconditionError(f"the Taimanov functional needs k ≥ 0, got {k}")
    length = film.boundary_length()
    flux = film.sigma_integral(model) if film.indicator.any() else 0.0
    return float(np.sqrt(2.0 * k) * length + flux)


def threshold(model: LagrangianModel, film: TaimanovFilm) -> float:
    """The k below which this film is negative: ½(∫σ / l)² for negative flux, else 0."""
    flux = film.sigma_integral(model) if film.indicator.any() else 0.0
    length = film.boundary_length()
    if flux >= 0 or length <= 0:
        return 0.0
    return 0.5 * (flux / length)**2


def local_moves(model: LagrangianModel, film: TaimanovFilm, k: float, steps: int = 40, cfl: float = 0.2) -> TaimanovFilm:
    """
    Descends T_k by moving the boundary with normal speed −(√(2k)κ + f).

    Returns the best film met along the way (possibly the input).
    """
    hx, hy = film.spacing
    h = min(hx, hy)
    density = sigma_on_grid(model, film.size)
    speed = np.sqrt(2.0 * max(k, 0.0))
    dt = cfl * min(h * h / (2 * speed + _TINY), h / (float(np.max(np.abs(density))) + _TINY))
    best, best_value = film, taimanov_value(model, film, k)
    phi = film.level.copy()
    for _ in range(steps):
        kappa, norm = _curvature(phi, hx, hy)
        phi = phi - dt * (speed * kappa + density) * norm
        if not np.all(np.isfinite(phi)):
            logger.warning(f"local moves on {film.label} went non-finite at k={k:.4g}")
            break
        candidate = TaimanovFilm(phi, film.lx, film.ly, f"{film.label}+moves")
        value = taimanov_value(model, candidate, k)
        if value < best_value:
            best, best_value = candidate, value
    return best


def film_family(model: LagrangianModel, size: int = 128, levels: int = 9) -> list[TaimanovFilm]:
    """∅, T², sub- and superlevel sets of the σ-density, and discs around its minimum."""
    surface = model.surface
    density = sigma_on_grid(model, size)
    films = [TaimanovFilm.empty(surface, size), TaimanovFilm.full(surface, size)]
    for c in np.quantile(density, np.linspace(0.05, 0.95, levels)):
        films.append(TaimanovFilm.from_level(surface, c - density, f"sublevel({c:.3g})"))
        films.append(TaimanovFilm.from_level(surface, density - c, f"superlevel({c:.3g})"))
    x, y = film_grid(surface, size)
    i, j = np.unravel_index(int(np.argmin(density)), density.shape)
    scale = min(surface.lx, surface.ly)
    for r in (0.05, 0.1, 0.2, 0.3):
        films.append(TaimanovFilm.disc(surface, size, (x[i, j], y[i, j]), r * scale))
    return films


@dataclass(frozen=True)
class TaimanovRow:
    k: float
    value: float
    label: str


def taimanov_scan(model: LagrangianModel, k_grid, size: int = 128, moves: int = 40,
                  films: list | None = None) -> list[TaimanovRow]:
    """inf of T_k over the film family (with local moves from the three best films) at each k."""
    films = films if films is not None else film_family(model, size)
    rows = []
    for k in np.asarray(k_grid, dtype=float):
        values = np.array([taimanov_value(model, f, k) for f in films])
        order = np.argsort(values)
        best_value, best_label = float(values[order[0]]), films[order[0]].label
        if moves > 0:
            for idx in order[:3]:
                if not films[idx].indicator.any() or films[idx].indicator.all():
                    continue
                moved = local_moves(model, films[idx], k, moves)
                value = taimanov_value(model, moved, k)
                if value < best_value:
                    best_value, best_label = value, moved.label
        rows.append(TaimanovRow(float(k), best_value, best_label))
        logger.debug(f"k={k:.4g}: inf T_k ≈ {best_value:.6g} ({best_label})")
    return rows


def tau_plus_bracket(model: LagrangianModel, k_grid, size: int = 128, moves: int = 40,
                     rows: list | None = None) -> Bracket:
    """
    Bracket for τ_+ from the sign of inf T_k over the searched films.

    The lower side is the largest film threshold (certified up to the grid
    discretisation), raised to the largest grid k with a negative film; the
    upper side is the first grid k above it where the search finds none.

    Raises:
        PreconditionError: If k_grid is not strictly increasing.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if len(k_grid) == 0 or np.any(np.diff(k_grid) <= 0) or k_grid[0] < 0:
        raise PreconditionError("k_grid must be nonnegative and strictly increasing")
    films = film_family(model, size)
    rows = rows if rows is not None else taimanov_scan(model, k_grid, size, moves, films)
    lo = max(threshold(model, f) for f in films)
    negatives = [r.k for r in rows if r.value < 0]
    if negatives:
        lo = max(lo, max(negatives))
    above = [r.k for r in rows if r.k > lo and r.value >= 0]
    if above:
        bracket = Bracket(lo, min(above), "negative film", "film search (heuristic)")
    else:
        bracket = Bracket(lo, np.inf, "negative film", "none found on grid", widened=True)
    logger.info(f"tau_+ bracket for {model.name} at M={size}: [{bracket.lo:.6g}, {bracket.hi:.6g}]")
    return bracket


def write_scan_csv(rows: list[TaimanovRow], filename: str) -> None:
    with open(filename, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "inf_T", "film"])
        for r in rows:
            writer.writerow([repr(r.k), repr(r.value), r.label])
    logger.info(f"Taimanov scan written to {filename}")


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[logging.StreamHandler()])
    torus = SurfaceModel.flat_torus()
    oscillating = LagrangianModel.build(torus, sigma_density="1/2 + 5*sin(2*pi*x)*sin(2*pi*y)", name="oscillating")
    tau_plus_bracket(oscillating, np.geomspace(0.01, 10.0, 13))
