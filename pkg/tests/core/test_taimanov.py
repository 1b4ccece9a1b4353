import os
import tempfile
import unittest

import numpy as np

from src.core import taimanov
from src.core.dynamics import LagrangianModel
from src.core.errors import PreconditionError, UnsupportedError
from src.core.surface import SurfaceModel
from src.core.taimanov import TaimanovFilm

OSCILLATING = "1/2 + 5*sin(2*pi*x)*sin(2*pi*y)"


class TestFilms(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()

    def test_film_needs_square_grid(self):
        with self.assertRaises(PreconditionError):
            TaimanovFilm(np.ones((8, 6)))
        with self.assertRaises(PreconditionError):
            TaimanovFilm(np.ones((2, 2)))

    def test_empty_and_full_films(self):
        """T_k of the empty film is 0; the whole torus has no boundary and carries the total flux."""
        model = LagrangianModel.build(self.torus, sigma_density=OSCILLATING)
        empty = TaimanovFilm.empty(self.torus, 64)
        full = TaimanovFilm.full(self.torus, 64)
        self.assertEqual(taimanov.taimanov_value(model, empty, 2.0), 0.0)
        self.assertEqual(full.boundary_length(), 0.0)
        self.assertAlmostEqual(taimanov.taimanov_value(model, full, 2.0), 0.5, places=6)

    def test_disc_value(self):
        """A disc of radius r in a unit field has T_k = sqrt(2k) 2 pi r + pi r^2."""
        model = LagrangianModel.build(self.torus, sigma_density="1")
        r, k = 0.2, 0.5
        disc = TaimanovFilm.disc(self.torus, 128, (0.5, 0.5), r)
        self.assertAlmostEqual(disc.boundary_length() / (2 * np.pi * r), 1.0, delta=0.01)
        expected = np.sqrt(2 * k) * 2 * np.pi * r + np.pi * r**2
        self.assertAlmostEqual(taimanov.taimanov_value(model, disc, k) / expected, 1.0, delta=0.05)

    def test_value_increases_with_k(self):
        model = LagrangianModel.build(self.torus, sigma_density=OSCILLATING)
        films = taimanov.film_family(model, 32)
        for film in films[2:]:
            values = [taimanov.taimanov_value(model, film, k) for k in (0.0, 0.1, 1.0, 10.0)]
            self.assertTrue(all(np.diff(values) >= 0), f"T_k of {film.label} should not decrease in k: {values}")

    def test_disc_across_the_period(self):
        """A disc centred on the corner is cut by the period but keeps its length."""
        disc = TaimanovFilm.disc(self.torus, 128, (0.0, 0.0), 0.2)
        self.assertAlmostEqual(disc.boundary_length() / (2 * np.pi * 0.2), 1.0, delta=0.02)

    def test_threshold(self):
        """With negative flux the film is negative below 1/2 (flux/length)^2 = r^2/8."""
        model = LagrangianModel.build(self.torus, sigma_density="-1")
        disc = TaimanovFilm.disc(self.torus, 128, (0.5, 0.5), 0.2)
        self.assertAlmostEqual(taimanov.threshold(model, disc) / (0.2**2 / 8), 1.0, delta=0.05)
        self.assertEqual(taimanov.threshold(LagrangianModel.build(self.torus, sigma_density="1"), disc), 0.0)

    def test_preconditions(self):
        model = LagrangianModel.build(self.torus, sigma_density="1")
        with self.assertRaises(PreconditionError):
            taimanov.taimanov_value(model, TaimanovFilm.empty(self.torus, 16), -0.1)
        plane = LagrangianModel.build(SurfaceModel.hyperbolic(), sigma_density="1")
        with self.assertRaises(UnsupportedError):
            taimanov.film_family(plane, 16)


class TestScan(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.model = LagrangianModel.build(self.torus, sigma_density=OSCILLATING, name="oscillating")

    def test_sign_of_infimum(self):
        """Small k admits negative films; at large k the empty film is optimal."""
        rows = taimanov.taimanov_scan(self.model, [0.01, 10.0], size=64, moves=0)
        self.assertLess(rows[0].value, 0.0)
        self.assertGreaterEqual(rows[1].value, 0.0)
        self.assertEqual(rows[1].label, "empty")

    def test_local_moves_never_worsen(self):
        film = taimanov.film_family(self.model, 64)[2]
        moved = taimanov.local_moves(self.model, film, 0.05, steps=10)
        self.assertLessEqual(taimanov.taimanov_value(self.model, moved, 0.05),
                             taimanov.taimanov_value(self.model, film, 0.05))

    def test_tau_plus_bracket(self):
        bracket = taimanov.tau_plus_bracket(self.model, [0.01, 0.1, 1.0, 10.0], size=64, moves=0)
        self.assertGreaterEqual(bracket.lo, 0.01)
        self.assertTrue(np.isfinite(bracket.hi), f"A grid level without negative films exists: {bracket}")
        self.assertLess(bracket.lo, bracket.hi)

    def test_grid_must_increase(self):
        with self.assertRaises(PreconditionError):
            taimanov.tau_plus_bracket(self.model, [1.0, 0.5], size=16)

    def test_scan_csv(self):
        rows = taimanov.taimanov_scan(self.model, [0.1], size=32, moves=0)
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "taimanov.csv")
            taimanov.write_scan_csv(rows, filename)
            with open(filename) as fh:
                lines = fh.read().splitlines()
        self.assertEqual(lines[0], "k,inf_T,film")
        self.assertEqual(len(lines), 2)


@unittest.skipUnless(os.getenv("RUN_SLOW"), "set RUN_SLOW=1 to run the full-resolution film searches")
class TestTauPlusSlow(unittest.TestCase):
    def test_bracket_is_stable_under_grid_doubling(self):
        """Doubling the film grid moves neither side of the tau_+ bracket by more than 10%."""
        model = LagrangianModel.build(SurfaceModel.flat_torus(), sigma_density=OSCILLATING)
        k_grid = np.geomspace(0.01, 10.0, 13)
        coarse = taimanov.tau_plus_bracket(model, k_grid, size=64)
        fine = taimanov.tau_plus_bracket(model, k_grid, size=128)
        self.assertGreater(coarse.lo, 0.0)
        self.assertAlmostEqual(fine.lo / coarse.lo, 1.0, delta=0.1, msg=f"{coarse} vs {fine}")
        self.assertAlmostEqual(fine.hi / coarse.hi, 1.0, delta=0.1, msg=f"{coarse} vs {fine}")


if __name__ == '__main__':
    unittest.main()
