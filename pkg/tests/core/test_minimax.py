import os
import tempfile
import unittest
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_allclose

from src.core import minimax, paths
from src.core.dynamics import LagrangianModel
from src.core.errors import InvalidFamilyError, PreconditionError
from src.core.minimax import EuclideanSpace, MinimaxFamily, SweepRow, SweepTable
from src.core.surface import Circle, SurfaceModel

MECHANICAL_V = "cos(2*pi*x)*cos(2*pi*y)"


def double_well(p):
    return (p[0]**2 - 1)**2 + 2 * p[1]**2


def double_well_grad(p):
    return np.array([4 * p[0] * (p[0]**2 - 1), 4 * p[1]])


class TestStringMethod(unittest.TestCase):
    def test_double_well_saddle(self):
        """The climbing string finds the saddle (0, 0) of the double well at value 1."""
        line = [np.array([x, 0.3 * (1 - x * x)]) for x in np.linspace(-1, 1, 11)]
        run = minimax.string_method(EuclideanSpace(double_well, double_well_grad), line,
                                    rounds=2000, tol=1e-8, step=0.05)
        self.assertTrue(run.converged, "The climber's gradient should fall below the tolerance.")
        assert_allclose(run.members[run.climber], [0.0, 0.0], atol=1e-6)
        self.assertAlmostEqual(run.maxima[-1], 1.0, places=6)
        assert_allclose(run.members[0], [-1.0, 0.0], err_msg="End members stay fixed.")
        assert_allclose(run.members[-1], [1.0, 0.0], err_msg="End members stay fixed.")

    def test_plain_string_does_not_climb(self):
        """Without climbing the maximum only relaxes towards the minimum energy path."""
        line = [np.array([x, 0.3 * (1 - x * x)]) for x in np.linspace(-1, 1, 11)]
        run = minimax.string_method(EuclideanSpace(double_well, double_well_grad), line,
                                    rounds=50, climb=False)
        self.assertFalse(run.converged)
        self.assertGreaterEqual(run.minimax, 1.0 - 1e-9, "No member can get below the saddle value on a connecting path.")


class TestFamilies(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.mechanical = LagrangianModel.build(self.torus, potential=MECHANICAL_V, bounds=(0.5, 1.0))

    def test_family_preconditions(self):
        loop = paths.straight_loop((0.0, 0.0), (1, 0), (1.0, 1.0), 16, 1.0)
        with self.assertRaises(PreconditionError):
            MinimaxFamily([loop, loop], np.linspace(0, 1, 2))
        with self.assertRaises(PreconditionError):
            MinimaxFamily([loop, paths.resample(loop, 32), loop], np.linspace(0, 1, 3))
        with self.assertRaises(PreconditionError):
            MinimaxFamily([loop, loop, loop], np.linspace(0, 1, 3), kind="torus")

    def test_mechanical_family_shape(self):
        """The family runs from the constant path at (1/2, 0) to a negative conormal path."""
        family = minimax.mechanical_family(self.mechanical)
        self.assertEqual(len(family.members), 17)
        self.assertEqual(family.k_floor, -1.0)
        assert_allclose(family.members[0].nodes, 0.5 * np.array([[1.0, 0.0]]).repeat(65, axis=0))
        end = family.members[-1]
        self.assertAlmostEqual(Circle.horizontal(0.0).distance(end.nodes[0], self.torus), 0.0)
        self.assertAlmostEqual(Circle.vertical(0.5).distance(end.nodes[-1], self.torus), 0.0)
        self.assertLess(paths.action(self.mechanical, end, 0.5), 0.0)

    def test_validate_family(self):
        family = minimax.mechanical_family(self.mechanical)
        with self.assertRaises(InvalidFamilyError):
            minimax.validate_family(self.mechanical, family, -1.0, np.array([0.0, 1.0, -1.0]))
        with self.assertRaises(InvalidFamilyError):
            minimax.validate_family(self.mechanical, family, 0.5, np.array([0.0, -1.0, -2.0]))
        with self.assertRaises(InvalidFamilyError):
            minimax.validate_family(self.mechanical, family, 0.5, np.array([0.0, 1.0, 0.5]))
        minimax.validate_family(self.mechanical, family, 0.5, np.array([0.0, 1.0, -1.0]))

    def test_sphere_family_needs_sphere(self):
        with self.assertRaises(InvalidFamilyError):
            minimax.sphere_latitude_family(self.mechanical, 0.5)

    def test_sphere_family_values_are_continuous(self):
        """The north-pole end member continues the latitude values (capped through the south pole)."""
        sphere = SurfaceModel.round_sphere()
        model = LagrangianModel.build(sphere, sigma_density="1")
        family = minimax.sphere_latitude_family(model, 0.5, members=33)
        space = minimax.PathSpace(model, 0.5, minimax.FlowConfig(), "capped", "sphere")
        values = space.values(family.members)
        self.assertAlmostEqual(values[0], 0.5 * 0.05, places=9)
        self.assertAlmostEqual(values[-1], 0.5 * 0.05 - 4 * np.pi, places=9)
        self.assertLess(np.max(np.abs(np.diff(values))), 2.0, "Neighbouring members should have close values.")

    def test_alpha_bound(self):
        """Near a minimum of V the bound is 2 sqrt(a (k - min V)) eps."""
        q0, q1 = Circle.horizontal(0.0), Circle.vertical(0.5)
        eps = 1e-3
        expected = 2 * np.sqrt(0.5 * 1.5) * eps
        self.assertAlmostEqual(minimax.alpha_bound(self.mechanical, q0, q1, 0.5, eps) / expected, 1.0, places=3)
        self.assertEqual(minimax.alpha_bound(self.mechanical, q0, q1, -1.5, eps), -np.inf)
        with self.assertRaises(PreconditionError):
            minimax.alpha_bound(self.mechanical, Circle.horizontal(0.0), Circle.horizontal(0.5), 0.5, eps)

    def test_minimax_value_is_the_history_minimum(self):
        """c is the smallest per-round maximum, whatever polishing does to the candidate."""
        history = []
        c, report = minimax.mountain_pass(self.mechanical, minimax.mechanical_family(self.mechanical), 0.5,
                                          rounds=3, with_index=False, history=history)
        self.assertEqual(len(history), 4)
        self.assertEqual(c, min(history))
        self.assertIsNotNone(report.path)


class TestSweep(unittest.TestCase):
    def test_sweep_table_diagnostics(self):
        rows = [SweepRow(0.1, 0.1, 1.0, "orbit"), SweepRow(0.2, 0.3, 1.0, "orbit"),
                SweepRow(0.3, 0.2, 1.0, "orbit"), SweepRow(0.4, None, None, "invalid-family")]
        table = SweepTable(rows)
        self.assertAlmostEqual(table.max_violation, 0.1)
        self.assertFalse(table.monotone())
        slopes = table.slopes()
        self.assertEqual(len(slopes), 2)
        self.assertAlmostEqual(slopes[0][0], 0.15)
        self.assertAlmostEqual(slopes[0][1], 2.0)
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "sweep.csv")
            table.to_csv(filename)
            with open(filename) as fh:
                lines = fh.read().splitlines()
        self.assertEqual(lines[0], "k,c,T,alpha,status")
        self.assertEqual(lines[-1], "0.4,,,,invalid-family")

    def test_grid_must_increase(self):
        model = LagrangianModel.build(SurfaceModel.flat_torus(), potential=MECHANICAL_V, bounds=(0.5, 1.0))
        with self.assertRaises(PreconditionError):
            minimax.minimax_sweep(model, lambda k: minimax.mechanical_family(model), [0.5, 0.5])

    def test_invalid_family_rows(self):
        """Levels at or below k_Q are reported, not raised."""
        model = LagrangianModel.build(SurfaceModel.flat_torus(), potential=MECHANICAL_V, bounds=(0.5, 1.0))
        table = minimax.minimax_sweep(model, lambda k: minimax.mechanical_family(model), [-1.5, -1.2])
        self.assertEqual([r.status for r in table.rows], ["invalid-family", "invalid-family"])
        self.assertTrue(table.monotone())

    def test_alpha_column_flags_low_minimax(self):
        """A minimax value at or below alpha(k) is reported, and alpha lands in the table."""
        model = LagrangianModel.build(SurfaceModel.flat_torus(), potential=MECHANICAL_V, bounds=(0.5, 1.0))
        candidate = SimpleNamespace(status="orbit", path=SimpleNamespace(T=1.0))
        alpha = minimax.family_alpha(model, minimax.mechanical_family(model), 0.5)
        self.assertAlmostEqual(alpha, minimax.alpha_bound(model, Circle.horizontal(0.0), Circle.vertical(0.5),
                                                          0.5, minimax.ALPHA_EPS))
        with patch.object(minimax, "mountain_pass", return_value=(0.5 * alpha, candidate)):
            low = minimax.minimax_sweep(model, lambda k: minimax.mechanical_family(model), [0.5])
        with patch.object(minimax, "mountain_pass", return_value=(0.3, candidate)):
            high = minimax.minimax_sweep(model, lambda k: minimax.mechanical_family(model), [0.5])
        self.assertEqual(low.rows[0].status, "below-alpha")
        self.assertEqual(high.rows[0].status, "orbit")
        self.assertAlmostEqual(high.rows[0].alpha, alpha)

    def test_sphere_family_has_no_alpha(self):
        model = LagrangianModel.build(SurfaceModel.round_sphere(), sigma_density="1")
        self.assertIsNone(minimax.family_alpha(model, minimax.sphere_latitude_family(model, 0.5), 0.5))


@unittest.skipUnless(os.getenv("RUN_SLOW"), "set RUN_SLOW=1 to run the mountain-pass searches")
class TestMountainPassSlow(unittest.TestCase):
    def test_sphere_latitude_mountain_pass(self):
        """At k = 1/2 the top latitude sits at angle pi/4 with value 2 pi (sqrt 2 - 1)."""
        sphere = SurfaceModel.round_sphere()
        model = LagrangianModel.build(sphere, sigma_density="1")
        c, report = minimax.mountain_pass(model, minimax.sphere_latitude_family(model, 0.5), 0.5, rounds=200)
        self.assertAlmostEqual(c, 2 * np.pi * (np.sqrt(2) - 1), delta=0.05)
        self.assertAlmostEqual(report.path.T, 2 * np.pi * np.sin(np.pi / 4), delta=0.05)
        self.assertEqual(report.status, "orbit", f"Candidate report: {report.to_dict()}")
        self.assertLess(report.grad_norm, 1e-6)

    def test_mechanical_sweep(self):
        """On (k_Q, c) the minimax values increase, stay above alpha(k), and grow at the rate of the orbit period."""
        model = LagrangianModel.build(SurfaceModel.flat_torus(), potential=MECHANICAL_V, bounds=(0.5, 1.0))
        table = minimax.minimax_sweep(model, lambda k: minimax.mechanical_family(model), np.linspace(-0.7, 0.7, 8),
                                      rounds=150)
        self.assertTrue(all(r.c is not None and r.c > 0 for r in table.rows), f"Sweep rows: {table.rows}")
        self.assertTrue(table.monotone(), f"c(k) should not decrease, rows: {table.rows}")
        self.assertNotIn("below-alpha", [r.status for r in table.rows])
        for (k_mid, slope), a, b in zip(table.slopes(), table.rows[:-1], table.rows[1:]):
            period = 0.5 * (a.T + b.T)
            self.assertAlmostEqual(slope / period, 1.0, delta=0.2, msg=f"slope {slope:.4g} at k={k_mid:.3g} vs T {period:.4g}")

    def test_mechanical_candidate_is_a_saddle(self):
        model = LagrangianModel.build(SurfaceModel.flat_torus(), potential=MECHANICAL_V, bounds=(0.5, 1.0))
        c, report = minimax.mountain_pass(model, minimax.mechanical_family(model), 0.3, rounds=150)
        self.assertGreater(c, 0.0)
        self.assertIsNotNone(report.index, f"Candidate report: {report.to_dict()}")
        self.assertGreaterEqual(report.index, 1, "A mountain-pass critical point is not a local minimum.")


if __name__ == '__main__':
    unittest.main()
