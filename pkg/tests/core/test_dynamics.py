import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.core import dynamics
from src.core.dynamics import LagrangianModel
from src.core.errors import ClippedError, ConfigError, PreconditionError
from src.core.surface import Circle, SurfaceModel

PSI = "bump(y, 0.1, 0.3, 0.7, 0.9)"


class TestLagrangianModel(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.plane = SurfaceModel.hyperbolic()
        self.psi_model = LagrangianModel.build(self.torus, theta=(PSI, "0"), bounds=(0.5, 10.0))
        self.horocycle = LagrangianModel.build(self.plane, theta=("1/y", "0"), bounds=(0.5, 10.0))

    def test_unknown_symbol_is_config_error(self):
        """Expression strings may only use x, y and named parameters."""
        with self.assertRaises(ConfigError):
            LagrangianModel.build(self.torus, potential="x + z")
        model = LagrangianModel.build(self.torus, potential="a*x", parameters={"a": 2.0})
        self.assertAlmostEqual(float(model.potential_at(np.array([0.25, 0.0]))), 0.5)

    def test_energy_is_legendre_energy(self):
        """d_vL[v] - L equals 1/2|v|^2 + V for electromagnetic Lagrangians."""
        model = LagrangianModel.build(self.plane, theta=("1/y", "x"), potential="sin(x)*y")
        rng = np.random.default_rng(3)
        q = np.stack([rng.uniform(-1, 1, 20), rng.uniform(0.5, 2.0, 20)], axis=-1)
        v = rng.normal(size=(20, 2))
        assert_allclose(dynamics.legendre_energy(model, q, v), dynamics.energy(model, q, v), atol=1e-12)

    def test_field_matches_classical_euler_lagrange(self):
        """Without an extra 2-form the Lorentz form of the field equals the EL equation of L."""
        model = LagrangianModel.build(self.plane, theta=("1/y + x*y", "x**2"), potential="cos(x)/y")
        rng = np.random.default_rng(5)
        q = np.stack([rng.uniform(-1, 1, 10), rng.uniform(0.5, 2.0, 10)], axis=-1)
        v = rng.normal(size=(10, 2))
        _, accel = dynamics.el_field(model, q, v)
        _, classical = dynamics.classical_el_field(model, q, v)
        assert_allclose(accel, classical, atol=1e-10)

    def test_exact_sigma_matches_theta(self):
        """sigma = d(theta') with density f gives the same flow as adding theta' to L."""
        with_sigma = LagrangianModel.build(self.torus, sigma_density="2")
        with_theta = LagrangianModel.build(self.torus, theta=("-y", "x"))
        q = np.array([[0.2, 0.7]])
        v = np.array([[0.3, -1.1]])
        assert_allclose(dynamics.el_field(with_sigma, q, v)[1], dynamics.el_field(with_theta, q, v)[1], atol=1e-12)

    def test_min_conormal_energy(self):
        """The psi cutoff forbids conormal arrivals at y = 1/2 below energy 1/2."""
        self.assertAlmostEqual(dynamics.min_conormal_energy(self.psi_model, Circle.horizontal(0.5)), 0.5, places=9)
        self.assertEqual(dynamics.min_conormal_energy(self.psi_model, Circle.vertical(0.5)), 0.0)
        self.assertEqual(dynamics.min_conormal_energy(self.psi_model, Circle.point(0.5, 0.5)), 0.0)

    def test_theta_sup_norm(self):
        self.assertAlmostEqual(dynamics.theta_sup_norm(self.psi_model), 1.0, places=9)
        self.assertAlmostEqual(dynamics.theta_sup_norm(self.horocycle), 1.0, places=9)

    def test_validate_bounds(self):
        """The declared (a, b) must hold on samples; a too small b is reported."""
        ok, worst = dynamics.validate_bounds(self.psi_model, rng=np.random.default_rng(0))
        self.assertTrue(ok, f"psi model should satisfy its bounds, worst margin {worst}")
        tight = LagrangianModel.build(self.torus, theta=(PSI, "0"), bounds=(0.5, 0.0))
        ok, worst = dynamics.validate_bounds(tight, rng=np.random.default_rng(0))
        self.assertFalse(ok, "b = 0 cannot bound the psi model")
        self.assertLess(worst, 0.0)


class TestShoot(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.magnetic = LagrangianModel.build(self.torus, sigma_density="1", name="constant-B")

    def test_constant_field_circle(self):
        """Unit speed in a unit field traces a clockwise circle of radius 1 with period 2 pi."""
        path, cert = dynamics.shoot(self.magnetic, (0.5, 0.5), (1.0, 0.0), 2 * np.pi, 6284)
        radii = np.linalg.norm(path.nodes - np.array([0.5, -0.5]), axis=-1)
        assert_allclose(radii, 1.0, atol=1e-8)
        self.assertLess(cert.closure_residual, 1e-8, "The orbit should close after one period.")
        self.assertLess(cert.energy_drift, 1e-10)

    def test_partial_period_does_not_close(self):
        _, cert = dynamics.shoot(self.magnetic, (0.5, 0.5), (1.0, 0.0), 0.25 * np.pi, 786)
        self.assertGreater(cert.closure_residual, 0.1)

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            dynamics.shoot(self.magnetic, (0.5, 0.5), (1.0, 0.0), 0.0, 100)
        with self.assertRaises(PreconditionError):
            dynamics.shoot(self.magnetic, (0.5, 0.5), (1.0, 0.0), 1.0, 8)

    def test_leaving_the_box_clips(self):
        """A hyperbolic geodesic heading for the boundary leaves a small working box."""
        plane = SurfaceModel.hyperbolic(box=(-1.0, 1.0, 0.5, 2.0))
        free = LagrangianModel.build(plane)
        with self.assertRaises(ClippedError) as ctx:
            dynamics.shoot(free, (0.0, 1.0), (1.0, 0.0), 10.0, 1000)
        partial = ctx.exception.partial_path
        self.assertIsNotNone(partial, "The clipped trajectory should carry its computed part.")
        self.assertTrue(plane.in_box(partial.nodes))

    def test_conormal_norm(self):
        """Velocities orthogonal to a line are conormal when theta vanishes along it."""
        model = LagrangianModel.build(self.torus)
        line = Circle.horizontal(0.5)
        self.assertAlmostEqual(dynamics.conormal_norm(model, np.array([0.3, 0.5]), np.array([0.0, 2.0]), line), 0.0)
        self.assertAlmostEqual(dynamics.conormal_norm(model, np.array([0.3, 0.5]), np.array([1.0, 2.0]), line), 1.0)


if __name__ == '__main__':
    unittest.main()
