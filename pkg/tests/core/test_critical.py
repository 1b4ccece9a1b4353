import unittest

import numpy as np

from src.core import critical, paths
from src.core.descent import FlowConfig
from src.core.dynamics import LagrangianModel
from src.core.errors import PreconditionError
from src.core.paths import BoundarySpec, DiscretePath
from src.core.surface import Circle, HomotopyClass, SurfaceModel

PSI = "bump(y, 0.1, 0.3, 0.7, 0.9)"


class TestMinimize(unittest.TestCase):
    def setUp(self):
        self.flat = LagrangianModel.build(SurfaceModel.flat_torus())

    def test_flat_torus_minimizer(self):
        """The class-(1,0) minimizer at k = 1/2 is a unit-speed geodesic with action 1 and index 0."""
        start = paths.straight_loop((0.0, 0.0), (1, 0), (1.0, 1.0), 32, 2.0)
        wobble = start.nodes.copy()
        wobble[1:-1, 1] += 0.05 * np.sin(2 * np.pi * np.linspace(0, 1, 33)[1:-1])
        report = critical.minimize(self.flat, start.with_nodes(wobble), 0.5, with_index=True)
        self.assertEqual(report.status, "orbit", f"Unexpected report: {report.to_dict()}")
        self.assertTrue(report.is_orbit)
        self.assertAlmostEqual(report.value, 1.0, delta=1e-4)
        self.assertAlmostEqual(report.path.T, 1.0, delta=1e-4)
        self.assertEqual(report.homotopy, HomotopyClass((1, 0)))
        self.assertEqual(report.index, 0)
        self.assertAlmostEqual(report.return_time, 1.0, delta=1e-3)

    def test_report_dict(self):
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.0)
        data = critical.assess(self.flat, loop, 0.5).to_dict()
        for key in ("k", "value", "grad_norm", "T", "closure_residual", "energy_drift", "conormal_residual",
                    "index", "winding", "status"):
            self.assertIn(key, data)
        self.assertEqual(data["winding"], [1, 0])
        self.assertEqual(data["status"], "orbit")

    def test_wrong_period_is_not_certified(self):
        """A geodesic run at the wrong speed is not critical and does not close at time T."""
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.5)
        report = critical.assess(self.flat, loop, 0.5)
        self.assertEqual(report.status, "not-certified")
        self.assertGreater(report.certificate.closure_residual, 0.1)

    def test_class_change_is_reported(self):
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.0)
        report = critical.assess(self.flat, loop, 0.5, start_class=HomotopyClass((0, 1)))
        self.assertEqual(report.status, "class-changed")

    def test_polish_reaches_critical_point(self):
        """Gauss-Newton on eta_k = 0 fixes a slightly wrong period."""
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.05)
        polished = critical.polish(self.flat, loop, 0.5)
        self.assertLess(paths.gradient_data(self.flat, polished, 0.5).norm, 1e-8)
        self.assertAlmostEqual(polished.T, 1.0, places=6)

    def test_hessian_index_needs_critical_path(self):
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 16, 2.0)
        with self.assertRaises(PreconditionError):
            critical.hessian_index(self.flat, loop, 0.5)


class TestCertify(unittest.TestCase):
    def test_constant_field_circle_certifies(self):
        """The radius-1 circle at k = 1/2 in a unit field closes after 2 pi."""
        model = LagrangianModel.build(SurfaceModel.flat_torus(), sigma_density="1")
        loop = paths.circle_loop((0.5, 0.5), 1.0, 256, 2 * np.pi)
        certificate, return_time = critical.certify(model, loop, 0.5)
        self.assertIsNotNone(certificate)
        self.assertTrue(certificate.passes(critical.CLOSURE_TOL, critical.DRIFT_TOL, critical.CONORMAL_TOL),
                        f"Certificate should pass: {certificate}")
        self.assertAlmostEqual(return_time, 2 * np.pi, delta=1e-3)

    def test_conormal_infeasible_below_obstruction(self):
        """Conormal arrivals at y = 1/2 need energy at least 1/2 in the psi model."""
        torus = SurfaceModel.flat_torus()
        model = LagrangianModel.build(torus, theta=(PSI, "0"), bounds=(0.5, 10.0))
        boundary = BoundarySpec.conormal(Circle.point(0.5, 0.5), Circle.horizontal(0.5), surface=torus)
        nodes = np.stack([np.full(17, 0.5), np.linspace(0.5, 1.5, 17)], axis=-1)
        path = DiscretePath(nodes, 1.0, boundary)
        self.assertTrue(critical.conormal_infeasible(model, path, 0.3))
        self.assertFalse(critical.conormal_infeasible(model, path, 0.6))
        loop = paths.straight_loop((0.0, 0.5), (1, 0), (1.0, 1.0), 16, 1.0)
        self.assertFalse(critical.conormal_infeasible(model, loop, 0.0), "Loops have no conormal obstruction.")
        self.assertEqual(critical.assess(model, path, 0.3).status, "infeasible")


if __name__ == '__main__':
    unittest.main()
