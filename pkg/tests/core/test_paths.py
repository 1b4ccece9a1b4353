import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.core import paths
from src.core.dynamics import LagrangianModel
from src.core.errors import PreconditionError
from src.core.paths import BoundarySpec, DiscretePath
from src.core.surface import Circle, HomotopyClass, SurfaceModel, homotopy_class

PSI = "bump(y, 0.1, 0.3, 0.7, 0.9)"


def _finite_difference_gradient(value, path, h=1e-6):
    """Central differences of value(path) in every node coordinate and in T."""
    grad = np.zeros_like(path.nodes)
    for i in range(len(path.nodes)):
        for c in range(2):
            up = path.nodes.copy()
            down = path.nodes.copy()
            up[i, c] += h
            down[i, c] -= h
            grad[i, c] = (value(path.with_nodes(up)) - value(path.with_nodes(down))) / (2 * h)
    d_t = (value(path.with_T(path.T + h)) - value(path.with_T(path.T - h))) / (2 * h)
    return grad, d_t


class TestDiscretePath(unittest.TestCase):
    def test_invalid_paths(self):
        """A path needs three finite nodes and a positive duration."""
        with self.assertRaises(PreconditionError):
            DiscretePath(np.zeros((2, 2)), 1.0)
        with self.assertRaises(PreconditionError):
            DiscretePath(np.zeros((5, 2)), 0.0)
        with self.assertRaises(PreconditionError):
            DiscretePath(np.full((5, 2), np.nan), 1.0)

    def test_conormal_boundary_needs_both_ends(self):
        with self.assertRaises(PreconditionError):
            BoundarySpec("conormal", Circle.point(0.0, 0.0), None)
        spec = BoundarySpec.conormal(Circle.horizontal(0.0), Circle.vertical(0.5), surface=SurfaceModel.flat_torus())
        self.assertEqual(spec.subgroup, ((1, 0), (0, 1)))

    def test_resample(self):
        """Resampling keeps the endpoints and refuses fewer than 8 segments."""
        loop = paths.straight_loop((0.1, 0.2), (1, 0), (1.0, 1.0), 16, 2.0)
        finer = paths.resample(loop, 40)
        self.assertEqual(finer.n_segments, 40)
        assert_allclose(finer.nodes[[0, -1]], loop.nodes[[0, -1]])
        self.assertEqual(finer.T, loop.T)
        with self.assertRaises(PreconditionError):
            paths.resample(loop, 4)

    def test_length_and_kinetic(self):
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.0)
        self.assertAlmostEqual(paths.length(loop), 1.0, places=12)
        self.assertAlmostEqual(paths.kinetic(loop), 1.0, places=12)
        plane = SurfaceModel.hyperbolic()
        circle = paths.hyperbolic_circle(1.0, 512)
        self.assertAlmostEqual(paths.length(circle, plane) / (2 * np.pi * np.sinh(1.0)), 1.0, places=4)

    def test_homotopy_class_of_loops(self):
        torus = SurfaceModel.flat_torus()
        loop = paths.straight_loop((0.3, 0.3), (1, -1), (1.0, 1.0), 64, 1.0)
        self.assertEqual(homotopy_class(torus, loop), HomotopyClass((1, -1)))
        small = paths.circle_loop((0.5, 0.5), 0.1, 64, 1.0)
        self.assertTrue(homotopy_class(torus, small).is_trivial)

    def test_csv_round_trip_keeps_boundary(self):
        """A conormal path written to CSV reads back with its boundary, T and k."""
        boundary = BoundarySpec.conormal(Circle.point(0.5, 0.5), Circle.horizontal(0.5),
                                         surface=SurfaceModel.flat_torus())
        nodes = np.stack([np.linspace(0.5, -0.5, 17), np.full(17, 0.5)], axis=-1)
        path = DiscretePath(nodes, 1.25, boundary)
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "path.csv")
            paths.write_path_csv(path, filename, k=0.3)
            loaded, k = paths.read_path_csv(filename)
        self.assertEqual(k, 0.3)
        self.assertEqual(loaded.T, 1.25)
        self.assertEqual(loaded.boundary, boundary)
        assert_allclose(loaded.nodes, nodes)


class TestAction(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.plane = SurfaceModel.hyperbolic()

    def test_hyperbolic_circle_closed_form(self):
        """A_k of a unit-speed clockwise circle of radius r with d theta = area form."""
        model = LagrangianModel.build(self.plane, theta=("1/y", "0"), bounds=(0.5, 10.0))
        r, k = 1.0, 0.25
        loop = paths.hyperbolic_circle(r, 512)
        exact = (0.5 + k) * 2 * np.pi * np.sinh(r) - 2 * np.pi * (np.cosh(r) - 1)
        self.assertLess(abs(paths.action(model, loop, k) - exact) / abs(exact), 1e-3)

    def test_psi_loop_action(self):
        """The loop y = 1/2 traversed backwards at unit speed has A_k = k - 1/2."""
        model = LagrangianModel.build(self.torus, theta=(PSI, "0"), bounds=(0.5, 10.0))
        loop = paths.straight_loop((0.0, 0.5), (-1, 0), (1.0, 1.0), 64, 1.0)
        for k in (0.0, 0.3, 0.5):
            self.assertAlmostEqual(paths.action(model, loop, k), k - 0.5, places=9)

    def test_action_is_affine_in_k(self):
        model = LagrangianModel.build(self.torus, potential="cos(2*pi*x)*cos(2*pi*y)")
        loop = paths.circle_loop((0.4, 0.6), 0.2, 64, 1.7)
        a0 = paths.action(model, loop, 0.0)
        self.assertAlmostEqual(paths.action(model, loop, 1.0) - a0, loop.T, places=12)

    def test_eta_is_the_exact_gradient(self):
        """eta_k agrees with central differences of the discrete action."""
        model = LagrangianModel.build(self.plane, theta=("1/y + x", "x*y"), potential="sin(x)/y")
        rng = np.random.default_rng(7)
        loop = paths.hyperbolic_circle(0.8, 24, T=3.0)
        loop = loop.with_nodes(loop.nodes + 0.01 * rng.normal(size=loop.nodes.shape))
        k = 0.4
        eta = paths.eta_k(model, loop, k)
        numeric, d_t = _finite_difference_gradient(lambda p: paths.action(model, p, k), loop)
        scale = np.max(np.abs(numeric))
        self.assertLess(np.max(np.abs(eta.nodes - numeric)) / scale, 1e-5)
        self.assertAlmostEqual(eta.dT, d_t, places=6)

    def test_sigma_pairing_is_gradient_of_capped_action(self):
        """For a constant 2-form, eta_k is the gradient of A_k plus the enclosed flux."""
        model = LagrangianModel.build(self.torus, sigma_density="1")
        rng = np.random.default_rng(11)
        loop = paths.circle_loop((0.5, 0.5), 0.2, 32, 1.3)
        nodes = loop.nodes + 0.01 * rng.normal(size=loop.nodes.shape)
        nodes[-1] = nodes[0]
        loop = loop.with_nodes(nodes)
        k = 0.5
        eta = paths.eta_k(model, loop, k)
        numeric, d_t = _finite_difference_gradient(lambda p: paths.capped_action(model, p, k), loop)
        assert_allclose(eta.nodes, numeric, atol=1e-7)
        self.assertAlmostEqual(eta.dT, d_t, places=6)

    def test_capping_flux_is_signed_area(self):
        """With density 1 the capping integral is the area enclosed, signed by orientation."""
        model = LagrangianModel.build(self.torus, sigma_density="1")
        r = 0.2
        ccw = paths.circle_loop((0.3, 0.6), r, 512, 1.0, clockwise=False)
        cw = paths.circle_loop((0.3, 0.6), r, 512, 1.0, clockwise=True)
        self.assertAlmostEqual(paths.capping_integral(model, ccw) / (np.pi * r**2), 1.0, places=4)
        self.assertAlmostEqual(paths.capping_integral(model, cw) / (np.pi * r**2), -1.0, places=4)

    def test_capped_action_needs_contractible_loop(self):
        model = LagrangianModel.build(self.torus, sigma_density="1")
        loop = paths.straight_loop((0.0, 0.5), (1, 0), (1.0, 1.0), 32, 1.0)
        with self.assertRaises(PreconditionError):
            paths.capped_action(model, loop, 0.5)

    def test_sphere_capping_is_chart_independent(self):
        """The south-pole capping gives the same value in either chart."""
        sphere = SurfaceModel.round_sphere()
        model = LagrangianModel.build(sphere, sigma_density="1")
        loop = paths.latitude_loop(sphere, 1.2, 512, 2.0)
        in_chart_0 = paths.capped_action(model, loop, 0.5)
        in_chart_1 = paths.capped_action(model, loop.in_chart(sphere, 1), 0.5)
        self.assertAlmostEqual(in_chart_0, in_chart_1, places=3)
        flux = in_chart_0 - paths.action(model, loop, 0.5)
        self.assertAlmostEqual(flux / (-2 * np.pi * (1 - np.cos(1.2))), 1.0, places=3)

    def test_resample_across_charts(self):
        """Nodes stored in the other chart are moved back before interpolating."""
        sphere = SurfaceModel.round_sphere()
        loop = paths.latitude_loop(sphere, 1.2, 32, 2.0)
        nodes, charts = loop.nodes.copy(), loop.charts.copy()
        nodes[8:20] = sphere.change_chart(nodes[8:20])
        charts[8:20] = 1
        mixed = DiscretePath(nodes, loop.T, loop.boundary, charts)
        with self.assertRaises(PreconditionError):
            paths.resample(mixed, 64)
        finer = paths.resample(mixed, 64, sphere)
        assert_allclose(finer.nodes, paths.resample(loop, 64).nodes, atol=1e-12)
        self.assertTrue(np.all(finer.charts == 0))

    def test_s_k_local_preconditions(self):
        model = LagrangianModel.build(self.torus, sigma_density="1")
        big = paths.circle_loop((0.5, 0.5), 0.3, 32, 1.0)
        with self.assertRaises(PreconditionError):
            paths.s_k_local(model, big, 0.5)
        tiny = paths.circle_loop((0.5, 0.5), 1e-3, 32, 1.0)
        self.assertAlmostEqual(paths.s_k_local(model, tiny, 0.5), paths.capped_action(model, tiny, 0.5), places=12)


class TestGradient(unittest.TestCase):
    def test_straight_geodesic_is_critical_at_matching_period(self):
        """On the flat torus the class-(1,0) geodesic is critical at T = 1/sqrt(2k)."""
        model = LagrangianModel.build(SurfaceModel.flat_torus())
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 32, 1.0)
        self.assertLess(paths.gradient_data(model, loop, 0.5).norm, 1e-10)
        self.assertGreater(paths.gradient_data(model, loop.with_T(2.0), 0.5).norm, 1e-2)

    def test_unknown_metric(self):
        model = LagrangianModel.build(SurfaceModel.flat_torus())
        loop = paths.straight_loop((0.0, 0.25), (1, 0), (1.0, 1.0), 16, 1.0)
        coords = paths.PathCoordinates(loop, model.surface)
        with self.assertRaises(PreconditionError):
            paths.gram_matrix(model, loop, coords, coords.pack(loop), metric="W2")

    def test_conormal_coordinates_round_trip(self):
        """Packing and unpacking keep endpoints on their submanifolds."""
        torus = SurfaceModel.flat_torus()
        boundary = BoundarySpec.conormal(Circle.horizontal(0.0), Circle.vertical(0.5), surface=torus)
        nodes = np.stack([np.linspace(0.2, 0.5, 17), np.linspace(0.0, 0.3, 17)], axis=-1)
        path = DiscretePath(nodes, 0.8, boundary)
        coords = paths.PathCoordinates(path, torus)
        z = coords.pack(path)
        self.assertEqual(coords.size, len(z))
        assert_allclose(coords.unpack(z).nodes, nodes, atol=1e-12)
        moved = coords.unpack(z + 0.01)
        self.assertAlmostEqual(Circle.horizontal(0.0).distance(moved.nodes[0], torus), 0.0)
        self.assertAlmostEqual(Circle.vertical(0.5).distance(moved.nodes[-1], torus), 0.0)


if __name__ == '__main__':
    unittest.main()
