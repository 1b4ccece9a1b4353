import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.core import surface as sf
from src.core.errors import DomainError, ResolutionError, UnsupportedError
from src.core.surface import Circle, HomotopyClass, SurfaceModel


class TestSurfaceModel(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()
        self.plane = SurfaceModel.hyperbolic()
        self.sphere = SurfaceModel.round_sphere()

    def test_metric_values(self):
        """Conformal factors of the three model metrics at known points."""
        assert_allclose(sf.metric_at(self.torus, (0.3, 0.7)), np.eye(2))
        assert_allclose(sf.metric_at(self.plane, (0.0, 2.0)), 0.25 * np.eye(2))
        assert_allclose(sf.metric_at(self.sphere, (0.0, 0.0)), 4.0 * np.eye(2))

    def test_invalid_parameters_rejected(self):
        """Degenerate surfaces raise DomainError at construction."""
        with self.assertRaises(DomainError):
            SurfaceModel.flat_torus(0.0, 1.0)
        with self.assertRaises(DomainError):
            SurfaceModel.hyperbolic(box=(-1.0, 1.0, 0.0, 2.0))
        with self.assertRaises(DomainError):
            SurfaceModel.round_sphere(chart_switch=1.0)

    def test_hyperbolic_point_below_axis(self):
        """Points with y <= 0 are not in the half-plane chart."""
        with self.assertRaises(DomainError):
            self.plane.conformal(np.array([[0.0, -1.0]]))

    def test_christoffel_hyperbolic(self):
        """Γ^x_xy = -1/y and Γ^y_xx = 1/y on the half-plane."""
        gamma = sf.christoffel_at(self.plane, (0.3, 2.0))
        self.assertAlmostEqual(gamma[0, 0, 1], -0.5, places=12)
        self.assertAlmostEqual(gamma[1, 0, 0], 0.5, places=12)
        self.assertAlmostEqual(gamma[1, 1, 1], -0.5, places=12)

    def test_geodesic_acceleration_matches_christoffel(self):
        """The vectorised acceleration is -Γ^i_jk v^j v^k."""
        q = np.array([0.4, 1.3])
        v = np.array([0.7, -0.2])
        for surface in (self.plane, self.sphere):
            gamma = sf.christoffel_at(surface, q)
            expected = -np.einsum("ijk,j,k->i", gamma, v, v)
            assert_allclose(sf.geodesic_acceleration(surface, q[None, :], v[None, :])[0], expected, atol=1e-12)

    def test_wrap_and_lift(self):
        """wrap gives the canonical representative; lift undoes wrapping of a fine path."""
        assert_allclose(sf.wrap(self.torus, (1.3, -0.2)), [0.3, 0.8], atol=1e-12)
        s = np.linspace(0.0, 1.0, 41)[:, None]
        lifted = np.array([0.1, 0.2]) + s * np.array([2.0, -1.0])
        assert_allclose(sf.lift(self.torus, sf.wrap(self.torus, lifted)), lifted, atol=1e-9)

    def test_lift_ambiguous_gap(self):
        """A gap of half a period cannot be lifted."""
        nodes = np.array([[0.0, 0.0], [0.5, 0.0], [0.6, 0.0]])
        with self.assertRaises(ResolutionError):
            sf.lift(self.torus, nodes)

    def test_wrap_only_on_torus(self):
        with self.assertRaises(UnsupportedError):
            sf.wrap(self.plane, (0.0, 1.0))

    def test_sphere_chart_change_is_consistent(self):
        """A point and its image under the chart change embed to the same point of S^2."""
        q = np.array([[0.3, -0.8], [1.2, 0.4]])
        moved = self.sphere.change_chart(q)
        assert_allclose(self.sphere.change_chart(moved), q, atol=1e-12)
        assert_allclose(self.sphere.to_ambient(q, np.zeros(2, dtype=int)),
                        self.sphere.to_ambient(moved, np.ones(2, dtype=int)), atol=1e-12)
        back, charts = self.sphere.from_ambient(self.sphere.to_ambient(q), chart=0)
        assert_allclose(back, q, atol=1e-12)
        self.assertTrue(np.all(charts == 0))

    def test_sphere_chart_origins_are_poles(self):
        """Chart 0 is centred at the south pole, chart 1 at the north pole."""
        origin = np.zeros((1, 2))
        assert_allclose(self.sphere.to_ambient(origin, [0])[0], [0.0, 0.0, -1.0], atol=1e-12)
        assert_allclose(self.sphere.to_ambient(origin, [1])[0], [0.0, 0.0, 1.0], atol=1e-12)

    def test_chart_change_pushes_tangent_vectors(self):
        """The pushed velocity is the derivative of the transition along a curve."""
        q = np.array([0.6, 0.3])
        v = np.array([0.2, -0.5])
        h = 1e-6
        _, pushed = self.sphere.change_chart(q, v)
        numeric = (self.sphere.change_chart(q + h * v) - self.sphere.change_chart(q - h * v)) / (2 * h)
        assert_allclose(pushed, numeric, atol=1e-7)


class TestHomotopyAndCircles(unittest.TestCase):
    def setUp(self):
        self.torus = SurfaceModel.flat_torus()

    def test_reduced_modulo_subgroup(self):
        """Winding pairs are reduced modulo the lattice classes of the endpoints."""
        self.assertEqual(HomotopyClass((3, 2)).reduced([(1, 0)]), HomotopyClass((0, 2)))
        self.assertEqual(HomotopyClass((3, 2)).reduced([(1, 0), (0, 1)]), HomotopyClass((0, 0)))
        self.assertTrue(HomotopyClass((3, 2)).reduced([(1, 0), (0, 1)]).is_trivial)
        self.assertEqual(HomotopyClass((1, 0)) + HomotopyClass((0, -1)), HomotopyClass((1, -1)))

    def test_circle_distance_on_torus(self):
        """Distances are measured to the nearest lattice copy."""
        line = Circle.horizontal(0.5)
        self.assertAlmostEqual(line.distance((0.2, 1.4), self.torus), 0.1, places=12)
        point = Circle.point(0.5, 0.5)
        self.assertAlmostEqual(point.distance((-0.4, 0.5), self.torus), 0.1, places=12)

    def test_circle_homology(self):
        self.assertEqual(Circle.horizontal(0.0).homology(self.torus), [(1, 0)])
        self.assertEqual(Circle.vertical(0.5).homology(self.torus), [(0, 1)])
        self.assertEqual(Circle.point(0.5, 0.5).homology(self.torus), [])

    def test_intersections(self):
        """Line, point and round-circle intersections."""
        assert_allclose(sf.intersect(self.torus, Circle.horizontal(0.0), Circle.vertical(0.5)), [[0.5, 0.0]])
        assert_allclose(sf.intersect(self.torus, Circle.point(0.5, 0.5), Circle.horizontal(0.5)), [[0.5, 0.5]])
        self.assertEqual(len(sf.intersect(self.torus, Circle.point(0.5, 0.5), Circle.horizontal(0.2))), 0,
                         "A point off the line has no intersection.")
        plane = SurfaceModel.hyperbolic()
        crossing = sf.intersect(plane, Circle.round(0.0, 1.0, 0.5), Circle.horizontal(1.0))
        self.assertGreater(len(crossing), 0, "A round circle meets a line through its centre.")
        assert_allclose(np.abs(crossing[:, 0]), 0.5, atol=1e-2)


if __name__ == '__main__':
    unittest.main()
