"""Quadrature rules: positivity, normalization, degree-4 exactness."""

import math

import numpy as np

from swellrom.fem_core import default_quadrature


def _reference_monomial_integral(a, b):
    # exact value of x^a y^b over the unit right triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_triangle_rule_normalization():
    quad = default_quadrature()
    assert quad.tri_weights.shape == (6,)
    assert np.all(quad.tri_weights > 0.0)
    assert abs(quad.tri_weights.sum() - 0.5) < 1e-15
    assert np.allclose(quad.tri_bary.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(quad.tri_bary > 0.0)


def test_triangle_rule_degree_four_exact():
    quad = default_quadrature()
    # reference coordinates from the barycentric table
    x = quad.tri_bary[:, 1]
    y = quad.tri_bary[:, 2]
    for a in range(5):
        for b in range(5 - a):
            approx = np.sum(quad.tri_weights * x**a * y**b)
            exact = _reference_monomial_integral(a, b)
            assert abs(approx - exact) < 1e-15, (a, b)


def test_triangle_rule_quartic_cross_term():
    quad = default_quadrature()
    x = quad.tri_bary[:, 1]
    y = quad.tri_bary[:, 2]
    approx = np.sum(quad.tri_weights * x**2 * y**2)
    assert abs(approx - 1.0 / 180.0) < 1e-13


def test_edge_rule_exactness():
    quad = default_quadrature()
    assert quad.edge_weights.shape == (3,)
    assert np.all(quad.edge_weights > 0.0)
    assert abs(quad.edge_weights.sum() - 1.0) < 1e-15
    # three-point Gauss is exact through degree five
    for k in range(6):
        approx = np.sum(quad.edge_weights * quad.edge_points**k)
        assert abs(approx - 1.0 / (k + 1)) < 1e-15, k


def test_edge_points_interior():
    quad = default_quadrature()
    assert np.all(quad.edge_points > 0.0)
    assert np.all(quad.edge_points < 1.0)
