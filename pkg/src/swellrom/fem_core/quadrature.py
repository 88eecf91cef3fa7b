"""Quadrature rules shared by assembly, training and error evaluation.

One fixed pair of rules is used everywhere so that interpolated
coefficient fields and assembled operators always sample the same
points: a 6-point symmetric triangle rule exact through degree 4 and a
3-point Gauss rule on edges exact through degree 5.
"""

from dataclasses import dataclass

import numpy as np

# Degree-4 symmetric triangle rule, two orbits of three points each.
_A = 0.445948490915965
_B = 0.091576213509771
_WA = 0.223381589678011
_WB = 0.109951743655322

# 3-point Gauss-Legendre nodes mapped to [0, 1].
_T = np.sqrt(3.0 / 5.0)


@dataclass(frozen=True)
class QuadratureTable:
    """Fixed quadrature data on the reference triangle and reference edge.

    Attributes
    ----------
    tri_bary : ndarray, shape (6, 3)
        Barycentric coordinates of the triangle points.
    tri_weights : ndarray, shape (6,)
        Triangle weights, scaled to sum to the reference area 1/2, so
        an integral over a physical triangle is ``2 * area * sum(w f)``
        which equals ``det(B) * sum(w f)`` for the affine map ``B``.
    edge_points : ndarray, shape (3,)
        Arc-length parameters in (0, 1) along an edge.
    edge_weights : ndarray, shape (3,)
        Edge weights summing to one; integrals pick up the edge length.
    """

    tri_bary: np.ndarray
    tri_weights: np.ndarray
    edge_points: np.ndarray
    edge_weights: np.ndarray

    @property
    def n_tri(self):
        return self.tri_bary.shape[0]

    @property
    def n_edge(self):
        return self.edge_points.shape[0]


def default_quadrature():
    """Build the package-wide quadrature table."""
    bary = np.array(
        [
            [1.0 - 2.0 * _A, _A, _A],
            [_A, 1.0 - 2.0 * _A, _A],
            [_A, _A, 1.0 - 2.0 * _A],
            [1.0 - 2.0 * _B, _B, _B],
            [_B, 1.0 - 2.0 * _B, _B],
            [_B, _B, 1.0 - 2.0 * _B],
        ]
    )
    weights = 0.5 * np.array([_WA, _WA, _WA, _WB, _WB, _WB])
    edge_pts = np.array([0.5 * (1.0 - _T), 0.5, 0.5 * (1.0 + _T)])
    edge_w = np.array([5.0, 8.0, 5.0]) / 18.0
    return QuadratureTable(bary, weights, edge_pts, edge_w)
