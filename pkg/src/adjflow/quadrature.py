"""Gauss quadrature rules on the reference triangle (0,0)-(1,0)-(0,1).

Points are stored in barycentric coordinates, weights sum to the reference
area 1/2, so that  integral_Khat f = sum_q w_q f(p_q)  and on a physical
triangle of area A:  integral_T f = 2*A * sum_q w_q f(x(p_q)).
"""

from dataclasses import dataclass

import numpy as np

# Dunavant rule tables, normalized weights (summing to 1), barycentric points.
_RULES = {
    1: (
        [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)],
        [1.0],
    ),
    2: (
        [
            (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
            (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
            (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0),
        ],
        [1.0 / 3.0] * 3,
    ),
    4: (
        [
            (0.108103018168070, 0.445948490915965, 0.445948490915965),
            (0.445948490915965, 0.108103018168070, 0.445948490915965),
            (0.445948490915965, 0.445948490915965, 0.108103018168070),
            (0.816847572980459, 0.091576213509771, 0.091576213509771),
            (0.091576213509771, 0.816847572980459, 0.091576213509771),
            (0.091576213509771, 0.091576213509771, 0.816847572980459),
        ],
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
    5: (
        [
            (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
            (0.059715871789770, 0.470142064105115, 0.470142064105115),
            (0.470142064105115, 0.059715871789770, 0.470142064105115),
            (0.470142064105115, 0.470142064105115, 0.059715871789770),
            (0.797426985353087, 0.101286507323456, 0.101286507323456),
            (0.101286507323456, 0.797426985353087, 0.101286507323456),
            (0.101286507323456, 0.101286507323456, 0.797426985353087),
        ],
        [0.225]
        + [0.132394152788506] * 3
        + [0.125939180544827] * 3,
    ),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule on the reference triangle.

    Attributes
    ----------
    degree : int
        Every polynomial up to this total degree is integrated exactly.
    points : ndarray, shape (nq, 3)
        Barycentric coordinates of the quadrature points.
    weights : ndarray, shape (nq,)
        Weights summing to the reference-triangle area 1/2.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def xy(self) -> np.ndarray:
        """Cartesian reference coordinates (x = lambda_2, y = lambda_3)."""
        return self.points[:, 1:].copy()


def triangle_rule(degree: int) -> QuadratureRule:
    """Return a rule exact for polynomials up to ``degree`` (1, 2, 4 or 5)."""
    for avail in sorted(_RULES):
        if avail >= degree:
            pts, wts = _RULES[avail]
            points = np.array(pts, dtype=float)
            weights = 0.5 * np.array(wts, dtype=float)
            return QuadratureRule(avail, points, weights)
    raise ValueError(f"no triangle rule of degree >= {degree} available")


# Default rule used by all assembly: degree 4 integrates every viscous and
# divergence product of the P1+bubble pair exactly; convection terms involving
# three bubble factors (degree 8) are the one documented approximation.
DEFAULT_DEGREE = 4
