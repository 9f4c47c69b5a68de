"""Reference-triangle shape functions and quadrature rules.

The reference triangle has vertices (0, 0), (1, 0), (0, 1).  Local node
ordering, shared by every table in the package and by VTK cell type 22::

    2
    | \\
    5   4
    |     \\
    0---3---1

Nodes 0, 1, 2 are the vertices; node 3 sits on edge (0, 1), node 4 on edge
(1, 2) and node 5 on edge (2, 0).  Degree-1 tables use nodes 0-2 only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_RULE_DEGREE = 10
DEFAULT_QUADRATURE_DEGREE = 4

REFERENCE_NODES = np.array(
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
)


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n, 2) and weights (n,) on the reference triangle."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class ShapeTable:
    """Shape function values and reference derivatives at a set of points.

    Arrays are indexed ``[point, basis]``.  ``d2xi``, ``d2xieta`` and
    ``d2eta`` hold second derivatives, which are constant per element for
    degree <= 2.
    """

    degree: int
    values: np.ndarray
    dxi: np.ndarray
    deta: np.ndarray
    d2xi: np.ndarray
    d2xieta: np.ndarray
    d2eta: np.ndarray


def _p1(xi, eta):
    one = np.ones_like(xi)
    zero = np.zeros_like(xi)
    values = np.stack([1.0 - xi - eta, xi, eta], axis=-1)
    dxi = np.stack([-one, one, zero], axis=-1)
    deta = np.stack([-one, zero, one], axis=-1)
    z = np.zeros_like(values)
    return values, dxi, deta, z, z.copy(), z.copy()


def _p2(xi, eta):
    l1 = 1.0 - xi - eta
    l2 = xi
    l3 = eta
    values = np.stack(
        [
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            l3 * (2 * l3 - 1),
            4 * l1 * l2,
            4 * l2 * l3,
            4 * l3 * l1,
        ],
        axis=-1,
    )
    zero = np.zeros_like(xi)
    dxi = np.stack(
        [1 - 4 * l1, 4 * l2 - 1, zero, 4 * (l1 - l2), 4 * l3, -4 * l3], axis=-1
    )
    deta = np.stack(
        [1 - 4 * l1, zero, 4 * l3 - 1, -4 * l2, 4 * l2, 4 * (l1 - l3)], axis=-1
    )
    one = np.ones_like(xi)
    d2xi = np.stack([4 * one, 4 * one, zero, -8 * one, zero, zero], axis=-1)
    d2eta = np.stack([4 * one, zero, 4 * one, zero, zero, -8 * one], axis=-1)
    d2xieta = np.stack([4 * one, zero, zero, -4 * one, 4 * one, -4 * one], axis=-1)
    return values, dxi, deta, d2xi, d2xieta, d2eta


def eval_shapes(degree: int, points) -> ShapeTable:
    """Evaluate the Lagrange basis of the given degree at reference points.

    ``points`` may be a single (xi, eta) pair or an (n, 2) array; the table
    always carries a leading point axis.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != 2:
        raise ValueError(f"reference points must have 2 coordinates, got {pts.shape}")
    xi, eta = pts[:, 0], pts[:, 1]
    if degree == 1:
        arrays = _p1(xi, eta)
    elif degree == 2:
        arrays = _p2(xi, eta)
    else:
        raise ValueError(f"unsupported shape function degree {degree}; use 1 or 2")
    return ShapeTable(degree, *arrays)


def _orbit_points(kind, a=None):
    if kind == "centroid":
        return [(1 / 3, 1 / 3)]
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)]


def _symmetric_rule(orbits):
    pts, wts = [], []
    for kind, a, w in orbits:
        p = _orbit_points(kind, a)
        pts.extend(p)
        wts.extend([w] * len(p))
    return np.array(pts), np.array(wts)


def _refine_six_point():
    # Two 3-point orbits; the four unknowns are fixed by the moment equations
    # of the symmetric degree-4 polynomials, solved to machine precision.
    from scipy.optimize import fsolve

    monomials = [(0, 0), (2, 0), (3, 0), (4, 0)]

    def moments(params):
        a1, w1, a2, w2 = params
        pts, wts = _symmetric_rule([("s", a1, w1), ("s", a2, w2)])
        return [
            wts @ (pts[:, 0] ** i * pts[:, 1] ** j) - exact_monomial_integral(i, j)
            for i, j in monomials
        ]

    guess = [0.445948490915965, 0.111690794839005, 0.091576213509771, 0.054975871827661]
    sol = fsolve(moments, guess, xtol=1e-13)
    return _symmetric_rule([("s", sol[0], sol[1]), ("s", sol[2], sol[3])])


def _conical_product(degree):
    # Collapsed Gauss-Jacobi product; exact to 2n-1 in each direction.
    n = (degree + 2) // 2
    x, wx = roots_jacobi(n, 0.0, 0.0)
    y, wy = roots_jacobi(n, 1.0, 0.0)
    s = (x + 1) / 2
    t = (y + 1) / 2
    xi = np.outer(t, np.ones(n))
    eta = np.outer(1 - t, s)
    w = np.outer(wy / 4, wx / 2)
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    return pts, w.ravel()


def exact_monomial_integral(a: int, b: int) -> float:
    """Integral of xi**a * eta**b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)


@lru_cache(maxsize=None)
def gauss_rule(polynomial_degree: int = DEFAULT_QUADRATURE_DEGREE) -> QuadratureRule:
    """Return a quadrature rule exact to the requested total degree."""
    d = int(polynomial_degree)
    if d < 0 or d > MAX_RULE_DEGREE:
        raise ValueError(
            f"no triangle rule for degree {polynomial_degree}; table covers 0..{MAX_RULE_DEGREE}"
        )
    if d <= 1:
        pts, wts = np.array([[1 / 3, 1 / 3]]), np.array([0.5])
    elif d == 2:
        pts, wts = _symmetric_rule([("s", 1 / 6, 1 / 6)])
    elif d <= 4:
        pts, wts = _refine_six_point()
    elif d == 5:
        r = np.sqrt(15.0)
        pts, wts = _symmetric_rule(
            [
                ("centroid", None, 9 / 80),
                ("s", (6 - r) / 21, (155 - r) / 2400),
                ("s", (6 + r) / 21, (155 + r) / 2400),
            ]
        )
    else:
        pts, wts = _conical_product(d)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(points=pts, weights=wts, degree=d)
