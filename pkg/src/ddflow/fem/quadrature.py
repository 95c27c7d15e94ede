"""Quadrature rules on the reference triangle {x >= 0, y >= 0, x + y <= 1}."""
from dataclasses import dataclass
from itertools import permutations

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates; weights sum to 1/2."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self):
        """Reference coordinates (x, y) = (lambda_1, lambda_2)."""
        return self.points[:, 1:]


def _orbit(a, b, c):
    return sorted(set(permutations((a, b, c))))


def dunavant6():
    """12-point rule, exact through degree 6."""
    pts, wts = [], []
    for (a, b), w in [((0.501426509658179, 0.249286745170910), 0.116786275726379),
                      ((0.873821971016996, 0.063089014491502), 0.050844906370207)]:
        for p in _orbit(a, b, b):
            pts.append(p)
            wts.append(w)
    for p in _orbit(0.053145049844817, 0.310352451033784, 0.636502499121399):
        pts.append(p)
        wts.append(0.082851075618374)
    pts = np.array(pts)
    pts /= pts.sum(axis=1, keepdims=True)
    return QuadratureRule(pts, 0.5 * np.array(wts), 6)


def collapsed_gauss(degree):
    """Conical-product Gauss rule exact through ``degree`` (any degree)."""
    m = degree // 2 + 1
    g, w = np.polynomial.legendre.leggauss(m)
    s = 0.5 * (g + 1.0)
    ws = 0.5 * w
    # Duffy map (s, t) -> (x, y) = (s, t (1 - s)); Jacobian (1 - s)
    # needs one extra Gauss point in s for the Jacobian factor
    gs, wsx = np.polynomial.legendre.leggauss(m + 1)
    sx = 0.5 * (gs + 1.0)
    wsx = 0.5 * wsx
    S, T = np.meshgrid(sx, s, indexing="ij")
    WS, WT = np.meshgrid(wsx, ws, indexing="ij")
    x = S.ravel()
    y = (T * (1.0 - S)).ravel()
    weights = (WS * WT * (1.0 - S)).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, weights, degree)


def rule(degree=6):
    if degree <= 6:
        r = dunavant6()
        return QuadratureRule(r.points, r.weights, degree)
    return collapsed_gauss(degree)
