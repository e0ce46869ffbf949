"""Quadrature rules on intervals and triangles."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gauss_ref(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre(n, a=0.0, b=1.0):
    """n-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _gauss_ref(n)
    return a + (b - a) * x, (b - a) * w


@lru_cache(maxsize=None)
def triangle_rule(n):
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Returns points of shape (n*n, 2) and weights summing to 1/2. The rule is
    exact for polynomials of total degree 2n - 2.
    """
    x, w = _gauss_ref(n)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.stack([u.ravel(), (v * (1.0 - u)).ravel()], axis=1)
    wts = (wu * wv * (1.0 - u)).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def graded_gauss(n, grading=0.15, levels=4):
    """Composite Gauss rule on [0, 1] geometrically graded toward 0.

    The breakpoints are 0, grading**levels, ..., grading, 1, with n points on
    each of the levels + 1 subintervals. Suited to integrands with a
    logarithmic or x*log(x) singularity at the origin.
    """
    breaks = np.concatenate([[0.0], grading ** np.arange(levels, 0, -1), [1.0]])
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(n, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
