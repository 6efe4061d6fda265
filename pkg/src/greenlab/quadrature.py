"""Reference quadrature rules (triangle and 1D Gauss-Legendre).

Triangle rules are symmetric Dunavant rules with positive weights,
expressed in barycentric coordinates; weights sum to one, so the integral
over a physical triangle is ``area * sum(w * f)``.
"""
from functools import lru_cache

import numpy as np


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _build(orbits):
    pts, wts = [], []
    for p, w in orbits:
        pts += p
        wts += w
    return np.array(pts), np.array(wts)


_RULES = {
    2: _build([_orbit3(1.0 / 6.0, 1.0 / 3.0)]),
    4: _build([
        _orbit3(0.44594849091596488632, 0.22338158967801146570),
        _orbit3(0.09157621350977074346, 0.10995174365532186764),
    ]),
    6: _build([
        _orbit3(0.24928674517091042129, 0.11678627572637936603),
        _orbit3(0.06308901449150222834, 0.05084490637020681692),
        _orbit6(0.05314504984481694735, 0.31035245103378440542,
                0.08285107561837357519),
    ]),
}


def triangle_rule(order):
    """Barycentric points ``(n, 3)`` and weights ``(n,)`` exact to ``order``."""
    try:
        return _RULES[order]
    except KeyError:
        raise ValueError(f"triangle quadrature order must be one of {sorted(_RULES)}, got {order}")


@lru_cache(maxsize=None)
def gauss_legendre(n, a=-1.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w
