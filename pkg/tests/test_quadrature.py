import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from math import factorial

from greenlab.quadrature import gauss_legendre, triangle_rule


def _monomial_exact(a, b):
    # ∫ x^a y^b over the reference triangle {x, y ≥ 0, x + y ≤ 1}
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_weights_sum_to_one(order):
    L, w = triangle_rule(order)
    assert np.isclose(w.sum(), 1.0, atol=1e-14)
    assert np.all(w > 0)
    assert np.allclose(L.sum(axis=1), 1.0)
    assert np.all(L >= 0)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_exact_on_monomials(order):
    L, w = triangle_rule(order)
    x, y = L[:, 1], L[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            approx = 0.5 * np.sum(w * x ** a * y ** b)
            assert np.isclose(approx, _monomial_exact(a, b), rtol=1e-12, atol=1e-15)


def test_quartic_closed_form():
    L, w = triangle_rule(4)
    assert np.isclose(0.5 * np.sum(w * L[:, 1] ** 4), 1.0 / 30.0, rtol=1e-13)


def test_unknown_order():
    with pytest.raises(ValueError):
        triangle_rule(3)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), a=st.floats(-3, 3), width=st.floats(0.1, 4))
def test_gauss_legendre_polynomials(n, a, width):
    b = a + width
    x, w = gauss_legendre(n, a, b)
    for k in range(2 * n):
        exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        assert np.isclose(np.sum(w * x ** k), exact, rtol=1e-10, atol=1e-10 * max(1, abs(b) ** (k + 1)))
