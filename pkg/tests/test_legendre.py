from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.legendre import leggauss

from itoseries.exceptions import ConfigurationError
from itoseries.legendre import (
    DEGREE_CAP,
    RationalPoly,
    ScaledBasisFn,
    antiderivative_from_minus1,
    integrate_over_minus1_1,
    legendre,
)

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=30)
polys = st.lists(fractions, max_size=7).map(RationalPoly)


def rodrigues(n):
    # P_n = 1/(2^n n!) d^n/dx^n (x^2 - 1)^n
    p = RationalPoly.constant(1)
    for _ in range(n):
        p = p * RationalPoly((-1, 0, 1))
    for _ in range(n):
        p = p.derivative()
    scale = Fraction(1, 2**n)
    for k in range(1, n + 1):
        scale /= k
    return p * scale


def test_low_degrees():
    assert legendre(0) == RationalPoly.constant(1)
    assert legendre(1) == RationalPoly.x()
    assert legendre(4) == RationalPoly((Fraction(3, 8), 0, Fraction(-30, 8), 0, Fraction(35, 8)))


@pytest.mark.parametrize("n", range(0, 13))
def test_matches_rodrigues(n):
    assert legendre(n) == rodrigues(n)


@pytest.mark.parametrize("n", [0, 1, 5, 17, 40, DEGREE_CAP])
def test_degree_and_endpoint(n):
    p = legendre(n)
    assert p.degree == n
    assert p(Fraction(1)) == 1


def test_degree_cap_rejected():
    with pytest.raises(ConfigurationError):
        legendre(DEGREE_CAP + 1)
    with pytest.raises(ConfigurationError):
        legendre(-1)


def test_orthogonality_exact():
    for i in range(12):
        for j in range(12):
            val = integrate_over_minus1_1(legendre(i) * legendre(j))
            assert val == (Fraction(2, 2 * i + 1) if i == j else 0)


@pytest.mark.parametrize("n", range(1, 30))
def test_bonnet_recurrence(n):
    lhs = legendre(n + 1) * (n + 1)
    rhs = RationalPoly.x() * legendre(n) * (2 * n + 1) - legendre(n - 1) * n
    assert lhs == rhs


def test_antiderivative_examples():
    assert antiderivative_from_minus1(RationalPoly.constant(1)) == RationalPoly((1, 1))
    assert antiderivative_from_minus1(RationalPoly.x()) == RationalPoly((Fraction(-1, 2), 0, Fraction(1, 2)))
    assert antiderivative_from_minus1(legendre(2)) == RationalPoly((0, Fraction(-1, 2), 0, Fraction(1, 2)))


def test_integral_examples():
    assert integrate_over_minus1_1(RationalPoly.constant(1)) == 2
    assert integrate_over_minus1_1(RationalPoly.x()) == 0
    assert integrate_over_minus1_1(RationalPoly((0, 0, 1))) == Fraction(2, 3)


@given(polys)
def test_antiderivative_inverts_derivative(p):
    q = antiderivative_from_minus1(p)
    assert q.derivative() == p
    assert q(Fraction(-1)) == 0


@given(polys, polys, polys)
def test_ring_laws(a, b, c):
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    assert a - a == RationalPoly()


@given(polys)
def test_trimmed_representation(p):
    assert not p.coeffs or p.coeffs[-1] != 0


@given(polys, fractions)
def test_float_and_exact_evaluation_agree(p, x):
    assert float(p(x)) == pytest.approx(float(p(float(x))), rel=1e-12, abs=1e-9)


@pytest.mark.parametrize("start,length", [(0.0, 1.0), (2.5, 0.1), (-1.0, 3.0)])
def test_scaled_basis_orthonormal(start, length):
    x, w = leggauss(40)
    t = start + (x + 1) * length / 2
    w = w * length / 2
    phis = [ScaledBasisFn(i, start, length)(t) for i in range(10)]
    gram = np.array([[np.sum(w * a * b) for b in phis] for a in phis])
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-12)


def test_scaled_basis_rejects_bad_step():
    with pytest.raises(ConfigurationError):
        ScaledBasisFn(1, 0.0, 0.0)


@settings(max_examples=30)
@given(st.integers(0, 20), st.integers(0, 20))
def test_orthogonality_property(i, j):
    val = integrate_over_minus1_1(legendre(i) * legendre(j))
    assert val == (Fraction(2, 2 * i + 1) if i == j else 0)
