"""Exact-rational Legendre polynomials and the orthonormal basis on a step.

Everything here is exact (``fractions.Fraction``); floats appear only in
:class:`ScaledBasisFn`, which evaluates the orthonormal basis numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .exceptions import ConfigurationError

#: Largest polynomial degree the library will construct.
DEGREE_CAP = 64


def _trim(coeffs: Iterable) -> tuple[Fraction, ...]:
    out = [Fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class RationalPoly:
    """Univariate polynomial with exact rational coefficients.

    ``coeffs[i]`` is the coefficient of ``x**i``.  The zero polynomial has an
    empty coefficient tuple.
    """

    coeffs: tuple[Fraction, ...]

    def __init__(self, coeffs: Iterable = ()):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @classmethod
    def constant(cls, c) -> RationalPoly:
        return cls((c,))

    @classmethod
    def x(cls) -> RationalPoly:
        return cls((0, 1))

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __add__(self, other) -> RationalPoly:
        other = _as_poly(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        return RationalPoly(a[i] + b[i] if i < len(b) else a[i] for i in range(len(a)))

    __radd__ = __add__

    def __neg__(self) -> RationalPoly:
        return RationalPoly(-c for c in self.coeffs)

    def __sub__(self, other) -> RationalPoly:
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> RationalPoly:
        return _as_poly(other) - self

    def __mul__(self, other) -> RationalPoly:
        if not isinstance(other, RationalPoly):
            c = Fraction(other)
            return RationalPoly(c * a for a in self.coeffs)
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return RationalPoly()
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
        return RationalPoly(out)

    __rmul__ = __mul__

    def __call__(self, x):
        """Evaluate by Horner's rule; exact for rational ``x``."""
        if isinstance(x, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for c in reversed(self.coeffs):
            acc = acc * x + float(c)
        return acc

    def derivative(self) -> RationalPoly:
        return RationalPoly(i * c for i, c in enumerate(self.coeffs) if i > 0)

    def __repr__(self) -> str:
        if not self.coeffs:
            return "RationalPoly(0)"
        terms = [f"{c}*x^{i}" for i, c in enumerate(self.coeffs) if c != 0]
        return "RationalPoly(" + " + ".join(terms) + ")"


def _as_poly(p) -> RationalPoly:
    return p if isinstance(p, RationalPoly) else RationalPoly.constant(p)


def _check_degree(n: int) -> None:
    if n < 0:
        raise ConfigurationError(f"Legendre degree must be >= 0, got {n}")
    if n > DEGREE_CAP:
        raise ConfigurationError(f"Legendre degree {n} exceeds the cap {DEGREE_CAP}")


@lru_cache(maxsize=None)
def legendre(n: int) -> RationalPoly:
    """Legendre polynomial ``P_n`` on [-1, 1], normalised so ``P_n(1) = 1``.

    Built with Bonnet's recurrence ``(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}``.
    """
    _check_degree(n)
    if n == 0:
        return RationalPoly.constant(1)
    if n == 1:
        return RationalPoly.x()
    k = n - 1
    return (RationalPoly.x() * legendre(k) * (2 * k + 1) - legendre(k - 1) * k) * Fraction(1, k + 1)


def antiderivative_from_minus1(p: RationalPoly) -> RationalPoly:
    """Return ``q`` with ``q(x) = integral of p over [-1, x]``."""
    raw = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(p.coeffs)]
    q = RationalPoly(raw)
    return q - q(Fraction(-1))


def integrate_over_minus1_1(p: RationalPoly) -> Fraction:
    """Exact integral of ``p`` over [-1, 1]."""
    # odd powers vanish by symmetry
    return sum((2 * c / (i + 1) for i, c in enumerate(p.coeffs) if i % 2 == 0), Fraction(0))


@lru_cache(maxsize=None)
def monomial_moments(p: RationalPoly, length: int) -> tuple[Fraction, ...]:
    """``m[d] = integral over [-1, 1] of p(x) * x**d`` for ``d < length``."""
    out = []
    for d in range(length):
        acc = Fraction(0)
        for i, c in enumerate(p.coeffs):
            if (i + d) % 2 == 0 and c != 0:
                acc += 2 * c / (i + d + 1)
        out.append(acc)
    return tuple(out)


@dataclass(frozen=True)
class ScaledBasisFn:
    """Orthonormal Legendre function on ``[step_start, step_start + step_len]``.

    ``phi_i(x) = sqrt((2i+1)/step_len) * P_i((x - step_start - step_len/2) * 2/step_len)``
    """

    degree: int
    step_start: float
    step_len: float

    def __post_init__(self):
        _check_degree(self.degree)
        if not self.step_len > 0:
            raise ConfigurationError("step_len must be positive")

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - self.step_start - self.step_len / 2) * (2 / self.step_len)
        return np.sqrt((2 * self.degree + 1) / self.step_len) * legendre(self.degree)(z)

