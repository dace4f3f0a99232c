"""Built-in test SDEs with analytic compositions and reference solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp
from scipy.linalg import expm

from .exceptions import ConfigurationError
from .scheme import SdeCoefficients, symbolic_provider


@dataclass
class Model:
    """An SDE plus whatever closed-form reference it admits.

    ``exact(t, w, y0)`` maps Brownian values ``w`` of shape ``(P, m)`` to
    states ``(P, n)``; ``mean(t, y0)`` gives ``E x_t``.
    """

    name: str
    coeffs: SdeCoefficients
    y0: np.ndarray
    params: dict = field(default_factory=dict)
    exact: Callable | None = None
    mean: Callable | None = None


def _scalar(name, drift, diffusion, params, y0, exact=None, mean=None) -> Model:
    x, t = sp.symbols("x t", real=True)
    coeffs = symbolic_provider([drift(x, t)], [[diffusion(x, t)]], [x], t, name=name)
    return Model(name, coeffs, np.array([float(y0)]), params, exact, mean)


@lru_cache(maxsize=None)
def gbm(lam: float = 2.0, mu: float = 0.5, y0: float = 1.0) -> Model:
    """``dx = lam x dt + mu x dw``."""
    lam_s, mu_s = sp.Float(lam), sp.Float(mu)

    def exact(t, w, x0=y0):
        return x0 * np.exp((lam - mu * mu / 2) * t + mu * np.asarray(w)[:, :1])

    def mean(t, x0=y0):
        return np.array([x0 * math.exp(lam * t)])

    return _scalar("gbm", lambda x, t: lam_s * x, lambda x, t: mu_s * x,
                   {"lam": lam, "mu": mu}, y0, exact, mean)


@lru_cache(maxsize=None)
def linear_time(lam: float = 1.0, beta: float = 0.5, mu: float = 0.4, y0: float = 1.0) -> Model:
    """``dx = (lam + beta t) x dt + mu x dw``; the drift depends on time."""
    lam_s, beta_s, mu_s = sp.Float(lam), sp.Float(beta), sp.Float(mu)

    def exact(t, w, x0=y0):
        return x0 * np.exp(lam * t + beta * t * t / 2 - mu * mu * t / 2 + mu * np.asarray(w)[:, :1])

    def mean(t, x0=y0):
        return np.array([x0 * math.exp(lam * t + beta * t * t / 2)])

    return _scalar("linear-time", lambda x, t: (lam_s + beta_s * t) * x, lambda x, t: mu_s * x,
                   {"lam": lam, "beta": beta, "mu": mu}, y0, exact, mean)


BILINEAR_A = ((-0.5, 0.3), (0.2, -0.4))
BILINEAR_B1 = ((0.3, 0.1), (0.0, 0.2))
BILINEAR_B2 = ((0.0, -0.2), (0.25, 0.1))


@lru_cache(maxsize=None)
def bilinear(y0=(1.0, 0.5)) -> Model:
    """``dx = A x dt + B1 x dw1 + B2 x dw2`` with ``B1 B2 != B2 B1``.

    There is no closed-form path solution; ``E x_t = exp(A t) x0``.
    """
    x1, x2, t = sp.symbols("x1 x2 t", real=True)
    X = sp.Matrix([x1, x2])
    A, B1, B2 = (sp.Matrix([[sp.nsimplify(v) for v in row] for row in M])
                 for M in (BILINEAR_A, BILINEAR_B1, BILINEAR_B2))
    drift = A * X
    diffusion = sp.Matrix.hstack(B1 * X, B2 * X)
    coeffs = symbolic_provider(list(drift), diffusion, [x1, x2], t, name="bilinear")
    A_np = np.array(BILINEAR_A)

    def mean(t, x0=None):
        x0 = np.asarray(y0 if x0 is None else x0, dtype=float)
        return expm(A_np * t) @ x0

    params = {"A": BILINEAR_A, "B1": BILINEAR_B1, "B2": BILINEAR_B2}
    return Model("bilinear", coeffs, np.array(y0, dtype=float), params, None, mean)


@lru_cache(maxsize=None)
def zero_noise(lam: float = -1.0, y0: float = 1.0) -> Model:
    """``dx = lam x dt``: every path follows the same deterministic Taylor steps."""
    lam_s = sp.Float(lam)

    def exact(t, w, x0=y0):
        return np.full((np.asarray(w).shape[0], 1), x0 * math.exp(lam * t))

    return _scalar("zero-noise", lambda x, t: lam_s * x, lambda x, t: sp.Integer(0),
                   {"lam": lam}, y0, exact, lambda t, x0=y0: np.array([x0 * math.exp(lam * t)]))


MODELS = {"gbm": gbm, "linear-time": linear_time, "bilinear": bilinear, "zero-noise": zero_noise}


def get_model(name: str, **params) -> Model:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ConfigurationError(f"unknown model {name!r}; built-ins are {sorted(MODELS)}") from None
    return factory(**params)
