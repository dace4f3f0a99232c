"""Explicit one-step strong schemes of orders 1.5, 2.0 and 2.5.

Drift ``a`` and diffusion ``B`` enter through operator compositions such as
``G_{i3} G_{i2} B_{i1}``.  A composition is named by its operator letters,
outermost first (``"GGB"``, ``"LGB"``, ``"GLa"``); its value at a batch of
states ``x`` of shape ``(P, n)`` has shape ``(P, m, ..., m, n)`` with one
``m`` axis per ``G`` or ``B`` letter, in the order the letters appear.
So ``GGB[p, i3, i2, i1]`` is ``G_{i3} G_{i2} B_{i1}`` at path ``p``.

Integral arrays list their superscript indices the same way, so every term
of the scheme is a plain contraction of matching axes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .error_calc import ErrorBudget, select_truncations
from .exceptions import ConfigurationError, DivergenceError
from .sampling import PathStreams, StepIntegrals, TruncationPlan, sample_step

ORDER_COMPOSITIONS = {
    1.5: ("B", "a", "GB", "Ga", "LB", "GGB", "La"),
    2.0: ("GLB", "LGB", "GGa", "GGGB"),
    2.5: ("GLa", "LLB", "LGa", "GLGB", "GGLB", "GGGa", "LGGB", "GGGGB", "LLa"),
}

ORDER_PATTERNS = {
    1.5: ("0", "1", "00", "000"),
    2.0: ("01", "10", "0000"),
    2.5: ("2", "001", "010", "100", "00000"),
}

ORDERS = tuple(ORDER_COMPOSITIONS)


def _upto(table: Mapping, order: float) -> tuple:
    if order not in table:
        raise ConfigurationError(f"order must be one of {ORDERS}, got {order}")
    return tuple(itertools.chain.from_iterable(v for o, v in table.items() if o <= order))


def required_compositions(order: float) -> tuple[str, ...]:
    return _upto(ORDER_COMPOSITIONS, order)


def required_patterns(order: float) -> tuple[str, ...]:
    return _upto(ORDER_PATTERNS, order)


def index_rank(name: str) -> int:
    """Number of Wiener index axes of a composition."""
    return sum(c in "GB" for c in name)


@dataclass
class SdeCoefficients:
    """Drift, diffusion and their operator compositions for ``dx = a dt + B dw``.

    ``compositions[name](x, t)`` takes ``x`` of shape ``(P, n)`` and returns
    ``(P,) + (m,) * index_rank(name) + (n,)``.
    """

    n: int
    m: int
    compositions: dict = field(default_factory=dict)
    name: str = "custom"

    def evaluate(self, name: str, x: np.ndarray, t: float) -> np.ndarray:
        fn = self.compositions.get(name)
        if fn is None:
            raise ConfigurationError(f"composition {name!r} is not provided")
        out = np.asarray(fn(x, t), dtype=float)
        expected = (x.shape[0],) + (self.m,) * index_rank(name) + (self.n,)
        if out.shape != expected:
            out = np.broadcast_to(out, expected)
        return out

    def check(self, order: float) -> None:
        missing = [c for c in required_compositions(order) if c not in self.compositions]
        if missing:
            raise ConfigurationError(f"order {order} needs compositions {', '.join(missing)}")


@dataclass(frozen=True)
class SchemeConfig:
    order: float = 2.5
    delta: float = 0.1
    steps: int = 10
    budget_c: float = 1.0
    plan: TruncationPlan | None = None
    strategy: str = "exact"

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ConfigurationError(f"order must be one of {ORDERS}, got {self.order}")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")

    @classmethod
    def over(cls, T: float, steps: int, **kw) -> SchemeConfig:
        return cls(delta=T / steps, steps=steps, **kw)

    @property
    def T(self) -> float:
        return self.delta * self.steps

    def truncation_plan(self, m: int) -> TruncationPlan:
        """The explicit plan, or the smallest one meeting ``budget_c * delta**6``."""
        if self.plan is not None:
            return self.plan
        patterns = [p for p in required_patterns(self.order) if len(p) >= 2]
        return select_truncations(ErrorBudget(self.budget_c, self.delta), patterns, self.strategy, m)


@dataclass
class PathState:
    y: np.ndarray
    p: int = 0
    delta: float = 1.0

    @property
    def time(self) -> float:
        return self.p * self.delta


def _dot(comp: np.ndarray, integral: np.ndarray) -> np.ndarray:
    # contract all Wiener index axes; comp (P, m.., n), integral (P, m..)
    r = integral.ndim - 1
    return np.einsum(comp, [0, *range(1, r + 1), r + 1], integral, [0, *range(1, r + 1)], [0, r + 1])


def increment(coeffs: SdeCoefficients, y: np.ndarray, t: float, I: StepIntegrals, order: float) -> dict:
    """Increment of the scheme split into its base, ``v`` and ``r`` blocks."""
    d = I.delta
    ev = lambda name: coeffs.evaluate(name, y, t)  # noqa: E731
    I0, I1, I00, I000 = I["0"], I["1"], I["00"], I["000"]
    base = (
        _dot(ev("B"), I0)
        + d * ev("a")
        + _dot(ev("GB"), I00)
        + _dot(ev("Ga"), d * I0 + I1)
        - _dot(ev("LB"), I1)
        + _dot(ev("GGB"), I000)
        + d * d / 2 * ev("La")
    )
    out = {"base": base}
    if order >= 2.0:
        I01, I10, I0000 = I["01"], I["10"], I["0000"]
        out["v"] = (
            _dot(ev("GLB"), I10 - I01)
            - _dot(ev("LGB"), I10)
            + _dot(ev("GGa"), I01 + d * I00)
            + _dot(ev("GGGB"), I0000)
        )
    if order >= 2.5:
        I2, I001, I010, I100, I00000 = I["2"], I["001"], I["010"], I["100"], I["00000"]
        out["r"] = (
            _dot(ev("GLa"), I2 / 2 + d * I1 + d * d / 2 * I0)
            + _dot(ev("LLB"), I2 / 2)
            - _dot(ev("LGa"), I2 + d * I1)
            + _dot(ev("GLGB"), I100 - I010)
            + _dot(ev("GGLB"), I010 - I001)
            + _dot(ev("GGGa"), d * I000 + I001)
            - _dot(ev("LGGB"), I100)
            + _dot(ev("GGGGB"), I00000)
            + d**3 / 6 * ev("LLa")
        )
    return out


def step(coeffs: SdeCoefficients, state: PathState, integrals: StepIntegrals, config: SchemeConfig) -> PathState:
    """Advance ``state`` by one step of the configured order."""
    coeffs.check(config.order)
    y = np.asarray(state.y, dtype=float)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    parts = increment(coeffs, yb, state.time, _batched(integrals, yb.shape[0]), config.order)
    new = yb + sum(parts.values())
    return PathState(new[0] if single else new, state.p + 1, state.delta)


def _batched(I: StepIntegrals, P: int) -> StepIntegrals:
    out = {}
    for pattern, arr in I.values.items():
        k = len(pattern)
        if arr.ndim == k:
            arr = np.broadcast_to(arr, (P,) + arr.shape)
        out[pattern] = arr
    return StepIntegrals(out, I.delta, I.m)


@dataclass
class PathResult:
    """States ``y[s, p]`` at ``t = s * delta`` and the Brownian values ``w[s, p]`` they were driven by."""

    times: np.ndarray
    y: np.ndarray
    w: np.ndarray
    plan: TruncationPlan
    seed: int

    @property
    def terminal(self) -> np.ndarray:
        return self.y[-1]


def run_path(coeffs: SdeCoefficients, y0, config: SchemeConfig, seed: int = 0, paths: int = 1,
             plan: TruncationPlan | None = None, tables: Mapping | None = None, first_path: int = 0) -> PathResult:
    """Simulate ``paths`` trajectories; path ``p`` depends only on ``(seed, p)``."""
    coeffs.check(config.order)
    plan = plan or config.truncation_plan(coeffs.m)
    patterns = required_patterns(config.order)
    y = np.broadcast_to(np.asarray(y0, dtype=float), (paths, coeffs.n)).copy()
    streams = PathStreams(seed)
    tables = dict(tables or {})
    ys = np.empty((config.steps + 1, paths, coeffs.n))
    ws = np.zeros((config.steps + 1, paths, coeffs.m))
    ys[0] = y
    sqrt_d = math.sqrt(config.delta)
    for p in range(config.steps):
        pool = streams.pools(p, paths, coeffs.m, plan.q_max, first_path)
        integrals = sample_step(plan, coeffs.m, pool, config.delta, tables, patterns)
        # overflow surfaces as DivergenceError below
        with np.errstate(all="ignore"):
            parts = increment(coeffs, y, p * config.delta, integrals, config.order)
            y = y + sum(parts.values())
        if not np.all(np.isfinite(y)):
            raise DivergenceError(p + 1)
        ys[p + 1] = y
        ws[p + 1] = ws[p] + sqrt_d * pool.values[:, 0, :]
    times = config.delta * np.arange(config.steps + 1)
    return PathResult(times, ys, ws, plan, seed)


# ---------------------------------------------------------------- providers

def _parse_name(name: str) -> tuple[str, str]:
    ops, base = name[:-1], name[-1]
    if base not in "aB" or any(c not in "GL" for c in ops):
        raise ConfigurationError(f"not a composition name: {name!r}")
    return ops, base


def symbolic_provider(a, B, x_symbols, t_symbol, names=None, name: str = "symbolic") -> SdeCoefficients:
    """Exact compositions from sympy expressions ``a`` (length n) and ``B`` (n x m)."""
    import sympy as sp

    a = sp.Matrix(a)
    B = sp.Matrix(B)
    xs = list(x_symbols)
    n, m = B.shape
    if a.shape != (n, 1) or len(xs) != n:
        raise ConfigurationError("a, B and the state symbols disagree on the dimension")
    BBt = B * B.T

    def G(i, f):
        return f.jacobian(xs) * B[:, i]

    def L(f):
        out = f.diff(t_symbol) + f.jacobian(xs) * a
        for l, k in itertools.product(range(n), repeat=2):
            if BBt[l, k] != 0:
                out += BBt[l, k] / 2 * f.diff(xs[l]).diff(xs[k])
        return out

    cache = {}

    def expr(ops: str, base: str, idx: tuple):
        key = (ops, base, idx)
        if key not in cache:
            if not ops:
                cache[key] = a if base == "a" else B[:, idx[0]]
            elif ops[0] == "G":
                cache[key] = sp.expand(G(idx[0], expr(ops[1:], base, idx[1:])))
            else:
                cache[key] = sp.expand(L(expr(ops[1:], base, idx)))
        return cache[key]

    comps = {}
    for cname in names or required_compositions(2.5):
        ops, base = _parse_name(cname)
        r = index_rank(cname)
        flat = []
        for idx in itertools.product(range(m), repeat=r):
            flat.extend(list(expr(ops, base, idx)))
        fn = sp.lambdify([t_symbol, *xs], flat, "numpy")
        comps[cname] = _vectorised(fn, (m,) * r + (n,))
    return SdeCoefficients(n, m, comps, name)


def _vectorised(fn, tail: tuple):
    def call(x, t):
        x = np.asarray(x, dtype=float)
        P = x.shape[0]
        vals = fn(t, *x.T)
        out = np.empty((P, len(vals)))
        for c, v in enumerate(vals):
            out[:, c] = v
        return out.reshape((P,) + tail)

    return call


def finite_difference_provider(a: Callable, B: Callable, n: int, m: int, h: float = 1e-4, names=None,
                               name: str = "finite-difference") -> SdeCoefficients:
    """Compositions by nested central differences of ``a(x, t)`` and ``B(x, t)``.

    ``a`` maps ``(P, n)`` to ``(P, n)``; ``B`` maps ``(P, n)`` to ``(P, n, m)``.
    The innermost difference uses ``h``.  Each further nesting level uses the
    step that balances truncation against the rounding noise already present
    (``noise ** (1/3)`` for first and ``noise ** (1/4)`` for second
    differences), never below ``h``.  Accuracy is ``O(step**2)`` per level and
    exact up to rounding for coefficients of degree <= 2.
    """
    if not h > 0:
        raise ConfigurationError("finite-difference step must be positive")
    eps = np.finfo(float).eps

    def base_fn(base):
        if base == "a":
            return lambda x, t: np.asarray(a(x, t), dtype=float)
        # columns first: (P, m, n)
        return lambda x, t: np.swapaxes(np.asarray(B(x, t), dtype=float), 1, 2)

    def shift(x, j, s):
        y = x.copy()
        y[:, j] += s
        return y

    def step_for(noise, power):
        return max(h, noise ** (1 / power))

    def apply_G(f, noise):
        hs = step_for(noise, 3)

        def g(x, t):
            Bx = np.asarray(B(x, t), dtype=float)  # (P, n, m)
            acc = 0.0
            for j in range(n):
                df = (f(shift(x, j, hs), t) - f(shift(x, j, -hs), t)) / (2 * hs)
                # new leading index axis i: sum_j B[j, i] * df
                acc = acc + np.einsum("pi,p...->pi...", Bx[:, j, :], df)
            return acc

        return g, noise / hs

    def apply_L(f, noise):
        h1 = step_for(noise, 3)
        h2 = step_for(noise, 4)

        def g(x, t):
            ax = np.asarray(a(x, t), dtype=float)
            Bx = np.asarray(B(x, t), dtype=float)
            D = np.einsum("plj,pij->pli", Bx, Bx)
            out = (f(x, t + h1) - f(x, t - h1)) / (2 * h1)
            f0 = f(x, t)
            for i in range(n):
                di = (f(shift(x, i, h1), t) - f(shift(x, i, -h1), t)) / (2 * h1)
                out = out + _lead(ax[:, i], di)
                second = (f(shift(x, i, h2), t) - 2 * f0 + f(shift(x, i, -h2), t)) / h2**2
                out = out + _lead(D[:, i, i] / 2, second)
                for l in range(i + 1, n):
                    pp = f(shift(shift(x, i, h2), l, h2), t)
                    pm = f(shift(shift(x, i, h2), l, -h2), t)
                    mp = f(shift(shift(x, i, -h2), l, h2), t)
                    mm = f(shift(shift(x, i, -h2), l, -h2), t)
                    mixed = (pp - pm - mp + mm) / (4 * h2 * h2)
                    out = out + _lead(D[:, l, i], mixed)
            return out

        return g, noise / h2**2

    comps = {}
    for cname in names or required_compositions(2.5):
        ops, base = _parse_name(cname)
        f, noise = base_fn(base), eps
        for op in reversed(ops):
            f, noise = apply_G(f, noise) if op == "G" else apply_L(f, noise)
        comps[cname] = f
    return SdeCoefficients(n, m, comps, name)


def _lead(w, arr):
    return w.reshape((-1,) + (1,) * (arr.ndim - 1)) * arr

