"""Joint sampling of the twelve iterated Ito integrals of one step.

All integrals of a step are read from one Gaussian pool ``zeta[j, i]``
(``j`` = Legendre index, ``i`` = Wiener component, both 0-based).  A pool may
carry leading batch axes, in which case every sampler returns one value per
batch row; this is how paths are vectorised.

Index conventions: ``indices = (i_1, ..., i_k)`` lists Wiener components
innermost integration first, exactly like the superscript of
``I_(l_1...l_k)^(i_1...i_k)``.  Components are 0-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .coefficients import PATTERNS, CoeffTable, as_pattern, build_table, delta_power
from .exceptions import ConfigurationError
from .kernels import WickPlan

#: Paths per random stream block; path ``p`` always draws from block ``p // PATH_BLOCK``.
PATH_BLOCK = 256

TABLE_PATTERNS = ("000", "001", "010", "100", "0000", "00000")
PAIR_PATTERNS = ("00", "01", "10")
SINGLE_PATTERNS = ("0", "1", "2")


@dataclass(frozen=True)
class GaussianPool:
    """Independent standard normals ``values[..., j, i]`` shared by one step."""

    values: np.ndarray
    seed: object = None

    @property
    def rows(self) -> int:
        return self.values.shape[-2]

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.values.shape[:-2]

    def zeta(self, i: int) -> np.ndarray:
        """``zeta_j^(i)`` for all ``j`` as an array ``(..., rows)``."""
        return self.values[..., i]


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def draw_pool(m: int, q_max: int, rng_stream=None, size=None) -> GaussianPool:
    """Draw ``(q_max + 3) * m`` standard normals (times ``size`` batch rows)."""
    if m < 1:
        raise ConfigurationError("m must be >= 1")
    if q_max < 0:
        raise ConfigurationError("q_max must be >= 0")
    shape = (q_max + 3, m) if size is None else tuple(np.atleast_1d(size)) + (q_max + 3, m)
    return GaussianPool(_generator(rng_stream).standard_normal(shape), seed=rng_stream)


class PathStreams:
    """Deterministic random streams keyed by (step, path block).

    The pool of path ``p`` at step ``s`` depends only on ``(seed, s, p)``, not
    on how many paths are simulated or in which order blocks are processed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def block_generator(self, step: int, block: int) -> np.random.Generator:
        return _generator(np.random.SeedSequence([self.seed, int(step), int(block)]))

    def pools(self, step: int, n_paths: int, m: int, q_max: int, first_path: int = 0) -> GaussianPool:
        """Pools for paths ``first_path .. first_path + n_paths - 1`` at ``step``."""
        rows = q_max + 3
        out = np.empty((n_paths, rows, m))
        last = first_path + n_paths
        for block in range(first_path // PATH_BLOCK, (last - 1) // PATH_BLOCK + 1):
            lo = block * PATH_BLOCK
            draws = self.block_generator(step, block).standard_normal((PATH_BLOCK, rows, m))
            a, b = max(lo, first_path), min(lo + PATH_BLOCK, last)
            out[a - first_path : b - first_path] = draws[a - lo : b - lo]
        return GaussianPool(out, seed=(self.seed, step))


@dataclass(frozen=True)
class TruncationPlan:
    """Truncation level ``q`` per weight pattern."""

    q: Mapping[str, int]

    def __post_init__(self):
        clean = {}
        for pattern, q in dict(self.q).items():
            pattern = as_pattern(pattern)
            if int(q) < 0:
                raise ConfigurationError(f"negative q for ({pattern})")
            clean[pattern] = int(q)
        object.__setattr__(self, "q", clean)

    @classmethod
    def uniform(cls, q: int, patterns=PAIR_PATTERNS + TABLE_PATTERNS) -> TruncationPlan:
        return cls({p: q for p in patterns})

    def __getitem__(self, pattern) -> int:
        return self.q.get(as_pattern(pattern), 0)

    @property
    def q_max(self) -> int:
        """Largest ``q`` in the plan; pools need rows ``0 .. q_max + 2``."""
        return max(self.q.values(), default=0)

    @property
    def pool_rows(self) -> int:
        return self.q_max + 3


def _batch(pool) -> tuple[np.ndarray, tuple]:
    values = pool.values if isinstance(pool, GaussianPool) else np.asarray(pool, dtype=float)
    batch = values.shape[:-2]
    return values.reshape((-1,) + values.shape[-2:]), batch


def _unbatch(out: np.ndarray, batch: tuple):
    out = out.reshape(batch)
    return float(out) if batch == () else out


def _require_rows(values: np.ndarray, rows: int, what: str):
    if values.shape[-2] < rows:
        raise ConfigurationError(f"{what} needs pool rows 0..{rows - 1}, pool has {values.shape[-2]}")


def sample_single(pattern, i1: int, pool, delta: float):
    """``I_(0)``, ``I_(1)`` or ``I_(2)``; these expansions are exact."""
    pattern = as_pattern(pattern)
    if pattern not in SINGLE_PATTERNS:
        raise ConfigurationError(f"({pattern}) is not a single integral")
    z, batch = _batch(pool)
    _require_rows(z, int(pattern) + 1, f"I_({pattern})")
    a = z[:, :, i1]
    if pattern == "0":
        out = math.sqrt(delta) * a[:, 0]
    elif pattern == "1":
        out = -(delta**1.5) / 2 * (a[:, 0] + a[:, 1] / math.sqrt(3))
    else:
        out = delta**2.5 / 3 * (a[:, 0] + math.sqrt(3) / 2 * a[:, 1] + a[:, 2] / (2 * math.sqrt(5)))
    return _unbatch(out, batch)


def _i00(a, b, same, q, delta):
    out = a[:, 0] * b[:, 0]
    if q >= 1:
        i = np.arange(1, q + 1)
        w = 1 / np.sqrt(4.0 * i * i - 1)
        out = out + ((a[:, i - 1] * b[:, i] - a[:, i] * b[:, i - 1]) * w).sum(axis=1)
    if same:
        out = out - 1.0
    return delta / 2 * out


def _pair_tail(q):
    i = np.arange(q + 1)
    den = np.sqrt((2 * i + 1.0) * (2 * i + 5)) * (2 * i + 3)
    diag = 1 / ((2 * i - 1.0) * (2 * i + 3))
    return i, den, diag


def sample_pair(pattern, i1: int, i2: int, q: int, pool, delta: float):
    """``I_(00)``, ``I_(01)`` or ``I_(10)`` truncated at ``q``."""
    pattern = as_pattern(pattern)
    z, batch = _batch(pool)
    a, b = z[:, :, i1], z[:, :, i2]
    same = i1 == i2
    if pattern == "00":
        _require_rows(z, q + 1, "I_(00)")
        return _unbatch(_i00(a, b, same, q, delta), batch)
    if pattern not in ("01", "10"):
        raise ConfigurationError(f"({pattern}) is not a double integral")
    _require_rows(z, q + 3, f"I_({pattern})")
    base = -delta / 2 * _i00(a, b, same, q, delta)
    i, den, diag = _pair_tail(q)
    # centred diagonal products: the raw truncated sum has a nonzero mean when i1 == i2
    prod = a[:, i] * b[:, i] - (1.0 if same else 0.0)
    if pattern == "01":
        cross = ((i + 2) * a[:, i] * b[:, i + 2] - (i + 1) * a[:, i + 2] * b[:, i]) / den
        inner = a[:, 0] * b[:, 1] / math.sqrt(3) + (cross - prod * diag).sum(axis=1)
    else:
        cross = ((i + 1) * b[:, i + 2] * a[:, i] - (i + 2) * b[:, i] * a[:, i + 2]) / den
        inner = b[:, 0] * a[:, 1] / math.sqrt(3) + (cross + prod * diag).sum(axis=1)
    return _unbatch(base - delta**2 / 4 * inner, batch)


class _PlanCache:
    """Wick plans keyed by (table identity, Wiener index equality pattern)."""

    def __init__(self):
        self._plans = {}

    def get(self, table: CoeffTable, labels: tuple, corrected: bool) -> WickPlan:
        canon = _canonical(labels)
        key = (table.pattern, table.q, id(table), canon, corrected)
        plan = self._plans.get(key)
        if plan is None:
            plan = WickPlan(table.scaled(1.0), canon, corrected)
            self._plans[key] = plan
        return plan


def _canonical(labels) -> tuple:
    seen = {}
    return tuple(seen.setdefault(x, len(seen)) for x in labels)


_plans = _PlanCache()


def _check_table(pattern: str, q: int, table: CoeffTable | None) -> CoeffTable:
    if table is None:
        return build_table(pattern, q)
    if table.pattern != pattern:
        raise ConfigurationError(f"table is for ({table.pattern}), sampler needs ({pattern})")
    if table.q != q:
        if table.q > q:
            return table.truncate(q)
        raise ConfigurationError(f"table has q={table.q}, sampler needs q={q}")
    return table


def sample_multiple(pattern, indices, q: int, pool, delta: float, table: CoeffTable | None = None,
                    corrected: bool = True):
    """Multiplicity 3-5 integral via its coefficient table and Wick corrections.

    ``corrected=False`` drops all indicator terms, giving the plain product sum.
    """
    pattern = as_pattern(pattern)
    if pattern not in TABLE_PATTERNS:
        raise ConfigurationError(f"({pattern}) is not sampled from a coefficient table")
    indices = tuple(int(i) for i in indices)
    if len(indices) != len(pattern):
        raise ConfigurationError(f"({pattern}) needs {len(pattern)} Wiener indices")
    table = _check_table(pattern, q, table)
    z, batch = _batch(pool)
    _require_rows(z, q + 1, f"I_({pattern})")
    stacked = np.stack([z[:, : q + 1, i] for i in indices], axis=1)
    plan = _plans.get(table, indices, corrected)
    out = plan(stacked) * delta ** float(delta_power(pattern))
    return _unbatch(out, batch)


def sample_triple(pattern, i1, i2, i3, q, table, pool, delta):
    """``I_(000)``, ``I_(001)``, ``I_(010)`` or ``I_(100)``."""
    if len(as_pattern(pattern)) != 3:
        raise ConfigurationError(f"({pattern}) is not a triple integral")
    return sample_multiple(pattern, (i1, i2, i3), q, pool, delta, table)


def sample_quad(indices, q, table, pool, delta):
    return sample_multiple("0000", indices, q, pool, delta, table)


def sample_quint(indices, q, table, pool, delta):
    return sample_multiple("00000", indices, q, pool, delta, table)


@dataclass
class StepIntegrals:
    """Approximated integrals of one step.

    ``values[pattern]`` has shape ``batch + (m,) * k`` with the Wiener index
    axes in superscript order ``(i_1, ..., i_k)``.
    """

    values: dict = field(default_factory=dict)
    delta: float = 1.0
    m: int = 1

    def __getitem__(self, key):
        if isinstance(key, tuple):
            pattern, idx = key
            return self.values[as_pattern(pattern)][(..., *idx)]
        return self.values[as_pattern(key)]

    def count(self) -> int:
        return sum(self.m ** len(p) for p in self.values)


def sample_step(plan: TruncationPlan, m: int, pool, delta: float, tables: Mapping | None = None,
                patterns=PATTERNS) -> StepIntegrals:
    """All requested families for every index combination, from one pool."""
    tables = dict(tables or {})
    z, batch = _batch(pool)
    if z.shape[-1] != m:
        raise ConfigurationError(f"pool has {z.shape[-1]} components, expected m={m}")
    _require_rows(z, plan.pool_rows, "the truncation plan")
    out = StepIntegrals(delta=delta, m=m)
    for pattern in map(as_pattern, patterns):
        k = len(pattern)
        arr = np.empty((z.shape[0],) + (m,) * k)
        for idx in itertools.product(range(m), repeat=k):
            if pattern in SINGLE_PATTERNS:
                val = sample_single(pattern, idx[0], z, delta)
            elif pattern in PAIR_PATTERNS:
                val = sample_pair(pattern, idx[0], idx[1], plan[pattern], z, delta)
            else:
                q = plan[pattern]
                table = tables.get(pattern)
                if table is None:
                    table = tables[pattern] = build_table(pattern, q)
                val = sample_multiple(pattern, idx, q, z, delta, table)
            arr[(slice(None),) + idx] = val
        out.values[pattern] = arr.reshape(batch + (m,) * k)
    return out
