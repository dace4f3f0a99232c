"""Mean-square truncation errors and the choice of truncation levels.

Three kinds of error expression live here:

* exact errors of the multiple-integral approximations for a given equality
  pattern of the Wiener indices (a sum over index permutations);
* the cruder ``k!`` estimate that holds for every index pattern;
* closed-form partial sums for the double integrals.

:func:`select_truncations` turns a budget ``C * Delta**6`` into a
:class:`~itoseries.sampling.TruncationPlan`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .coefficients import CoeffTable, as_pattern, build_table, kernel_norm_sq
from .exceptions import ConfigurationError, InfeasibleTruncationError
from .sampling import PAIR_PATTERNS, SINGLE_PATTERNS, TABLE_PATTERNS, TruncationPlan

#: Largest q searched per multiplicity; tables beyond this get slow to build.
TABLE_Q_CAP = {3: 24, 4: 10, 5: 6}

#: Largest q searched for the double integrals (no table is needed there).
PAIR_Q_CAP = 10**7

# largest q whose (00) partial sum is evaluated in exact rationals
EXACT_SUM_LIMIT = 20_000

DEFAULT_BUDGET_C = 1.0


@dataclass(frozen=True)
class ErrorBudget:
    """Per-integral mean-square target ``C * delta**6``."""

    C: float = DEFAULT_BUDGET_C
    delta: float = 1.0

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ConfigurationError(f"budget constant must be positive, got {self.C}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigurationError(f"step must be positive, got {self.delta}")

    @property
    def target(self) -> float:
        return self.C * self.delta**6


@dataclass(frozen=True)
class IndexPattern:
    """Equality pattern of ``(i_1, ..., i_k)`` as canonical block labels.

    ``IndexPattern((0, 0, 1))`` means ``i_1 = i_2 != i_3``.
    """

    labels: tuple

    def __post_init__(self):
        seen = {}
        canon = tuple(seen.setdefault(x, len(seen)) for x in self.labels)
        object.__setattr__(self, "labels", canon)

    @classmethod
    def distinct(cls, k: int) -> IndexPattern:
        return cls(tuple(range(k)))

    @classmethod
    def equal(cls, k: int) -> IndexPattern:
        return cls((0,) * k)

    @classmethod
    def parse(cls, text: str) -> IndexPattern:
        """Read ``"i1=i2,i3"``, ``"distinct3"``/``"equal3"`` or a label string ``"001"``."""
        text = text.strip()
        for word, make in (("distinct", cls.distinct), ("equal", cls.equal)):
            if text.startswith(word):
                return make(int(text[len(word):]))
        if text.isdigit():
            return cls(tuple(int(c) for c in text))
        blocks = [b.split("=") for b in text.replace(" ", "").split(",")]
        pos = {}
        for label, block in enumerate(blocks):
            for name in block:
                if not name.startswith("i") or not name[1:].isdigit():
                    raise ConfigurationError(f"cannot read index pattern {text!r}")
                pos[int(name[1:])] = label
        if sorted(pos) != list(range(1, len(pos) + 1)):
            raise ConfigurationError(f"index pattern {text!r} must name i1..ik exactly once")
        return cls(tuple(pos[i] for i in range(1, len(pos) + 1)))

    @classmethod
    def all(cls, k: int) -> list[IndexPattern]:
        """Every set partition of ``k`` positions (restricted growth strings)."""
        out = []

        def grow(prefix, top):
            if len(prefix) == k:
                out.append(cls(tuple(prefix)))
                return
            for label in range(top + 2):
                grow(prefix + [label], max(top, label))

        grow([], -1)
        return out

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def blocks(self) -> int:
        return len(set(self.labels))

    def realizable(self, m: int) -> bool:
        return self.blocks <= m

    def stabilizer(self) -> list[tuple[int, ...]]:
        """Permutations of positions that keep every label in place."""
        k = self.k
        groups = [[p for p in range(k) if self.labels[p] == b] for b in range(self.blocks)]
        out = []
        for perms in itertools.product(*(itertools.permutations(g) for g in groups)):
            sigma = [0] * k
            for g, image in zip(groups, perms):
                for src, dst in zip(g, image):
                    sigma[src] = dst
            out.append(tuple(sigma))
        return out

    def __str__(self) -> str:
        blocks = {}
        for p, label in enumerate(self.labels):
            blocks.setdefault(label, []).append(f"i{p + 1}")
        return ",".join("=".join(b) for b in blocks.values())


def _as_index_pattern(index_pattern, k: int) -> IndexPattern:
    if index_pattern is None:
        return IndexPattern.distinct(k)
    if isinstance(index_pattern, str):
        index_pattern = IndexPattern.parse(index_pattern)
    elif not isinstance(index_pattern, IndexPattern):
        index_pattern = IndexPattern(tuple(index_pattern))
    if index_pattern.k != k:
        raise ConfigurationError(f"index pattern {index_pattern} has length {index_pattern.k}, expected {k}")
    return index_pattern


def _table_for(pattern: str, q: int, table: CoeffTable | None) -> CoeffTable:
    if table is None:
        return build_table(pattern, q)
    if table.pattern != pattern:
        raise ConfigurationError(f"table is for ({table.pattern}), expected ({pattern})")
    if table.q < q:
        raise ConfigurationError(f"table has q={table.q}, need q={q}")
    return table.truncate(q) if table.q > q else table


def _residual(pattern: str, table: CoeffTable, delta: float) -> float:
    c = table.scaled(delta)
    return kernel_norm_sq(pattern, delta) - float((c * c).sum())


def pair_errors(pattern, q: int, delta: float = 1.0, index_pattern=None) -> float:
    """Closed-form mean-square error of the double integrals.

    For equal indices ``I_(00)`` is reproduced exactly, so its error is 0.
    """
    pattern = as_pattern(pattern)
    if pattern not in PAIR_PATTERNS:
        raise ConfigurationError(f"({pattern}) is not a double integral")
    if q < 0:
        raise ConfigurationError("q must be >= 0")
    same = _as_index_pattern(index_pattern, 2).blocks == 1
    if pattern == "00":
        if same:
            return 0.0
        return delta**2 / 2 * float(_quarter_tail(q))
    i = np.arange(q + 1, dtype=float)
    tail = 1 / ((2 * i + 1) * (2 * i + 5) * (2 * i + 3) ** 2)
    inner = 1 / ((2 * i[1:] - 1) ** 2 * (2 * i[1:] + 3) ** 2)
    if same:
        value = 1 / 9 - math.fsum(tail) - 2 * math.fsum(inner)
    else:
        cross = ((i + 2) ** 2 + (i + 1) ** 2) * tail
        # 11/9 - 2 sum_{i>=1} equals 5/9 - 2 sum_{i>=2} for q >= 1 and stays right at q = 0
        pair = 1 / (4 * i[1:] ** 2 - 1)
        value = 11 / 9 - 2 * math.fsum(pair) - math.fsum(inner) - math.fsum(cross)
    return delta**4 / 16 * value


def _quarter_tail(q: int):
    """``1/2 - sum_{i<=q} 1/(4i^2 - 1)``; exact rationals avoid the cancellation for moderate q."""
    if q <= EXACT_SUM_LIMIT:
        return Fraction(1, 2) - sum((Fraction(1, 4 * i * i - 1) for i in range(1, q + 1)), Fraction(0))
    return math.fsum([0.5] + [-1 / (4 * i * i - 1) for i in range(1, q + 1)])


def pair_error_sum_closed(q: int, delta: float = 1.0) -> float:
    """``Delta^2 / (4 (2q + 1))``, the summed form of the distinct-index ``I_(00)`` error."""
    return delta**2 / (4 * (2 * q + 1))


def exact_error(pattern, q: int, delta: float = 1.0, index_pattern=None, table: CoeffTable | None = None) -> float:
    """Exact mean-square error for a given Wiener index equality pattern.

    ``I_k - sum_j C_j * sum_sigma C_{sigma(j)}`` where ``sigma`` runs over the
    permutations of positions that only exchange equal Wiener indices.
    """
    pattern = as_pattern(pattern)
    k = len(pattern)
    if k > 5:
        raise ConfigurationError(f"multiplicity {k} is not supported")
    if q < 0:
        raise ConfigurationError("q must be >= 0")
    index_pattern = _as_index_pattern(index_pattern, k)
    if pattern in SINGLE_PATTERNS:
        return 0.0
    if pattern in PAIR_PATTERNS:
        return pair_errors(pattern, q, delta, index_pattern)
    c = _table_for(pattern, q, table).scaled(delta)
    acc = 0.0
    for sigma in index_pattern.stabilizer():
        acc += float((c * np.transpose(c, sigma)).sum())
    return kernel_norm_sq(pattern, delta) - acc


def error_bound(pattern, q: int, delta: float = 1.0, table: CoeffTable | None = None) -> float:
    """``k! * (I_k - sum C^2)``, valid for every index pattern."""
    pattern = as_pattern(pattern)
    if pattern not in TABLE_PATTERNS:
        raise ConfigurationError(f"the k! estimate is stated for multiplicity 3..5, not ({pattern})")
    return math.factorial(len(pattern)) * _residual(pattern, _table_for(pattern, q, table), delta)


def _pair_index_patterns(m: int | None) -> list[IndexPattern]:
    return [p for p in IndexPattern.all(2) if m is None or p.realizable(m)]


def _governing_pair_error(pattern: str, q: int, delta: float, m: int | None = None) -> float:
    return max(pair_errors(pattern, q, delta, p) for p in _pair_index_patterns(m))


def _min_q_00(target: float, delta: float) -> int:
    # smallest q with delta^2 / (4 (2q + 1)) <= target, then nudged for rounding
    q = max(0, math.ceil((delta**2 / (4 * target) - 1) / 2))
    while q > 0 and pair_error_sum_closed(q - 1, delta) <= target:
        q -= 1
    while pair_error_sum_closed(q, delta) > target:
        q += 1
    return q


def _min_q_pair(pattern: str, target: float, delta: float, cap: int, m: int | None = None) -> int:
    if pattern == "00" and m == 1:
        return 0  # equal indices: reproduced exactly
    if pattern == "00":
        q = _min_q_00(target, delta)
        if q > cap:
            raise InfeasibleTruncationError(pattern, cap, f"({pattern}) needs q={q} > cap {cap}")
        return q
    # both closed forms are partial sums decreasing in q: bisect
    if _governing_pair_error(pattern, 0, delta, m) <= target:
        return 0
    lo, hi = 0, 1
    while _governing_pair_error(pattern, hi, delta, m) > target:
        lo, hi = hi, hi * 2
        if hi > cap:
            if _governing_pair_error(pattern, cap, delta, m) > target:
                raise InfeasibleTruncationError(pattern, cap, f"({pattern}) misses the budget at the cap q={cap}")
            hi = cap
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _governing_pair_error(pattern, mid, delta, m) > target:
            lo = mid
        else:
            hi = mid
    return hi


def _table_error(pattern: str, q: int, delta: float, strategy: str, m: int | None) -> float:
    table = build_table(pattern, q)
    if strategy == "bound":
        return error_bound(pattern, q, delta, table)
    k = len(pattern)
    patterns = [p for p in IndexPattern.all(k) if m is None or p.realizable(m)]
    return max(exact_error(pattern, q, delta, p, table) for p in patterns)


def select_truncations(budget: ErrorBudget | None = None, patterns: Iterable = PAIR_PATTERNS + TABLE_PATTERNS,
                       strategy: str = "bound", m: int | None = None, q_caps: dict | None = None) -> TruncationPlan:
    """Smallest q per pattern whose governing error is within ``C * Delta**6``.

    Double integrals use their closed forms, maximised over the index
    patterns that ``m`` Wiener processes can realise.
    ``strategy="bound"`` uses the ``k!`` estimate for multiplicity >= 3;
    ``strategy="exact"`` uses the largest exact error over the index patterns
    that ``m`` Wiener processes can realise (all patterns if ``m`` is None).
    """
    budget = budget or ErrorBudget()
    if strategy not in ("bound", "exact"):
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    caps = dict(TABLE_Q_CAP)
    caps.update(q_caps or {})
    target = budget.target
    plan = {}
    for pattern in map(as_pattern, patterns):
        if pattern in SINGLE_PATTERNS:
            plan[pattern] = 0
        elif pattern in PAIR_PATTERNS:
            plan[pattern] = _min_q_pair(pattern, target, budget.delta, caps.get("pair", PAIR_Q_CAP), m)
        else:
            cap = caps[len(pattern)]
            built = -1
            for q in range(cap + 1):
                if q > built:
                    # grow geometrically; smaller q are then cheap slices of the cached table
                    built = min(cap, max(1, 2 * built + 1))
                    build_table(pattern, built)
                if _table_error(pattern, q, budget.delta, strategy, m) <= target:
                    plan[pattern] = q
                    break
            else:
                raise InfeasibleTruncationError(
                    pattern, cap, f"({pattern}) exceeds the budget {target:.3e} at the search cap q={cap}")
    return TruncationPlan(plan)
