"""Exact Fourier-Legendre coefficients of the iterated-integral kernels.

A weight pattern ``(l_1, ..., l_k)`` is written as a digit string, innermost
integration first, so ``"001"`` carries the weight ``(t - tau)`` on the
outermost variable.  Coefficient arrays are indexed the same way:
``table.entries[j_1, ..., j_k]`` is the coefficient usually written
``C_{j_k ... j_1}``.

On [-1, 1] the weight ``(t - tau)^l`` becomes ``(Delta/2)^l * (-(x+1))^l``, so
the normalised coefficient

    Cbar = int_{-1}^{1} P_{j_k} w_k int_{-1}^{x_k} ... int_{-1}^{x_2} P_{j_1} w_1 dx_1 ... dx_k

with ``w_l = (-(x+1))^{l_l}`` maps to the step coefficient by

    C = sqrt(prod(2 j_l + 1)) / 2^(k + sum l) * Delta^(k/2 + sum l) * Cbar.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigurationError,
    TableCompatibilityError,
    TableFormatError,
)
from .legendre import (
    DEGREE_CAP,
    RationalPoly,
    antiderivative_from_minus1,
    integrate_over_minus1_1,
    legendre,
    monomial_moments,
)

#: The twelve weight patterns that appear in the order-2.5 scheme.
PATTERNS = ("0", "1", "2", "00", "01", "10", "000", "001", "010", "100", "0000", "00000")

TABLE_FORMAT = "itoseries-coeff-table"
TABLE_VERSION = 1


def as_pattern(pattern) -> str:
    """Normalise ``"001"``, ``"(001)"`` or ``(0, 0, 1)`` to ``"001"``."""
    if isinstance(pattern, str):
        s = pattern.strip().strip("()")
    else:
        try:
            s = "".join(str(int(l)) for l in pattern)
        except (TypeError, ValueError):
            raise ConfigurationError(f"not a weight pattern: {pattern!r}") from None
    if s not in PATTERNS:
        raise ConfigurationError(f"inadmissible weight pattern ({s}); expected one of {PATTERNS}")
    return s


def weights(pattern) -> tuple[int, ...]:
    return tuple(int(c) for c in as_pattern(pattern))


def delta_power(pattern) -> Fraction:
    """Exponent ``s`` with ``C`` proportional to ``Delta**s``."""
    w = weights(pattern)
    return Fraction(len(w), 2) + sum(w)


@lru_cache(maxsize=None)
def _weight_poly(power: int) -> RationalPoly:
    # (-(x+1))**power
    p = RationalPoly.constant(1)
    for _ in range(power):
        p = p * RationalPoly((-1, -1))
    return p


@lru_cache(maxsize=None)
def _weighted_legendre(j: int, power: int) -> RationalPoly:
    return legendre(j) * _weight_poly(power)


def _check_indices(pattern: str, j) -> tuple[int, ...]:
    j = tuple(int(x) for x in j)
    if len(j) != len(pattern):
        raise ConfigurationError(f"pattern ({pattern}) needs {len(pattern)} indices, got {len(j)}")
    for x in j:
        if x < 0 or x > DEGREE_CAP:
            raise ConfigurationError(f"index {x} outside 0..{DEGREE_CAP}")
    return j


def cbar(pattern, j) -> Fraction:
    """Exact normalised coefficient ``Cbar`` for indices ``(j_1, ..., j_k)``."""
    pattern = as_pattern(pattern)
    j = _check_indices(pattern, j)
    w = weights(pattern)
    inner = RationalPoly.constant(1)
    for jl, wl in zip(j[:-1], w[:-1]):
        inner = antiderivative_from_minus1(_weighted_legendre(jl, wl) * inner)
    return integrate_over_minus1_1(_weighted_legendre(j[-1], w[-1]) * inner)


def scale_factor(pattern, j, delta: float = 1.0) -> float:
    """Positive factor mapping ``Cbar`` to ``C`` on a step of length ``delta``."""
    pattern = as_pattern(pattern)
    w = weights(pattern)
    prod = math.prod(2 * x + 1 for x in j)
    return math.sqrt(prod) / 2 ** (len(w) + sum(w)) * delta ** float(delta_power(pattern))


def scaled(pattern, j, delta: float) -> float:
    """Floating coefficient ``C`` for a step of length ``delta``."""
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    pattern = as_pattern(pattern)
    return scale_factor(pattern, j, delta) * float(cbar(pattern, j))


def kernel_norm_sq(pattern, delta: float | None = None):
    """``I_k``: squared L2 norm of the kernel over the step hypercube.

    Exact ``Fraction`` when ``delta`` is None (value at ``Delta = 1``).
    """
    pattern = as_pattern(pattern)
    w = weights(pattern)
    inner = RationalPoly.constant(1)
    for wl in w:
        inner = antiderivative_from_minus1(_weight_poly(2 * wl) * inner)
    unit = inner(Fraction(1)) / Fraction(2) ** (len(w) + 2 * sum(w))
    if delta is None:
        return unit
    return float(unit) * delta ** (len(w) + 2 * sum(w))


def _unit_scales(pattern: str, q: int) -> np.ndarray:
    k = len(pattern)
    root = np.sqrt(2 * np.arange(q + 1) + 1.0)
    out = np.ones((q + 1,) * k)
    for axis in range(k):
        shape = [1] * k
        shape[axis] = q + 1
        out = out * root.reshape(shape)
    return out / 2 ** (k + sum(weights(pattern)))


@dataclass(frozen=True, eq=False)
class CoeffTable:
    """Complete table of ``Cbar`` for ``0 <= j_1, ..., j_k <= q``.

    ``entries`` is an object array of ``Fraction`` with axis ``l`` holding
    ``j_{l+1}``.
    """

    pattern: str
    q: int
    entries: np.ndarray
    _unit: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        unit = _unit_scales(self.pattern, self.q) * np.vectorize(float, otypes=[float])(self.entries)
        unit.setflags(write=False)
        object.__setattr__(self, "_unit", unit)

    @property
    def k(self) -> int:
        return len(self.pattern)

    def __len__(self) -> int:
        return self.entries.size

    def __getitem__(self, j) -> Fraction:
        return self.entries[tuple(j)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoeffTable):
            return NotImplemented
        return (
            self.pattern == other.pattern
            and self.q == other.q
            and self.entries.shape == other.entries.shape
            and all(a == b for a, b in zip(self.entries.flat, other.entries.flat))
        )

    def items(self):
        for j in itertools.product(range(self.q + 1), repeat=self.k):
            yield j, self.entries[j]

    def scaled(self, delta: float = 1.0) -> np.ndarray:
        """Float array of ``C`` for step ``delta`` (same indexing as ``entries``)."""
        if delta == 1.0:
            return self._unit
        return self._unit * delta ** float(delta_power(self.pattern))

    def truncate(self, q: int) -> CoeffTable:
        if q > self.q:
            raise ConfigurationError(f"cannot truncate a q={self.q} table to q={q}")
        if q == self.q:
            return self
        return CoeffTable(self.pattern, q, self.entries[(slice(0, q + 1),) * self.k].copy())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.pattern}|{self.q}|".encode())
        for v in self.entries.flat:
            h.update(f"{v.numerator}/{v.denominator};".encode())
        return h.hexdigest()


def _compute_entries(pattern: str, q: int) -> np.ndarray:
    k = len(pattern)
    w = weights(pattern)
    entries = np.empty((q + 1,) * k, dtype=object)
    # prefixes[(j_1..j_r)] = iterated antiderivative through level r
    prefixes = {(): RationalPoly.constant(1)}
    for level in range(k - 1):
        nxt = {}
        for prefix, poly in prefixes.items():
            for j in range(q + 1):
                nxt[prefix + (j,)] = antiderivative_from_minus1(_weighted_legendre(j, w[level]) * poly)
        prefixes = nxt
    length = max(p.degree for p in prefixes.values()) + 1
    moments = [monomial_moments(_weighted_legendre(j, w[-1]), length) for j in range(q + 1)]
    for prefix, poly in prefixes.items():
        for j in range(q + 1):
            m = moments[j]
            entries[prefix + (j,)] = sum((c * m[d] for d, c in enumerate(poly.coeffs)), Fraction(0))
    return entries


_cache: dict[tuple[str, int], CoeffTable] = {}
_cache_lock = threading.Lock()


def build_table(pattern, q: int) -> CoeffTable:
    """Exact table of ``Cbar`` for all indices up to ``q`` (memoised)."""
    pattern = as_pattern(pattern)
    q = int(q)
    if q < 0 or q > DEGREE_CAP:
        raise ConfigurationError(f"q must lie in 0..{DEGREE_CAP}, got {q}")
    key = (pattern, q)
    with _cache_lock:
        hit = _cache.get(key)
        if hit is None:
            larger = [t for (p, qq), t in _cache.items() if p == pattern and qq > q]
            if larger:
                hit = min(larger, key=lambda t: t.q).truncate(q)
                _cache[key] = hit
    if hit is not None:
        return hit
    table = CoeffTable(pattern, q, _compute_entries(pattern, q))
    with _cache_lock:
        return _cache.setdefault(key, table)


def save_table(table: CoeffTable, path) -> None:
    """Write ``table`` as versioned JSON with rationals as ``"num/den"``."""
    doc = {
        "format": TABLE_FORMAT,
        "version": TABLE_VERSION,
        "pattern": table.pattern,
        "q": table.q,
        "index_order": "j_1 (innermost) first",
        "sha256": table.content_hash(),
        "entries": [
            [",".join(map(str, j)), f"{v.numerator}/{v.denominator}"] for j, v in table.items()
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _parse_fraction(text: str) -> Fraction:
    num, _, den = text.partition("/")
    if not den:
        raise ValueError(f"expected 'num/den', got {text!r}")
    return Fraction(int(num), int(den))


def load_table(path, pattern=None) -> CoeffTable:
    """Read a table written by :func:`save_table`.

    Raises :class:`TableFormatError` for malformed content and
    :class:`TableCompatibilityError` for a version or pattern mismatch.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TableFormatError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict) or doc.get("format") != TABLE_FORMAT:
        raise TableFormatError(f"{path}: not a coefficient table")
    if doc.get("version") != TABLE_VERSION:
        raise TableCompatibilityError(
            f"{path}: table version {doc.get('version')!r}, this library reads {TABLE_VERSION}"
        )
    try:
        tag = as_pattern(str(doc["pattern"]))
    except (KeyError, ConfigurationError) as exc:
        raise TableCompatibilityError(f"{path}: bad pattern tag {doc.get('pattern')!r}") from exc
    if pattern is not None and tag != as_pattern(pattern):
        raise TableCompatibilityError(f"{path}: table is for ({tag}), expected ({as_pattern(pattern)})")
    try:
        q = int(doc["q"])
        k = len(tag)
        entries = np.empty((q + 1,) * k, dtype=object)
        seen = 0
        for key, value in doc["entries"]:
            j = tuple(int(x) for x in key.split(","))
            if len(j) != k:
                raise ValueError(f"index {key!r} has wrong length")
            entries[j] = _parse_fraction(value)
            seen += 1
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise TableFormatError(f"{path}: {exc}") from exc
    if seen != entries.size or any(v is None for v in entries.flat):
        raise TableFormatError(f"{path}: expected {entries.size} entries, found {seen}")
    table = CoeffTable(tag, q, entries)
    if doc.get("sha256") != table.content_hash():
        raise TableFormatError(f"{path}: content hash mismatch")
    return table
