"""Stratonovich multiple integrals and the error split of the triple case.

The Stratonovich approximation is the plain product sum over the same
coefficients, with no indicator corrections.  Comparing it with the Ito
sampler on one pool shows where the extra error of the Stratonovich route
comes from: the terms F, G and H computed by :func:`triple_error_terms`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoeffTable, build_table
from .exceptions import ConfigurationError
from .sampling import _batch, _unbatch, sample_multiple, sample_pair

_ALL_ZERO = {2: "00", 3: "000", 4: "0000", 5: "00000"}


@dataclass(frozen=True)
class StratSample:
    value: object
    pattern: str
    indices: tuple


def sample_strat(k: int, indices, q: int, pool, delta: float, table: CoeffTable | None = None) -> StratSample:
    """Unweighted Stratonovich integral of multiplicity ``k`` truncated at ``q``."""
    if k not in _ALL_ZERO:
        raise ConfigurationError(f"Stratonovich sampler covers k = 2..5, got {k}")
    pattern = _ALL_ZERO[k]
    indices = tuple(indices)
    if len(indices) != k:
        raise ConfigurationError(f"need {k} indices, got {len(indices)}")
    if k == 2:
        # the pair has no table; the Ito version minus its correction is the product sum
        ito = sample_pair("00", indices[0], indices[1], q, pool, delta)
        shift = delta / 2 if indices[0] == indices[1] else 0.0
        return StratSample(ito + shift, pattern, indices)
    value = sample_multiple(pattern, indices, q, pool, delta, table, corrected=False)
    return StratSample(value, pattern, indices)


def _triple_coeffs(q: int, delta: float, table: CoeffTable | None) -> np.ndarray:
    table = table or build_table("000", q)
    if table.pattern != "000" or table.q < q:
        raise ConfigurationError(f"need a (000) table with q >= {q}")
    return (table.truncate(q) if table.q > q else table).scaled(delta)


def triple_corrections(indices, q: int, pool, delta: float, table: CoeffTable | None = None):
    """Indicator terms removed by the Ito triple sampler, evaluated on ``pool``.

    Equal to the Stratonovich minus Ito value of ``(000)`` for the same pool.
    """
    i1, i2, i3 = indices
    c = _triple_coeffs(q, delta, table)
    z, batch = _batch(pool)
    out = np.zeros(z.shape[0])
    # axis order of c is (j1, j2, j3)
    if i1 == i2:
        out += z[:, : q + 1, i3] @ np.einsum("aab->b", c)
    if i2 == i3:
        out += z[:, : q + 1, i1] @ np.einsum("abb->a", c)
    if i1 == i3:
        out += z[:, : q + 1, i2] @ np.einsum("aba->b", c)
    return _unbatch(out, batch)


def triple_error_terms(q: int, delta: float = 1.0, table: CoeffTable | None = None) -> tuple[float, float, float]:
    """Mean-square gaps ``(F, G, H)`` between the dropped corrections and their limits.

    ``F`` concerns ``i1 = i2``, ``G`` concerns ``i2 = i3`` and ``H`` concerns
    ``i1 = i3``.  Each is a Gaussian variance, computed from coefficients.
    """
    if q < 0:
        raise ConfigurationError("q must be >= 0")
    c = _triple_coeffs(q, delta, table)
    # Legendre coefficients of (1/2) int int ds df (outer noise) and (1/2) int int df ds (inner noise)
    s = delta**1.5 / 4
    limit_f = np.zeros(max(q + 1, 2))
    limit_g = np.zeros(max(q + 1, 2))
    limit_f[:2] = s, s / math.sqrt(3)
    limit_g[:2] = s, -s / math.sqrt(3)
    part_f = np.zeros_like(limit_f)
    part_g = np.zeros_like(limit_g)
    part_f[: q + 1] = np.einsum("aab->b", c)
    part_g[: q + 1] = np.einsum("abb->a", c)
    f = float(((limit_f - part_f) ** 2).sum())
    g = float(((limit_g - part_g) ** 2).sum())
    h = float((np.einsum("aba->b", c) ** 2).sum())
    return f, g, h
