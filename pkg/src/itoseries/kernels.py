"""Wick-corrected tensor contraction, the inner loop of every sampler.

For a coefficient tensor ``C[j_1, ..., j_k]``, per-position Gaussian vectors
``z[:, l, :]`` and Wiener-component labels ``(i_1, ..., i_k)`` this evaluates

    sum_j C_j * sum_M (-1)^|M| prod_{(a,b) in M} 1{j_a = j_b} prod_{l not in M} z[:, l, j_l]

where ``M`` ranges over partial matchings whose pairs carry equal labels.
The empty matching alone gives the plain product sum.

Two interchangeable backends exist: a compiled one (``_wick``) and a numpy
one.  The compiled backend is used when it imports and the environment
variable ``ITOSERIES_BACKEND`` is not ``python``.
"""

from __future__ import annotations

import os
import string
from functools import lru_cache

import numpy as np

try:
    from . import _wick
except ImportError:  # pragma: no cover - depends on the build
    _wick = None


@lru_cache(maxsize=None)
def matchings(labels: tuple, corrected: bool = True) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All partial matchings of positions whose pairs share a label."""
    if not corrected:
        return ((),)
    k = len(labels)
    out = []

    def extend(start, used, pairs):
        out.append(tuple(pairs))
        for a in range(start, k):
            if a in used:
                continue
            for b in range(a + 1, k):
                if b in used or labels[a] != labels[b]:
                    continue
                extend(a + 1, used | {a, b}, pairs + [(a, b)])

    extend(0, frozenset(), [])
    return tuple(out)


def _check(coeffs, z):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    k = coeffs.ndim
    if z.ndim != 3 or z.shape[1] != k:
        raise ValueError(f"z must have shape (batch, {k}, q+1), got {z.shape}")
    if z.shape[2] < coeffs.shape[0]:
        raise ValueError("z has fewer rows than the coefficient tensor")
    return coeffs, np.ascontiguousarray(z[:, :, : coeffs.shape[0]])


def wick_numpy(coeffs, z, labels, corrected=True):
    coeffs, z = _check(coeffs, z)
    k = coeffs.ndim
    letters = string.ascii_lowercase[:k]
    out = np.zeros(z.shape[0])
    for pairs in matchings(tuple(labels), corrected):
        sub = list(letters)
        paired = set()
        for a, b in pairs:
            sub[b] = sub[a]
            paired.update((a, b))
        operands = [coeffs]
        terms = ["".join(sub)]
        for l in range(k):
            if l not in paired:
                operands.append(z[:, l, :])
                terms.append("z" + sub[l])
        if len(operands) > 1:
            term = np.einsum(",".join(terms) + "->z", *operands, optimize=True)
        else:
            # every position paired: a constant
            term = np.einsum(terms[0] + "->", coeffs)
        out += (-1) ** len(pairs) * term
    return out


def term_list(coeffs, labels, corrected=True):
    """Flatten the Wick sum into ``(coef, pos)`` for :func:`wick_terms`.

    ``pos`` holds offsets into a row of ``z`` flattened as ``l * (q+1) + j``;
    the extra offset ``k * (q+1)`` addresses a constant 1.0 used as padding.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = coeffs.ndim
    q1 = coeffs.shape[0]
    index = np.argwhere(coeffs != 0.0)
    values = coeffs[tuple(index.T)]
    pad = k * q1
    coef_parts, pos_parts = [], []
    for pairs in matchings(tuple(labels), corrected):
        keep = np.ones(len(index), dtype=bool)
        paired = set()
        for a, b in pairs:
            keep &= index[:, a] == index[:, b]
            paired.update((a, b))
        if not keep.any():
            continue
        pos = np.full((int(keep.sum()), k), pad, dtype=np.int64)
        col = 0
        for l in range(k):
            if l not in paired:
                pos[:, col] = l * q1 + index[keep, l]
                col += 1
        coef_parts.append((-1) ** len(pairs) * values[keep])
        pos_parts.append(pos)
    if not coef_parts:
        return np.zeros(0), np.zeros((0, k), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(coef_parts)), np.ascontiguousarray(np.concatenate(pos_parts))


def flatten_z(z, q1):
    """``(batch, k, >=q1)`` Gaussian vectors to padded rows for :func:`wick_terms`."""
    z = np.asarray(z, dtype=np.float64)[:, :, :q1]
    flat = np.empty((z.shape[0], z.shape[1] * q1 + 1))
    flat[:, :-1] = z.reshape(z.shape[0], z.shape[1] * q1)
    flat[:, -1] = 1.0
    return flat


def flatten_zt(z, q1):
    """Like :func:`flatten_z` but slot-major, ``(k * q1 + 1, batch)``."""
    z = np.asarray(z, dtype=np.float64)[:, :, :q1]
    flat = np.empty((z.shape[1] * q1 + 1, z.shape[0]))
    flat[:-1] = z.reshape(z.shape[0], z.shape[1] * q1).T
    flat[-1] = 1.0
    return flat


class WickPlan:
    """Precomputed Wick sum for one coefficient tensor and label tuple."""

    def __init__(self, coeffs, labels, corrected=True):
        self.coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        self.labels = tuple(labels)
        self.corrected = corrected
        self.q1 = self.coeffs.shape[0]
        if self.coeffs.ndim > 5:
            raise ValueError("compiled kernel supports at most 5 positions")
        self._terms = None

    @property
    def terms(self):
        if self._terms is None:
            self._terms = term_list(self.coeffs, self.labels, self.corrected)
        return self._terms

    def __call__(self, z, backend=None):
        backend = backend or BACKEND
        if backend == "python":
            return wick_numpy(self.coeffs, z, self.labels, self.corrected)
        if _wick is None:
            raise ImportError("compiled kernel is not available")
        coef, pos = self.terms
        return _wick.wick_terms_t(coef, pos, flatten_zt(z, self.q1))


def wick_compiled(coeffs, z, labels, corrected=True):
    return WickPlan(coeffs, labels, corrected)(z, backend="compiled")


BACKENDS = {"python": wick_numpy}
if _wick is not None:
    BACKENDS["compiled"] = wick_compiled

BACKEND = "compiled" if _wick is not None and os.environ.get("ITOSERIES_BACKEND") != "python" else "python"


def wick_contract(coeffs, z, labels, corrected=True, backend=None):
    """Dispatch to the selected backend (see module docstring)."""
    return BACKENDS[backend or BACKEND](coeffs, z, labels, corrected)
