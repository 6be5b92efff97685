"""Brute-force oracle: exact partition function and marginals.

Enumeration is vectorized over blocks of assignment indices and accumulated
in the log domain, so zero potentials and large magnitudes are safe.  The
block reduction is order-insensitive to about 1e-12 relative.
"""

from __future__ import annotations

import math

import numpy as np

from .core import CapacityError, FactorGraph
from .bethe import PseudoMarginals

MAX_PARTITION_VARS = 26
MAX_MARGINAL_VARS = 20

_BLOCK = 1 << 22


class DegenerateDistributionError(RuntimeError):
    """The model is identically zero, so marginals are undefined."""


def logsumexp(a: np.ndarray) -> float:
    """log(sum(exp(a))) with a running max; -inf is the identity element."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    m = float(np.max(a))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(a - m))))


def factor_indices(scope, idx: np.ndarray) -> np.ndarray:
    """Little-endian table index of each global assignment index."""
    fidx = np.zeros(idx.shape, dtype=np.int64)
    for j, v in enumerate(scope):
        fidx |= ((idx >> v) & 1) << j
    return fidx


def _block_log_values(g: FactorGraph, idx: np.ndarray) -> np.ndarray:
    out = np.zeros(idx.size)
    for i, phi in enumerate(g.unary):
        lv = phi.log_values()
        out += np.where(((idx >> i) & 1).astype(bool), lv[1], lv[0])
    for fac in g.factors:
        out += fac.table.log_values()[factor_indices(fac.scope, idx)]
    return out


def assignment_log_values(g: FactorGraph) -> np.ndarray:
    """log f(x) for every assignment, little-endian indexed; one dense array."""
    if g.n > MAX_PARTITION_VARS:
        raise CapacityError(f"n={g.n} exceeds the enumeration bound {MAX_PARTITION_VARS}")
    return _block_log_values(g, np.arange(1 << g.n, dtype=np.int64))


def partition_function(g: FactorGraph) -> float:
    """log Z: log of the sum of f over all 2^n assignments; -inf if f == 0."""
    if g.n > MAX_PARTITION_VARS:
        raise CapacityError(f"n={g.n} exceeds the enumeration bound {MAX_PARTITION_VARS}")
    total = 1 << g.n
    pieces = []
    for start in range(0, total, _BLOCK):
        idx = np.arange(start, min(start + _BLOCK, total), dtype=np.int64)
        pieces.append(logsumexp(_block_log_values(g, idx)))
    return logsumexp(np.array(pieces))


def exact_marginals(g: FactorGraph) -> PseudoMarginals:
    """True marginals of f/Z; always a point of the local marginal polytope."""
    if g.n > MAX_MARGINAL_VARS:
        raise CapacityError(f"n={g.n} exceeds the marginal bound {MAX_MARGINAL_VARS}")
    logf = assignment_log_values(g)
    logz = logsumexp(logf)
    if not np.isfinite(logz):
        raise DegenerateDistributionError("partition function is zero")
    p = np.exp(logf - logz)
    p /= p.sum()
    idx = np.arange(p.size, dtype=np.int64)
    nodes = np.empty((g.n, 2))
    for i in range(g.n):
        nodes[i] = np.bincount((idx >> i) & 1, weights=p, minlength=2)
    factors = tuple(
        np.bincount(factor_indices(fac.scope, idx), weights=p, minlength=fac.table.values.size)
        for fac in g.factors
    )
    return PseudoMarginals(nodes, factors)
