"""Boolean-lattice operators and inequality checkers.

All scans compare products in multiplicative form with a relative tolerance,
so tables with zero entries are handled exactly (0 <= 0 counts as holding).
Checkers return witnesses rather than booleans so that fuzz failures are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CapacityError,
    DimensionError,
    FactorGraph,
    PotentialTable,
    index_bits,
    table_tensor,
    tensor_table,
)

DEFAULT_TOL = 1e-9

MAX_SCAN_ARITY = 20


@dataclass(frozen=True)
class LatticeWitness:
    """Outcome of one inequality scan.

    ``witness`` holds the assignment pair/tuple that breaks the inequality
    (None when it holds or when the comparison is between sums); ``lhs`` and
    ``rhs`` are the two compared products.  ``where`` optionally names the
    offending component, e.g. a factor index.
    """

    kind: str  # "holds" | "violated"
    witness: tuple | None
    lhs: float
    rhs: float
    where: str | None = None

    @property
    def ok(self) -> bool:
        return self.kind == "holds"


class NotLogSupermodularError(ValueError):
    """Raised when an operation requires a log-supermodular input."""

    def __init__(self, message: str, witness: LatticeWitness):
        super().__init__(message)
        self.witness = witness


def _as_bits(x: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(v) for v in x)
    if any(v not in (0, 1) for v in out):
        raise ValueError(f"not a 0/1 vector: {x!r}")
    return out


def meet(x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
    """Componentwise minimum."""
    if len(x) != len(y):
        raise DimensionError(f"lengths differ: {len(x)} vs {len(y)}")
    return tuple(min(a, b) for a, b in zip(_as_bits(x), _as_bits(y)))


def join(x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
    """Componentwise maximum."""
    if len(x) != len(y):
        raise DimensionError(f"lengths differ: {len(x)} vs {len(y)}")
    return tuple(max(a, b) for a, b in zip(_as_bits(x), _as_bits(y)))


def order_stat(i: int, vectors: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Componentwise i-th largest of a tuple of 0/1 vectors.

    Component j is 1 iff at least i of the vectors have a 1 there; i=1 is the
    join of the collection and i=k the meet.
    """
    k = len(vectors)
    if not 1 <= i <= k:
        raise ValueError(f"order statistic {i} out of range for {k} vectors")
    rows = [_as_bits(v) for v in vectors]
    length = len(rows[0])
    if any(len(r) != length for r in rows):
        raise DimensionError("vectors have differing lengths")
    return tuple(int(sum(col) >= i) for col in zip(*rows))


def _leq(lhs: float, rhs: float, tol: float) -> bool:
    return lhs <= rhs + tol * max(lhs, rhs)


def _scan_pairs(values: np.ndarray, arity: int, tol: float, super_: bool):
    """First index pair breaking the (super/sub)modular product inequality."""
    idx = np.arange(values.size, dtype=np.int64)
    for ix in range(values.size):
        tail = idx[ix:]
        prod_xy = values[ix] * values[tail]
        prod_mj = values[ix & tail] * values[ix | tail]
        lhs, rhs = (prod_xy, prod_mj) if super_ else (prod_mj, prod_xy)
        bad = lhs > rhs + tol * np.maximum(lhs, rhs)
        if bad.any():
            iy = int(tail[np.argmax(bad)])
            return ix, iy
    return None


def _modularity_witness(t: PotentialTable, tol: float, super_: bool) -> LatticeWitness:
    if t.arity > MAX_SCAN_ARITY:
        raise CapacityError(f"arity {t.arity} exceeds the pair-scan bound {MAX_SCAN_ARITY}")
    hit = _scan_pairs(t.values, t.arity, tol, super_)
    if hit is None:
        return LatticeWitness("holds", None, 0.0, 0.0)
    ix, iy = hit
    x, y = index_bits(ix, t.arity), index_bits(iy, t.arity)
    prod_xy = float(t.values[ix] * t.values[iy])
    prod_mj = float(t.values[ix & iy] * t.values[ix | iy])
    if super_:
        return LatticeWitness("violated", (x, y), prod_xy, prod_mj)
    return LatticeWitness("violated", (x, y), prod_mj, prod_xy)


def is_log_supermodular(t: PotentialTable, tol: float = DEFAULT_TOL) -> LatticeWitness:
    """Scan all pairs for f(x)f(y) <= f(x^y)f(xvy)."""
    return _modularity_witness(t, tol, super_=True)


def is_log_submodular(t: PotentialTable, tol: float = DEFAULT_TOL) -> LatticeWitness:
    """Scan all pairs for f(x)f(y) >= f(x^y)f(xvy)."""
    return _modularity_witness(t, tol, super_=False)


def is_log_supermodular_factorization(g: FactorGraph, tol: float = DEFAULT_TOL) -> LatticeWitness:
    """Holds iff every factor table is log-supermodular (unary pass vacuously)."""
    for a, fac in enumerate(g.factors):
        w = is_log_supermodular(fac.table, tol)
        if not w.ok:
            return LatticeWitness(w.kind, w.witness, w.lhs, w.rhs, where=f"factor {a}")
    return LatticeWitness("holds", None, 0.0, 0.0)


def marginalize(t: PotentialTable, keep: Sequence[int]) -> PotentialTable:
    """Sum out every position not in ``keep``; result arity is len(keep)."""
    keep = sorted(set(int(p) for p in keep))
    if any(p < 0 or p >= t.arity for p in keep):
        raise DimensionError(f"keep positions {keep} out of range for arity {t.arity}")
    drop = tuple(p for p in range(t.arity) if p not in keep)
    summed = table_tensor(t.values, t.arity).sum(axis=drop) if drop else table_tensor(t.values, t.arity)
    return PotentialTable(tensor_table(summed))


@dataclass(frozen=True)
class FourFunctionsCheck:
    hypothesis: LatticeWitness
    conclusion: LatticeWitness


def check_four_functions(
    f1: PotentialTable,
    f2: PotentialTable,
    f3: PotentialTable,
    f4: PotentialTable,
    tol: float = DEFAULT_TOL,
) -> FourFunctionsCheck:
    """Scan premise f1(x)f2(y) <= f3(x^y)f4(xvy) and compare the four sums.

    Both clauses are reported so the implication (premise => sum inequality)
    can be fuzz-tested without assuming either side.
    """
    arity = f1.arity
    if any(f.arity != arity for f in (f2, f3, f4)):
        raise DimensionError("the four tables must share one arity")
    if arity > 12:
        raise CapacityError(f"arity {arity} exceeds the four-functions scan bound 12")
    idx = np.arange(f1.values.size, dtype=np.int64)
    hypothesis = LatticeWitness("holds", None, 0.0, 0.0)
    for ix in range(f1.values.size):
        lhs = f1.values[ix] * f2.values
        rhs = f3.values[ix & idx] * f4.values[ix | idx]
        bad = lhs > rhs + tol * np.maximum(lhs, rhs)
        if bad.any():
            iy = int(np.argmax(bad))
            hypothesis = LatticeWitness(
                "violated",
                (index_bits(ix, arity), index_bits(iy, arity)),
                float(lhs[iy]),
                float(rhs[iy]),
            )
            break
    s1, s2 = float(f1.values.sum()), float(f2.values.sum())
    s3, s4 = float(f3.values.sum()), float(f4.values.sum())
    kind = "holds" if _leq(s1 * s2, s3 * s4, tol) else "violated"
    conclusion = LatticeWitness(kind, None, s1 * s2, s3 * s4)
    return FourFunctionsCheck(hypothesis, conclusion)


@dataclass(frozen=True)
class VariantCheck:
    g_supermodular: LatticeWitness
    hypothesis: LatticeWitness
    conclusion: LatticeWitness


def _block_column_sums(kn: int, k: int, n: int) -> np.ndarray:
    """Per-component counts of set bits across the k blocks, for all indices."""
    idx = np.arange(1 << kn, dtype=np.int64)
    sums = np.zeros((idx.size, n), dtype=np.int64)
    for i in range(k):
        for j in range(n):
            sums[:, j] += (idx >> (i * n + j)) & 1
    return sums


def order_stat_indices(k: int, n: int) -> list[np.ndarray]:
    """Little-endian index of z^i(x^1..x^k) for every index of (x^1,..,x^k).

    The kn input bits are grouped as k consecutive blocks of n, block i
    holding x^{i+1}.
    """
    sums = _block_column_sums(k * n, k, n)
    out = []
    for i in range(1, k + 1):
        z = np.zeros(sums.shape[0], dtype=np.int64)
        for j in range(n):
            z |= (sums[:, j] >= i).astype(np.int64) << j
        out.append(z)
    return out


def check_variant_theorem(
    g: PotentialTable, fs: Sequence[PotentialTable], tol: float = DEFAULT_TOL
) -> VariantCheck:
    """Check the three clauses of the order-statistic sum inequality.

    g is a table over k*n bits (k consecutive blocks of n); fs holds the k
    tables over n bits.  Clauses: g log-supermodular; the pointwise premise
    g(x^1..x^k) <= prod_i f_i(z^i(x^1..x^k)); and sum g <= prod_i sum f_i.
    The plain product case g = prod_i g_i(x^i) recovers the 2k-function form.
    """
    k = len(fs)
    if k < 1:
        raise DimensionError("need at least one bound table")
    n = fs[0].arity
    if any(f.arity != n for f in fs):
        raise DimensionError("bound tables must share one arity")
    if g.arity != k * n:
        raise DimensionError(f"g has arity {g.arity}, expected k*n = {k * n}")
    if g.arity > MAX_SCAN_ARITY:
        raise CapacityError(f"arity {g.arity} exceeds the scan bound {MAX_SCAN_ARITY}")

    g_super = is_log_supermodular(g, tol)

    bound = np.ones(g.values.size)
    for f, zidx in zip(fs, order_stat_indices(k, n)):
        bound = bound * f.values[zidx]
    bad = g.values > bound + tol * np.maximum(g.values, bound)
    if bad.any():
        ig = int(np.argmax(bad))
        bits = index_bits(ig, g.arity)
        blocks = tuple(bits[i * n : (i + 1) * n] for i in range(k))
        hypothesis = LatticeWitness("violated", blocks, float(g.values[ig]), float(bound[ig]))
    else:
        hypothesis = LatticeWitness("holds", None, 0.0, 0.0)

    lhs = float(g.values.sum())
    rhs = float(np.prod([f.values.sum() for f in fs]))
    conclusion = LatticeWitness("holds" if _leq(lhs, rhs, tol) else "violated", None, lhs, rhs)
    return VariantCheck(g_super, hypothesis, conclusion)


def check_prod_lemma(
    g: PotentialTable, vectors: Sequence[Sequence[int]], tol: float = DEFAULT_TOL
) -> LatticeWitness:
    """Compare prod_i g(x^i) against prod_i g(z^i(x^1..x^k)) for one tuple.

    Requires g log-supermodular; the precondition failure carries the
    modularity witness.
    """
    w = is_log_supermodular(g, tol)
    if not w.ok:
        raise NotLogSupermodularError("g is not log-supermodular", w)
    k = len(vectors)
    rows = [_as_bits(v) for v in vectors]
    if any(len(r) != g.arity for r in rows):
        raise DimensionError("tuple entries must match g's arity")
    lhs = 1.0
    rhs = 1.0
    zs = []
    for i in range(1, k + 1):
        z = order_stat(i, rows)
        zs.append(z)
        rhs *= g(z)
    for r in rows:
        lhs *= g(r)
    if _leq(lhs, rhs, tol):
        return LatticeWitness("holds", None, lhs, rhs)
    return LatticeWitness("violated", tuple(rows), lhs, rhs)


def weakly_majorized(x: Sequence[float], y: Sequence[float], tol: float = 1e-12) -> bool:
    """True iff every prefix sum of desc-sorted x is <= that of y (abs tol)."""
    if len(x) != len(y):
        raise DimensionError(f"lengths differ: {len(x)} vs {len(y)}")
    xs = np.sort(np.asarray(x, dtype=float))[::-1]
    ys = np.sort(np.asarray(y, dtype=float))[::-1]
    return bool(np.all(np.cumsum(xs) <= np.cumsum(ys) + tol))
