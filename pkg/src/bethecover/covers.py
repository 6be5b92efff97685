"""Labeled k-covers of a factor graph: build, validate, enumerate, sample.

A labeled cover assigns one permutation of {0..k-1} to every
(variable, factor) incidence of the base graph; copy c of a factor connects
to copy perm[c] of each variable in its scope.  Copy c of base variable i is
cover variable c*n + i.  The labeled specs are the uniform sample space for
the cover-average estimate of the Bethe partition function, counted as
(k!)^#incidences without quotienting by isomorphism.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import (
    CapacityError,
    Factor,
    FactorGraph,
    StructureError,
    incidences,
    permute_table_axes,
)
from .exact import MAX_PARTITION_VARS, partition_function
from .lattice import DEFAULT_TOL, NotLogSupermodularError, is_log_supermodular_factorization

MAX_ENUMERATED_COVERS = 10**7


@dataclass(frozen=True)
class CoverSpec:
    """One permutation per base incidence, in canonical incidence order."""

    k: int
    perms: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.k < 1:
            raise StructureError("fold count k must be at least 1")
        object.__setattr__(self, "perms", tuple(tuple(int(v) for v in p) for p in self.perms))
        for p in self.perms:
            if sorted(p) != list(range(self.k)):
                raise StructureError(f"{p!r} is not a permutation of 0..{self.k - 1}")

    def to_json_dict(self) -> dict:
        return {"k": self.k, "perms": [list(p) for p in self.perms]}

    @classmethod
    def from_json_dict(cls, doc) -> "CoverSpec":
        return cls(int(doc["k"]), tuple(tuple(int(v) for v in p) for p in doc["perms"]))


def spec_digest(spec: CoverSpec) -> str:
    """Short stable hash used to order and identify covers in reports."""
    blob = json.dumps(spec.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class CoverGraph:
    """A built cover: the lifted FactorGraph plus the covering homomorphism.

    ``factor_axis_perms[b][r]`` is the base scope position that bit r of the
    lifted factor b reads: lifted scopes are sorted by global variable index,
    so the stored table is the base table with its axes reordered to match
    (bit-identical whenever the copy indices are monotone along the scope).
    """

    graph: FactorGraph
    base: FactorGraph
    spec: CoverSpec
    var_map: tuple[int, ...]
    factor_map: tuple[int, ...]
    factor_axis_perms: tuple[tuple[int, ...], ...]


def identity_spec(g: FactorGraph, k: int) -> CoverSpec:
    """The spec whose cover is k disjoint copies of g."""
    ident = tuple(range(k))
    return CoverSpec(k, tuple(ident for _ in incidences(g)))


def build_cover(g: FactorGraph, spec: CoverSpec) -> CoverGraph:
    """Lift g along a labeled spec."""
    inc = incidences(g)
    if len(spec.perms) != len(inc):
        raise StructureError(
            f"spec has {len(spec.perms)} permutations for {len(inc)} incidences"
        )
    n, k = g.n, spec.k
    unary = tuple(g.unary[i] for _ in range(k) for i in range(n))
    var_map = tuple(i for _ in range(k) for i in range(n))

    factors = []
    factor_map = []
    axis_perms = []
    e = 0
    for a, fac in enumerate(g.factors):
        arity = len(fac.scope)
        perms = spec.perms[e : e + arity]
        e += arity
        for c in range(k):
            lifted = [perms[pos][c] * n + v for pos, v in enumerate(fac.scope)]
            order = tuple(sorted(range(arity), key=lifted.__getitem__))
            scope = tuple(lifted[r] for r in order)
            if order == tuple(range(arity)):
                table = fac.table
            else:
                table = type(fac.table)(permute_table_axes(fac.table.values, order))
            factors.append(Factor(scope, table))
            factor_map.append(a)
            axis_perms.append(order)
    graph = FactorGraph(k * n, unary, tuple(factors))
    return CoverGraph(graph, g, spec, var_map, tuple(factor_map), tuple(axis_perms))


def validate_cover(h: CoverGraph) -> bool:
    """Check the covering homomorphism from the built structure itself.

    True iff every base node has exactly k preimages and each cover node's
    neighborhood maps bijectively onto its image's neighborhood (multisets,
    since parallel factors are legal).
    """
    g, H, k = h.base, h.graph, h.spec.k
    if H.n != k * g.n or len(H.factors) != k * len(g.factors):
        return False
    if len(h.var_map) != H.n or len(h.factor_map) != len(H.factors):
        return False
    var_counts = [0] * g.n
    for w in range(H.n):
        i = h.var_map[w]
        if not 0 <= i < g.n:
            return False
        var_counts[i] += 1
    if any(c != k for c in var_counts):
        return False
    fac_counts = [0] * len(g.factors)
    for b in range(len(H.factors)):
        a = h.factor_map[b]
        if not 0 <= a < len(g.factors):
            return False
        fac_counts[a] += 1
    if any(c != k for c in fac_counts):
        return False
    # factor neighborhoods: the scope of a lifted factor must project 1-1
    # onto its base factor's scope
    for b, fac in enumerate(H.factors):
        base_scope = g.factors[h.factor_map[b]].scope
        if sorted(h.var_map[w] for w in fac.scope) != list(base_scope):
            return False
    # variable neighborhoods: incident factor multisets must match
    base_nbhd: list[list[int]] = [[] for _ in range(g.n)]
    for a, fac in enumerate(g.factors):
        for v in fac.scope:
            base_nbhd[v].append(a)
    cover_nbhd: list[list[int]] = [[] for _ in range(H.n)]
    for b, fac in enumerate(H.factors):
        for w in fac.scope:
            cover_nbhd[w].append(h.factor_map[b])
    for w in range(H.n):
        if sorted(cover_nbhd[w]) != sorted(base_nbhd[h.var_map[w]]):
            return False
    return True


def count_covers(g: FactorGraph, k: int) -> int:
    """(k!)^#incidences: the number of labeled k-cover specs."""
    return math.factorial(k) ** len(incidences(g))


def enumerate_covers(g: FactorGraph, k: int) -> Iterator[CoverSpec]:
    """Yield every labeled spec exactly once."""
    count = count_covers(g, k)
    if count > MAX_ENUMERATED_COVERS:
        raise CapacityError(
            f"{count} labeled {k}-covers exceed the enumeration bound {MAX_ENUMERATED_COVERS}"
        )
    perms = list(itertools.permutations(range(k)))
    for combo in itertools.product(perms, repeat=len(incidences(g))):
        yield CoverSpec(k, combo)


def sample_cover(g: FactorGraph, k: int, seed) -> CoverSpec:
    """Uniform labeled spec: one independent shuffle per incidence."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return CoverSpec(
        k, tuple(tuple(int(v) for v in rng.permutation(k)) for _ in incidences(g))
    )


@dataclass(frozen=True)
class CoverInequality:
    log_z_cover: float
    k_log_z_base: float
    holds: bool


def verify_cover_inequality(
    g: FactorGraph,
    spec: CoverSpec,
    tol: float = DEFAULT_TOL,
    log_z_base: float | None = None,
) -> CoverInequality:
    """Brute-force both sides of log Z(cover) <= k * log Z(base).

    Requires a log-supermodular factorization; the precondition failure
    carries the lattice witness.  ``log_z_base`` may be supplied to avoid
    recomputing the base partition function across a sweep.
    """
    w = is_log_supermodular_factorization(g)
    if not w.ok:
        raise NotLogSupermodularError("base model is not log-supermodular", w)
    if spec.k * g.n > MAX_PARTITION_VARS:
        raise CapacityError(
            f"cover has {spec.k * g.n} variables, over the oracle bound {MAX_PARTITION_VARS}"
        )
    if log_z_base is None:
        log_z_base = partition_function(g)
    log_z_cover = partition_function(build_cover(g, spec).graph)
    k_log = spec.k * log_z_base
    return CoverInequality(log_z_cover, k_log, log_z_cover <= k_log + tol)


@dataclass(frozen=True)
class CoverAverage:
    log_estimate: float  # (1/k) * log mean Z(cover)
    stderr: float
    num_covers: int
    exhaustive: bool


def estimate_bethe_by_covers(
    g: FactorGraph, k: int, samples: int | None = None, seed=0, exhaustive: bool | None = None
) -> CoverAverage:
    """Cover-average estimate of the Bethe partition function.

    Averages Z (linear domain) over labeled k-covers, then returns one k-th
    of the log.  When the full enumeration is no larger than the requested
    sampling effort (or when forced), the exact mean over all labeled covers
    is used and the standard error is zero; otherwise covers are sampled
    uniformly and a delta-method standard error is attached.
    """
    if k * g.n > MAX_PARTITION_VARS:
        raise CapacityError(
            f"{k}-covers have {k * g.n} variables, over the oracle bound {MAX_PARTITION_VARS}"
        )
    if samples is not None and samples < 1:
        raise ValueError("samples must be at least 1")
    count = count_covers(g, k)
    if exhaustive is None:
        exhaustive = count <= max(1024, samples or 0)
    if exhaustive:
        specs = enumerate_covers(g, k)
    else:
        if samples is None:
            raise ValueError("samples is required when not exhaustive")
        rng = np.random.default_rng(seed)
        specs = (sample_cover(g, k, rng) for _ in range(samples))
    logz = [partition_function(build_cover(g, s).graph) for s in specs]
    return average_log_estimate(logz, k, exhaustive)


def average_log_estimate(log_z_covers, k: int, exhaustive: bool) -> CoverAverage:
    """(1/k) * log of the mean of Z values given in the log domain.

    The delta-method standard error is computed on max-scaled values, so the
    scale cancels and overflow cannot occur.  Exhaustive averages carry a
    standard error of zero.
    """
    logz = np.asarray(log_z_covers, dtype=float)
    m = float(np.max(logz))
    if not np.isfinite(m):
        return CoverAverage(-math.inf, 0.0, int(logz.size), exhaustive)
    scaled = np.exp(logz - m)
    mean = float(scaled.mean())
    estimate = (m + math.log(mean)) / k
    if exhaustive or logz.size < 2:
        stderr = 0.0
    else:
        stderr = float(scaled.std(ddof=1)) / (mean * math.sqrt(logz.size) * k)
    return CoverAverage(estimate, stderr, int(logz.size), exhaustive)
