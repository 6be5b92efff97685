"""Factor-graph data model for binary variables.

Potentials are dense nonnegative tables over {0,1}^m in little-endian
layout: entry ``values[sum(x[j] << j)]`` is the value at ``x``, where bit j
belongs to the j-th variable of the scope in ascending global order.  All
types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """An assignment, scope, or table has an incompatible length."""


class StructureError(ValueError):
    """A graph, edge list, cover, or model file is malformed."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class CapacityError(RuntimeError):
    """The requested computation exceeds the enumeration bounds."""


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Nonnegative function on {0,1}^m as a dense little-endian array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0 or v.size & (v.size - 1):
            raise DimensionError(f"table length {v.size} is not a power of two")
        if not np.all(np.isfinite(v)):
            raise ValueError("table entries must be finite")
        if np.any(v < 0):
            raise ValueError("table entries must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def arity(self) -> int:
        return self.values.size.bit_length() - 1

    def log_values(self) -> np.ndarray:
        """Elementwise log; zeros map to -inf."""
        with np.errstate(divide="ignore"):
            return np.log(self.values)

    def __call__(self, bits: Sequence[int]) -> float:
        if len(bits) != self.arity:
            raise DimensionError(f"expected {self.arity} bits, got {len(bits)}")
        return float(self.values[table_index(range(self.arity), bits)])


@dataclass(frozen=True, eq=False)
class Factor:
    """A potential attached to a strictly increasing variable scope."""

    scope: tuple[int, ...]
    table: PotentialTable


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Hypergraph model: n binary variables, unary potentials, factor list.

    Duplicate scopes are allowed (the factor list is a multiset); empty
    scopes are not.
    """

    n: int
    unary: tuple[PotentialTable, ...]
    factors: tuple[Factor, ...]

    def __post_init__(self):
        if self.n < 1:
            raise StructureError("graph needs at least one variable")
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.unary) != self.n:
            raise DimensionError(f"{len(self.unary)} unary tables for n={self.n}")
        for i, phi in enumerate(self.unary):
            if phi.arity != 1:
                raise DimensionError(f"unary table {i} has arity {phi.arity}")
        for a, fac in enumerate(self.factors):
            scope = fac.scope
            if not scope:
                raise StructureError(f"factor {a} has an empty scope")
            if any(v < 0 or v >= self.n for v in scope):
                raise StructureError(f"factor {a} scope {scope} out of range")
            if any(scope[j] >= scope[j + 1] for j in range(len(scope) - 1)):
                raise StructureError(f"factor {a} scope {scope} not strictly increasing")
            if fac.table.arity != len(scope):
                raise DimensionError(
                    f"factor {a}: table arity {fac.table.arity} != scope size {len(scope)}"
                )


def build_graph(n: int, unary=None, factors: Iterable = ()) -> FactorGraph:
    """Convenience constructor accepting raw arrays.

    ``unary`` is a list of length-2 sequences (default: all ones); ``factors``
    is an iterable of (scope, values) pairs or Factor instances.
    """
    if unary is None:
        unary = [(1.0, 1.0)] * n
    unary_tables = tuple(
        phi if isinstance(phi, PotentialTable) else PotentialTable(np.asarray(phi, dtype=float))
        for phi in unary
    )
    built = []
    for fac in factors:
        if isinstance(fac, Factor):
            built.append(fac)
        else:
            scope, values = fac
            table = values if isinstance(values, PotentialTable) else PotentialTable(np.asarray(values, dtype=float))
            built.append(Factor(tuple(scope), table))
    return FactorGraph(n, unary_tables, tuple(built))


def table_index(scope: Sequence[int], bits: Sequence[int]) -> int:
    """Little-endian index of ``bits`` into a table over ``scope``."""
    if len(scope) != len(bits):
        raise DimensionError(f"scope length {len(scope)} != bits length {len(bits)}")
    idx = 0
    for j, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"bit {j} is {b!r}, expected 0 or 1")
        idx |= b << j
    return idx


def index_bits(index: int, arity: int) -> tuple[int, ...]:
    """Inverse of table_index for a fixed arity."""
    if not 0 <= index < (1 << arity):
        raise DimensionError(f"index {index} out of range for arity {arity}")
    return tuple((index >> j) & 1 for j in range(arity))


def incidences(g: FactorGraph) -> list[tuple[int, int]]:
    """(factor index, variable) pairs: factors in graph order, scope ascending."""
    return [(a, v) for a, fac in enumerate(g.factors) for v in fac.scope]


def _check_assignment(g: FactorGraph, x: Sequence[int]) -> None:
    if len(x) != g.n:
        raise DimensionError(f"assignment length {len(x)} != n={g.n}")


def evaluate(g: FactorGraph, x: Sequence[int]) -> float:
    """f(x): the product of all unary and factor entries selected by x."""
    _check_assignment(g, x)
    out = 1.0
    for i, phi in enumerate(g.unary):
        out *= phi.values[x[i]]
    for fac in g.factors:
        out *= fac.table.values[table_index(fac.scope, [x[v] for v in fac.scope])]
    return float(out)


def log_evaluate(g: FactorGraph, x: Sequence[int]) -> float:
    """log f(x); -inf when any selected entry is zero."""
    _check_assignment(g, x)
    out = 0.0
    with np.errstate(divide="ignore"):
        for i, phi in enumerate(g.unary):
            out += float(np.log(phi.values[x[i]]))
        for fac in g.factors:
            idx = table_index(fac.scope, [x[v] for v in fac.scope])
            out += float(np.log(fac.table.values[idx]))
    return out


def table_tensor(values: np.ndarray, arity: int) -> np.ndarray:
    """View a little-endian table as a (2,)*arity tensor, axis j = bit j."""
    return np.asarray(values).reshape((2,) * arity, order="F")


def tensor_table(tensor: np.ndarray) -> np.ndarray:
    """Flatten a (2,)*m tensor back to little-endian table order."""
    return np.asarray(tensor).ravel(order="F")


def permute_table_axes(values: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Reindex a table so new bit r reads old bit axes[r]."""
    m = len(axes)
    if 1 << m != np.asarray(values).size:
        raise DimensionError("axes length does not match table arity")
    return tensor_table(np.transpose(table_tensor(values, m), axes=tuple(axes)))


def _validated_edges(n: int, edges: Iterable[Sequence[int]]) -> list[tuple[int, int]]:
    out = []
    for e in edges:
        if len(e) != 2:
            raise StructureError(f"edge {e!r} is not a pair")
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise StructureError(f"self-loop at vertex {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise StructureError(f"edge ({i},{j}) out of range for n={n}")
        out.append((min(i, j), max(i, j)))
    return out


def random_attractive_pairwise(
    n: int, edge_list: Iterable[Sequence[int]], strength: float, seed
) -> FactorGraph:
    """Random pairwise model whose factors are log-supermodular by construction.

    Unary log-potentials are uniform in [-strength, strength].  Each pairwise
    table draws four log-entries the same way, then lifts the diagonal just
    enough to restore log(00)+log(11) >= log(01)+log(10) and adds a further
    uniform boost from [0, strength].  Deterministic given the seed.
    """
    if strength < 0:
        raise ValueError("strength must be nonnegative")
    edges = _validated_edges(n, edge_list)
    rng = np.random.default_rng(seed)
    unary = tuple(PotentialTable(np.exp(rng.uniform(-strength, strength, size=2))) for _ in range(n))
    factors = []
    for i, j in edges:
        logs = rng.uniform(-strength, strength, size=4)
        deficit = (logs[1] + logs[2]) - (logs[0] + logs[3])
        boost = max(deficit, 0.0) + rng.uniform(0.0, strength)
        logs[0] += boost / 2
        logs[3] += boost / 2
        factors.append(Factor((i, j), PotentialTable(np.exp(logs))))
    return FactorGraph(n, unary, tuple(factors))


def to_json_dict(g: FactorGraph) -> dict:
    return {
        "n": g.n,
        "unary": [phi.values.tolist() for phi in g.unary],
        "factors": [
            {"scope": list(fac.scope), "table": fac.table.values.tolist()}
            for fac in g.factors
        ],
    }


def from_json_dict(doc) -> FactorGraph:
    if not isinstance(doc, dict):
        raise StructureError("model document must be an object")
    try:
        n = int(doc["n"])
        unary = [[float(v) for v in phi] for phi in doc["unary"]]
        factors = [
            ([int(v) for v in fac["scope"]], [float(v) for v in fac["table"]])
            for fac in doc.get("factors", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"bad model document: {exc}") from exc
    try:
        return build_graph(n, unary, factors)
    except (DimensionError, ValueError) as exc:
        raise StructureError(f"bad model document: {exc}") from exc


def save_model(g: FactorGraph, path) -> None:
    """Write the model file; floats round-trip exactly."""
    Path(path).write_text(json.dumps(to_json_dict(g)) + "\n", encoding="utf-8")


def load_model(path) -> FactorGraph:
    text = Path(path).read_text(encoding="utf-8")
    return from_json_dict(json.loads(text))
