"""Model builders: independent-set indicators, bipartite flips, Ising.

The independent-set indicator uses exact 0/1 tables (hard constraints), so
its partition function counts independent sets.  Its factors are
log-submodular; flipping one side of a bipartition turns the model into a
log-supermodular one with the same partition function.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .core import (
    Factor,
    FactorGraph,
    PotentialTable,
    StructureError,
    _validated_edges,
    table_tensor,
    tensor_table,
)

_INDEPENDENT_EDGE_TABLE = (1.0, 1.0, 1.0, 0.0)  # (1 - x_i * x_j), little-endian


def independent_set_model(n: int, edges: Iterable[Sequence[int]]) -> FactorGraph:
    """Indicator model whose evaluate() is 1 exactly on independent sets."""
    pairs = _validated_edges(n, edges)
    if len(set(pairs)) != len(pairs):
        raise StructureError("parallel edges: the graph must be simple")
    unary = tuple(PotentialTable(np.ones(2)) for _ in range(n))
    factors = tuple(
        Factor(pair, PotentialTable(np.array(_INDEPENDENT_EDGE_TABLE))) for pair in pairs
    )
    return FactorGraph(n, unary, factors)


def bipartition(n: int, edges: Iterable[Sequence[int]]) -> tuple[set[int], set[int]]:
    """2-color by BFS from vertex 0 upward; deterministic.

    Raises StructureError carrying an odd-cycle witness (a vertex list) when
    the graph is not bipartite.  Isolated vertices land in the first part.
    """
    pairs = _validated_edges(n, edges)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in pairs:
        adj[i].append(j)
        adj[j].append(i)
    color = [-1] * n
    parent = [-1] * n
    for root in range(n):
        if color[root] != -1:
            continue
        color[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in sorted(adj[u]):
                if color[v] == -1:
                    color[v] = 1 - color[u]
                    parent[v] = u
                    queue.append(v)
                elif color[v] == color[u]:
                    raise StructureError(
                        f"graph is not bipartite: edge ({u},{v}) closes an odd cycle",
                        witness=_odd_cycle(u, v, parent),
                    )
    return {i for i in range(n) if color[i] == 0}, {i for i in range(n) if color[i] == 1}


def _odd_cycle(u: int, v: int, parent: list[int]) -> tuple[int, ...]:
    """Cycle through the offending edge (u,v) using BFS parent pointers."""
    seen = {}
    a = u
    while a != -1:
        seen[a] = True
        a = parent[a]
    b = v
    while b not in seen:
        b = parent[b]
    path_u = []
    a = u
    while a != b:
        path_u.append(a)
        a = parent[a]
    path_v = []
    c = v
    while c != b:
        path_v.append(c)
        c = parent[c]
    return tuple(path_u + [b] + path_v[::-1])


def flip_variables(g: FactorGraph, flip: set[int]) -> FactorGraph:
    """Change of variables y_i = 1 - x_i on the given set; Z is unchanged."""
    unary = tuple(
        PotentialTable(phi.values[::-1]) if i in flip else phi for i, phi in enumerate(g.unary)
    )
    factors = []
    for fac in g.factors:
        tensor = table_tensor(fac.table.values, len(fac.scope))
        for pos, v in enumerate(fac.scope):
            if v in flip:
                tensor = np.flip(tensor, axis=pos)
        factors.append(Factor(fac.scope, PotentialTable(tensor_table(tensor))))
    return FactorGraph(g.n, unary, tuple(factors))


def flip_bipartite(
    g: FactorGraph, part_a: Iterable[int] | None = None, part_b: Iterable[int] | None = None
) -> FactorGraph:
    """Flip the B side of a bipartition of a pairwise model.

    For independent-set models the result is log-supermodular with the same
    partition function.  The bipartition is validated when supplied and
    discovered by BFS 2-coloring otherwise.
    """
    edges = []
    for a, fac in enumerate(g.factors):
        if len(fac.scope) != 2:
            raise StructureError(f"factor {a} is not pairwise; cannot flip a bipartition")
        edges.append(fac.scope)
    if (part_a is None) != (part_b is None):
        raise StructureError("supply both parts or neither")
    if part_a is None:
        _, side_b = bipartition(g.n, edges)
    else:
        side_a, side_b = set(part_a), set(part_b)
        if side_a & side_b or side_a | side_b != set(range(g.n)):
            raise StructureError("parts must partition the vertex set")
        for i, j in edges:
            if (i in side_a) == (j in side_a):
                raise StructureError(f"edge ({i},{j}) does not cross the bipartition")
    return flip_variables(g, side_b)


def ising_model(n: int, edges: Iterable[Sequence[int]], couplings, fields) -> FactorGraph:
    """Ferromagnetic Ising model in binary coding.

    Pairwise tables put exp(J) on agreeing configurations and exp(-J) on
    disagreeing ones; unary tables are exp(-h), exp(+h).  Couplings must be
    nonnegative (that is what makes every factor log-supermodular);
    ``couplings`` and ``fields`` may be scalars or per-edge / per-vertex
    sequences.
    """
    pairs = _validated_edges(n, edges)
    j = np.broadcast_to(np.asarray(couplings, dtype=float), (len(pairs),))
    h = np.broadcast_to(np.asarray(fields, dtype=float), (n,))
    if np.any(j < 0):
        raise ValueError("ferromagnetic couplings must be nonnegative")
    unary = tuple(PotentialTable(np.array([np.exp(-hi), np.exp(hi)])) for hi in h)
    factors = tuple(
        Factor(
            pair,
            PotentialTable(np.array([np.exp(ji), np.exp(-ji), np.exp(-ji), np.exp(ji)])),
        )
        for pair, ji in zip(pairs, j)
    )
    return FactorGraph(n, unary, factors)


def graph_from_json_dict(doc) -> tuple[int, list[tuple[int, int]], list[int] | None]:
    """Parse the edge-list file format: n, edges, optional A-side partition."""
    if not isinstance(doc, dict):
        raise StructureError("graph document must be an object")
    try:
        n = int(doc["n"])
        edges = [(int(e[0]), int(e[1])) for e in doc.get("edges", [])]
        partition = doc.get("partition")
        if partition is not None:
            partition = [int(v) for v in partition]
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"bad graph document: {exc}") from exc
    _validated_edges(n, edges)
    if partition is not None and any(v < 0 or v >= n for v in partition):
        raise StructureError("partition lists an out-of-range vertex")
    return n, edges, partition
