"""Bethe free energy on the local marginal polytope and sum-product BP.

The optimizer returns a lower estimate of the Bethe partition function: it
reports the value of the free energy at some explicitly feasible point, so a
reported violation of an inequality can never be an optimizer artifact.
Entropy terms use the 0*log(0) = 0 convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import DimensionError, FactorGraph, permute_table_axes, table_tensor, tensor_table

if TYPE_CHECKING:  # pragma: no cover
    from .covers import CoverGraph

INTERIOR_MIN = 1e-6
POLYTOPE_TOL = 1e-9


class PolytopeError(ValueError):
    """Pseudomarginals fall outside the local marginal polytope."""


class BoundaryError(ValueError):
    """Pseudomarginals are too close to the polytope boundary."""


class NumericalDegeneracyError(RuntimeError):
    """BP produced an all-zero message (conflicting hard constraints)."""


@dataclass(eq=False)
class PseudoMarginals:
    """Per-variable 2-vectors and per-factor little-endian tables."""

    nodes: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.nodes = np.array(self.nodes, dtype=np.float64)
        self.factors = tuple(np.array(f, dtype=np.float64) for f in self.factors)

    def copy(self) -> "PseudoMarginals":
        return PseudoMarginals(self.nodes, self.factors)

    def to_json_dict(self) -> dict:
        return {
            "nodes": [row.tolist() for row in self.nodes],
            "factors": [f.tolist() for f in self.factors],
        }

    @classmethod
    def from_json_dict(cls, doc) -> "PseudoMarginals":
        return cls(np.asarray(doc["nodes"], dtype=float),
                   tuple(np.asarray(f, dtype=float) for f in doc["factors"]))


@dataclass(eq=False)
class MessageSet:
    """Normalized 2-vector messages, one row per (variable, factor) incidence."""

    var_to_factor: np.ndarray
    factor_to_var: np.ndarray


@dataclass
class PolytopeReport:
    ok: bool
    violations: list[str]


@dataclass(eq=False)
class BPResult:
    messages: MessageSet
    beliefs: PseudoMarginals
    converged: bool
    iterations: int


@dataclass(eq=False)
class BetheOptimum:
    tau: PseudoMarginals
    value: float
    best_effort: bool  # True when no BP restart converged


def validate_polytope(tau: PseudoMarginals, g: FactorGraph, tol: float = POLYTOPE_TOL) -> PolytopeReport:
    """Check nonnegativity, normalization, and local consistency."""
    nodes = np.asarray(tau.nodes, dtype=float)
    if nodes.shape != (g.n, 2):
        return PolytopeReport(False, [f"node marginals have shape {nodes.shape}, expected ({g.n}, 2)"])
    if len(tau.factors) != len(g.factors):
        return PolytopeReport(
            False, [f"{len(tau.factors)} factor marginals for {len(g.factors)} factors"]
        )
    violations: list[str] = []
    for a, (fac, t) in enumerate(zip(g.factors, tau.factors)):
        if np.asarray(t).shape != (fac.table.values.size,):
            violations.append(f"factor {a} marginal has size {np.asarray(t).size}, expected {fac.table.values.size}")
    if violations:
        return PolytopeReport(False, violations)

    if nodes.min() < -tol:
        i = int(np.argmin(nodes.min(axis=1)))
        violations.append(f"negative node marginal entry at variable {i}")
    for a, t in enumerate(tau.factors):
        if np.asarray(t).min() < -tol:
            violations.append(f"negative factor marginal entry at factor {a}")
    sums = nodes.sum(axis=1)
    for i in range(g.n):
        if abs(sums[i] - 1.0) > tol:
            violations.append(f"variable {i} marginal sums to {sums[i]!r}")
    for a, fac in enumerate(g.factors):
        tensor = table_tensor(np.asarray(tau.factors[a], dtype=float), len(fac.scope))
        for pos, i in enumerate(fac.scope):
            axes = tuple(p for p in range(len(fac.scope)) if p != pos)
            marg = tensor.sum(axis=axes) if axes else tensor
            err = float(np.max(np.abs(marg - nodes[i])))
            if err > tol:
                violations.append(f"factor {a} marginal onto variable {i} differs by {err:.3g}")
    return PolytopeReport(not violations, violations)


def _product_marginal(nodes: np.ndarray, scope: Sequence[int]) -> np.ndarray:
    """prod_{i in scope} tau_i(x_i) over all scope configs, little-endian."""
    q = nodes[scope[0]]
    for v in scope[1:]:
        q = np.multiply.outer(q, nodes[v])
    return q.ravel(order="F")


def _bethe_value(g: FactorGraph, nodes: np.ndarray, factors: Sequence[np.ndarray]) -> float:
    """Raw Bethe functional; no polytope validation, 0*log(0) = 0."""
    total = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, phi in enumerate(g.unary):
            t = nodes[i]
            logphi = phi.log_values()
            total += float(np.sum(np.where(t > 0, t * logphi, 0.0)))
            total -= float(np.sum(np.where(t > 0, t * np.log(t), 0.0)))
        for a, fac in enumerate(g.factors):
            t = np.asarray(factors[a], dtype=float)
            logpsi = fac.table.log_values()
            total += float(np.sum(np.where(t > 0, t * logpsi, 0.0)))
            q = _product_marginal(nodes, fac.scope)
            logq = np.log(np.maximum(q, 1e-300))
            logt = np.log(np.where(t > 0, t, 1.0))
            total -= float(np.sum(np.where(t > 0, t * (logt - logq), 0.0)))
    return total


def bethe_free_energy(g: FactorGraph, tau: PseudoMarginals, tol: float = POLYTOPE_TOL) -> float:
    """log of the Bethe approximation at tau; -inf if tau puts mass on a zero."""
    report = validate_polytope(tau, g, tol)
    if not report.ok:
        raise PolytopeError(report.violations[0])
    return _bethe_value(g, tau.nodes, tau.factors)


def uniform_marginals(g: FactorGraph) -> PseudoMarginals:
    """The uniform point of the polytope; feasible for every graph."""
    nodes = np.full((g.n, 2), 0.5)
    factors = tuple(
        np.full(fac.table.values.size, 1.0 / fac.table.values.size) for fac in g.factors
    )
    return PseudoMarginals(nodes, factors)


class _Structure:
    """Incidence bookkeeping shared by the BP loops."""

    def __init__(self, g: FactorGraph):
        self.inc: list[tuple[int, int, int]] = []  # (factor, variable, scope position)
        self.var_incs: list[list[int]] = [[] for _ in range(g.n)]
        self.fac_incs: list[list[int]] = []
        for a, fac in enumerate(g.factors):
            rows = []
            for pos, v in enumerate(fac.scope):
                e = len(self.inc)
                self.inc.append((a, v, pos))
                self.var_incs[v].append(e)
                rows.append(e)
            self.fac_incs.append(rows)
        self.tensors = [table_tensor(fac.table.values, len(fac.scope)) for fac in g.factors]
        self.n_inc = len(self.inc)


def _normalize_rows(msgs: np.ndarray, what: str) -> np.ndarray:
    if msgs.size == 0:
        return msgs
    s = msgs.sum(axis=1)
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise NumericalDegeneracyError(f"all-zero {what} message")
    return msgs / s[:, None]


def _update_var_to_factor(g: FactorGraph, st: _Structure, fv: np.ndarray) -> np.ndarray:
    out = np.empty((st.n_inc, 2))
    for i in range(g.n):
        incs = st.var_incs[i]
        phi = g.unary[i].values
        for e in incs:
            m = phi.copy()
            for e2 in incs:
                if e2 != e:
                    m = m * fv[e2]
            out[e] = m
    return out


def _update_factor_to_var(g: FactorGraph, st: _Structure, vf: np.ndarray) -> np.ndarray:
    out = np.empty((st.n_inc, 2))
    for a in range(len(g.factors)):
        incs = st.fac_incs[a]
        arity = len(incs)
        for pos, e in enumerate(incs):
            tmp = st.tensors[a]
            for pos2, e2 in enumerate(incs):
                if pos2 == pos:
                    continue
                shape = [1] * arity
                shape[pos2] = 2
                tmp = tmp * vf[e2].reshape(shape)
            axes = tuple(p for p in range(arity) if p != pos)
            out[e] = tmp.sum(axis=axes) if axes else tmp
    return out


def _beliefs_from_messages(g: FactorGraph, st: _Structure, vf: np.ndarray, fv: np.ndarray) -> PseudoMarginals:
    nodes = np.empty((g.n, 2))
    for i in range(g.n):
        b = g.unary[i].values.copy()
        for e in st.var_incs[i]:
            b = b * fv[e]
        s = b.sum()
        if not np.isfinite(s) or s <= 0:
            raise NumericalDegeneracyError(f"degenerate belief at variable {i}")
        nodes[i] = b / s
    factors = []
    for a in range(len(g.factors)):
        incs = st.fac_incs[a]
        arity = len(incs)
        tmp = st.tensors[a]
        for pos, e in enumerate(incs):
            shape = [1] * arity
            shape[pos] = 2
            tmp = tmp * vf[e].reshape(shape)
        flat = tensor_table(tmp)
        s = flat.sum()
        if not np.isfinite(s) or s <= 0:
            raise NumericalDegeneracyError(f"degenerate belief at factor {a}")
        factors.append(flat / s)
    return PseudoMarginals(nodes, tuple(factors))


def _initial_messages(st: _Structure, init) -> tuple[np.ndarray, np.ndarray]:
    shape = (st.n_inc, 2)
    if init is None:
        return np.full(shape, 0.5), np.full(shape, 0.5)
    if isinstance(init, MessageSet):
        vf = np.array(init.var_to_factor, dtype=float)
        fv = np.array(init.factor_to_var, dtype=float)
        if vf.shape != shape or fv.shape != shape:
            raise DimensionError(f"message arrays must have shape {shape}")
        return _normalize_rows(vf, "initial"), _normalize_rows(fv, "initial")
    rng = np.random.default_rng(init)
    vf = _normalize_rows(rng.uniform(0.05, 1.0, size=shape), "initial")
    fv = _normalize_rows(rng.uniform(0.05, 1.0, size=shape), "initial")
    return vf, fv


def run_bp(
    g: FactorGraph,
    init=None,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> BPResult:
    """Synchronous sum-product with damped message updates.

    ``init`` may be None (uniform messages), an integer seed for a random
    start, or a MessageSet.  Converged iff the largest message change drops
    below ``tol``; beliefs come from the final messages either way.
    """
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    st = _Structure(g)
    vf, fv = _initial_messages(st, init)
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        new_vf = _normalize_rows(_update_var_to_factor(g, st, fv), "variable-to-factor")
        new_fv = _normalize_rows(_update_factor_to_var(g, st, vf), "factor-to-variable")
        next_vf = (1.0 - damping) * new_vf + damping * vf
        next_fv = (1.0 - damping) * new_fv + damping * fv
        if st.n_inc:
            delta = max(
                float(np.max(np.abs(next_vf - vf))), float(np.max(np.abs(next_fv - fv)))
            )
        else:
            delta = 0.0
        vf, fv = next_vf, next_fv
        if delta < tol:
            converged = True
            break
    beliefs = _beliefs_from_messages(g, st, vf, fv)
    return BPResult(MessageSet(vf, fv), beliefs, converged, iterations)


def _layout(g: FactorGraph) -> tuple[list[int], int]:
    """Flat-vector offsets: 2n node entries, then each factor block."""
    offsets = [2 * g.n]
    for fac in g.factors:
        offsets.append(offsets[-1] + fac.table.values.size)
    return offsets, offsets[-1]


def _flatten(g: FactorGraph, tau: PseudoMarginals) -> np.ndarray:
    return np.concatenate([np.asarray(tau.nodes, dtype=float).ravel()]
                          + [np.asarray(f, dtype=float) for f in tau.factors])


def _unflatten(g: FactorGraph, x: np.ndarray) -> PseudoMarginals:
    offsets, _ = _layout(g)
    nodes = x[: 2 * g.n].reshape(g.n, 2)
    factors = tuple(x[offsets[a] : offsets[a + 1]] for a in range(len(g.factors)))
    return PseudoMarginals(nodes, factors)


def _value_flat(g: FactorGraph, x: np.ndarray) -> float:
    offsets, _ = _layout(g)
    nodes = x[: 2 * g.n].reshape(g.n, 2)
    factors = [x[offsets[a] : offsets[a + 1]] for a in range(len(g.factors))]
    return _bethe_value(g, nodes, factors)


def _constraint_matrix(g: FactorGraph) -> np.ndarray:
    offsets, dim = _layout(g)
    rows = []
    for i in range(g.n):
        row = np.zeros(dim)
        row[2 * i : 2 * i + 2] = 1.0
        rows.append(row)
    for a, fac in enumerate(g.factors):
        size = fac.table.values.size
        bits = np.arange(size)
        for pos, i in enumerate(fac.scope):
            sel = ((bits >> pos) & 1).astype(bool)
            for xi in (0, 1):
                row = np.zeros(dim)
                row[offsets[a] : offsets[a + 1]][sel == bool(xi)] = 1.0
                row[2 * i + xi] = -1.0
                rows.append(row)
    return np.array(rows)


def _tangent_basis(g: FactorGraph) -> np.ndarray:
    """Orthonormal basis of the polytope's tangent space (null space of A)."""
    a = _constraint_matrix(g)
    _, s, vh = np.linalg.svd(a)
    cutoff = (s.max() if s.size else 0.0) * max(a.shape) * np.finfo(float).eps
    rank = int(np.sum(s > cutoff))
    return vh[rank:].T


def _fd_gradient(g: FactorGraph, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.empty(x.size)
    f0 = None
    for r in range(x.size):
        xp = x.copy()
        xp[r] += h
        fp = _value_flat(g, xp)
        if x[r] >= h:
            xm = x.copy()
            xm[r] -= h
            grad[r] = (fp - _value_flat(g, xm)) / (2.0 * h)
        else:
            if f0 is None:
                f0 = _value_flat(g, x)
            grad[r] = (fp - f0) / h
    return grad


def stationarity_check(g: FactorGraph, tau: PseudoMarginals, step: float = 1e-6) -> float:
    """Max-norm of the finite-difference gradient projected on the polytope.

    Requires tau strictly interior (all entries >= 1e-6) so that central
    differences stay in the nonnegative orthant.
    """
    report = validate_polytope(tau, g)
    if not report.ok:
        raise PolytopeError(report.violations[0])
    x0 = _flatten(g, tau)
    if x0.min() < INTERIOR_MIN:
        raise BoundaryError(
            f"tau entry {x0.min():.3g} below the interior threshold {INTERIOR_MIN}"
        )
    if not np.isfinite(_value_flat(g, x0)):
        raise ValueError("Bethe value is -inf at tau; gradient undefined")
    basis = _tangent_basis(g)
    grad = _fd_gradient(g, x0, step)
    proj = basis @ (basis.T @ grad)
    return float(np.max(np.abs(proj))) if proj.size else 0.0


def _ascend(
    g: FactorGraph,
    x0: np.ndarray,
    basis: np.ndarray,
    max_iter: int = 500,
    fd_step: float = 1e-6,
    gtol: float = 1e-7,
) -> tuple[np.ndarray, float]:
    """Projected finite-difference ascent with step halving.

    Moves only inside the affine hull (directions from ``basis``), so equality
    constraints are preserved; nonnegativity is enforced by the line search.
    """
    x = x0.copy()
    fx = _value_flat(g, x)
    step = 0.25
    for _ in range(max_iter):
        d = basis @ (basis.T @ _fd_gradient(g, x, fd_step))
        if not np.all(np.isfinite(d)) or float(np.max(np.abs(d))) < gtol:
            break
        accepted = False
        while step >= 1e-12:
            cand = x + step * d
            if cand.min() >= 0.0:
                fc = _value_flat(g, cand)
                if fc > fx:
                    x, fx = cand, fc
                    accepted = True
                    step = min(step * 2.0, 1.0)
                    break
            step /= 2.0
        if not accepted:
            break
    return x, fx


def _has_zero_potential(g: FactorGraph) -> bool:
    return any(phi.values.min() == 0.0 for phi in g.unary) or any(
        fac.table.values.min() == 0.0 for fac in g.factors
    )


def optimize_bethe(
    g: FactorGraph,
    restarts: int = 20,
    seed=0,
    *,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10000,
    refine_iters: int = 500,
    initial: PseudoMarginals | None = None,
) -> BetheOptimum:
    """Lower estimate of the Bethe partition function.

    Runs BP from ``restarts`` random initializations plus the uniform one,
    refines every feasible candidate by projected ascent (skipped for models
    with hard zeros, where the gradient is undefined on the boundary), and
    returns the best feasible value found.  The result is always the exact
    Bethe value at a polytope-feasible point.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    rng = np.random.default_rng(seed)
    inits = [None] + [int(s) for s in rng.integers(0, 2**63 - 1, size=restarts)]
    runs = []
    for init in inits:
        try:
            runs.append(run_bp(g, init=init, damping=damping, tol=tol, max_iter=max_iter))
        except NumericalDegeneracyError:
            continue
    converged = [r.beliefs for r in runs if r.converged]
    best_effort = not converged
    candidates = list(converged) if converged else [r.beliefs for r in runs]
    if initial is not None:
        candidates.insert(0, initial)

    flats: list[np.ndarray] = []
    for cand in candidates:
        if not validate_polytope(cand, g).ok:
            continue
        x = _flatten(g, cand)
        if all(float(np.max(np.abs(x - other))) > 1e-9 for other in flats):
            flats.append(x)
    if not flats:  # nothing feasible came back; the uniform point always is
        flats.append(_flatten(g, uniform_marginals(g)))

    best_x = max(flats, key=lambda x: _value_flat(g, x))
    best_val = _value_flat(g, best_x)
    if refine_iters > 0 and not _has_zero_potential(g):
        basis = _tangent_basis(g)
        for x in flats:
            xr, vr = _ascend(g, x, basis, max_iter=refine_iters)
            if vr > best_val and validate_polytope(_unflatten(g, xr), g).ok:
                best_x, best_val = xr, vr
    tau = _unflatten(g, best_x)
    return BetheOptimum(tau, best_val, best_effort)


def lift_pseudomarginals(tau: PseudoMarginals, cover: "CoverGraph") -> PseudoMarginals:
    """Replicate tau onto a cover: every copy inherits its base marginal.

    The lifted point is feasible for the cover and its Bethe value is exactly
    the fold count times the base value (identical terms, repeated).
    """
    g = cover.base
    report = validate_polytope(tau, g)
    if not report.ok:
        raise PolytopeError(report.violations[0])
    nodes = np.asarray(tau.nodes, dtype=float)[np.asarray(cover.var_map)]
    factors = []
    for b in range(len(cover.graph.factors)):
        vals = np.asarray(tau.factors[cover.factor_map[b]], dtype=float)
        perm = cover.factor_axis_perms[b]
        if perm == tuple(range(len(perm))):
            factors.append(vals)
        else:
            factors.append(permute_table_axes(vals, perm))
    return PseudoMarginals(nodes, tuple(factors))
