"""Randomized property suites with replayable failure artifacts.

Each trial draws a fresh instance from a spawned per-trial generator,
evaluates one property, and returns a JSON-serializable payload that is
sufficient to re-run the exact same check later.  ``invert=True`` negates
every verdict (a test-only hook used to prove that the failure-artifact
path works on healthy code).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import covers as covers_mod
from .bethe import PseudoMarginals, bethe_free_energy, lift_pseudomarginals
from .core import (
    Factor,
    FactorGraph,
    PotentialTable,
    from_json_dict,
    random_attractive_pairwise,
    to_json_dict,
)
from .exact import assignment_log_values, exact_marginals, partition_function
from .lattice import (
    check_four_functions,
    check_prod_lemma,
    check_variant_theorem,
    is_log_supermodular,
    is_log_supermodular_factorization,
    marginalize,
    order_stat_indices,
)

SUITES = ("lattice", "covers", "bethe")

_LATTICE_PROPERTIES = ("four_functions", "variant", "marginal_closure", "prod_lemma")


@dataclass
class FuzzFailure:
    property: str
    trial: int
    detail: dict


@dataclass
class FuzzReport:
    suite: str
    trials: int
    failures: list[FuzzFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _seed_int(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _random_edges(rng: np.random.Generator, n: int, max_edges: int) -> list[tuple[int, int]]:
    pairs = list(itertools.combinations(range(n), 2))
    if not pairs:
        return []
    count = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    chosen = rng.choice(len(pairs), size=count, replace=False)
    return [pairs[int(c)] for c in chosen]


def _random_supermodular_table(rng: np.random.Generator, arity: int) -> PotentialTable:
    """Log-supermodular by construction, via one of two closed families."""
    if arity >= 2 and rng.random() < 0.7:
        # product of pairwise log-supermodular factors
        g = random_attractive_pairwise(
            arity, _random_edges(rng, arity, 4), float(rng.uniform(0.2, 1.2)), _seed_int(rng)
        )
        return PotentialTable(np.exp(assignment_log_values(g)))
    # exp of a convex function of the popcount
    a = float(rng.uniform(0.0, 0.8))
    b = float(rng.uniform(-1.0, 1.0))
    pop = np.array([bin(i).count("1") for i in range(1 << arity)], dtype=float)
    return PotentialTable(np.exp(a * pop * pop + b * pop))


def _random_table(rng: np.random.Generator, arity: int, zeros: bool = False) -> PotentialTable:
    v = rng.uniform(0.05, 2.0, size=1 << arity)
    if zeros and rng.random() < 0.3:
        v[rng.integers(0, v.size)] = 0.0
    return PotentialTable(v)


def _four_functions_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    arity = int(rng.integers(1, 4))
    mode = int(rng.integers(0, 3))
    if mode == 0:
        g = _random_supermodular_table(rng, arity)
        tables = (g, g, g, g)
    elif mode == 1:
        # f1, f2 below a common log-supermodular envelope f3 = f4
        h = _random_supermodular_table(rng, arity)
        f1 = PotentialTable(h.values * rng.uniform(0.0, 1.0, size=h.values.size))
        f2 = PotentialTable(h.values * rng.uniform(0.0, 1.0, size=h.values.size))
        tables = (f1, f2, h, h)
    else:
        # free draw; the premise scan decides whether the trial is vacuous
        f3 = PotentialTable(_random_table(rng, arity).values * 1.5)
        f4 = PotentialTable(_random_table(rng, arity).values * 1.5)
        tables = (_random_table(rng, arity, zeros=True), _random_table(rng, arity, zeros=True), f3, f4)
    chk = check_four_functions(*tables)
    holds = (not chk.hypothesis.ok) or chk.conclusion.ok
    detail = {
        "property": "four_functions",
        "tables": [t.values.tolist() for t in tables],
        "hypothesis_ok": chk.hypothesis.ok,
        "conclusion_ok": chk.conclusion.ok,
        "property_holds": holds,
    }
    return holds, detail


def _replay_four_functions(detail: dict) -> bool:
    tables = [PotentialTable(np.asarray(t, dtype=float)) for t in detail["tables"]]
    chk = check_four_functions(*tables)
    return (not chk.hypothesis.ok) or chk.conclusion.ok


def _variant_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    if rng.random() < 0.05:
        k, n = 3, 4  # occasional full-width instance
    else:
        k = int(rng.integers(2, 4))
        n = int(rng.integers(1, 6 if k == 2 else 4))
    g = _random_supermodular_table(rng, k * n)
    # pointwise upper envelopes: f_i(v) = max over z^i-preimages of g^(1/k)
    root = np.power(g.values, 1.0 / k)
    fs = []
    for zidx in order_stat_indices(k, n):
        f = np.zeros(1 << n)
        np.maximum.at(f, zidx, root)
        if rng.random() < 0.5:
            f = f * (1.0 + rng.uniform(0.0, 0.5, size=f.size))
        fs.append(PotentialTable(f))
    chk = check_variant_theorem(g, fs)
    holds = (not (chk.g_supermodular.ok and chk.hypothesis.ok)) or chk.conclusion.ok
    detail = {
        "property": "variant",
        "g": g.values.tolist(),
        "fs": [f.values.tolist() for f in fs],
        "property_holds": holds,
    }
    return holds, detail


def _replay_variant(detail: dict) -> bool:
    g = PotentialTable(np.asarray(detail["g"], dtype=float))
    fs = [PotentialTable(np.asarray(f, dtype=float)) for f in detail["fs"]]
    chk = check_variant_theorem(g, fs)
    return (not (chk.g_supermodular.ok and chk.hypothesis.ok)) or chk.conclusion.ok


def _marginal_closure_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    arity = int(rng.integers(2, 5))
    table = _random_supermodular_table(rng, arity)
    size = int(rng.integers(1, arity))
    keep = sorted(int(p) for p in rng.choice(arity, size=size, replace=False))
    holds = is_log_supermodular(marginalize(table, keep)).ok
    detail = {
        "property": "marginal_closure",
        "table": table.values.tolist(),
        "keep": keep,
        "property_holds": holds,
    }
    return holds, detail


def _replay_marginal_closure(detail: dict) -> bool:
    table = PotentialTable(np.asarray(detail["table"], dtype=float))
    return is_log_supermodular(marginalize(table, detail["keep"])).ok


def _prod_lemma_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    arity = int(rng.integers(2, 6))
    g = _random_supermodular_table(rng, arity)
    k = int(rng.integers(1, 5))
    vectors = [tuple(int(b) for b in rng.integers(0, 2, size=arity)) for _ in range(k)]
    holds = check_prod_lemma(g, vectors).ok
    detail = {
        "property": "prod_lemma",
        "g": g.values.tolist(),
        "vectors": [list(v) for v in vectors],
        "property_holds": holds,
    }
    return holds, detail


def _replay_prod_lemma(detail: dict) -> bool:
    g = PotentialTable(np.asarray(detail["g"], dtype=float))
    return check_prod_lemma(g, [tuple(v) for v in detail["vectors"]]).ok


def _random_attractive(rng: np.random.Generator, max_n: int = 4, max_edges: int = 4) -> FactorGraph:
    n = int(rng.integers(2, max_n + 1))
    return random_attractive_pairwise(
        n, _random_edges(rng, n, max_edges), float(rng.uniform(0.1, 1.5)), _seed_int(rng)
    )


def _covers_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    g = _random_attractive(rng)
    choices = [kk for kk in (1, 2, 3) if kk * g.n <= 12]
    k = int(rng.choice(choices))
    spec = covers_mod.sample_cover(g, k, _seed_int(rng))
    h = covers_mod.build_cover(g, spec)
    valid = covers_mod.validate_cover(h)
    inherited = is_log_supermodular_factorization(h.graph).ok
    ineq = covers_mod.verify_cover_inequality(g, spec).holds
    holds = valid and inherited and ineq
    detail = {
        "property": "covers",
        "model": to_json_dict(g),
        "spec": spec.to_json_dict(),
        "valid": valid,
        "inherited": inherited,
        "inequality": ineq,
        "property_holds": holds,
    }
    return holds, detail


def _replay_covers(detail: dict) -> bool:
    g = from_json_dict(detail["model"])
    spec = covers_mod.CoverSpec.from_json_dict(detail["spec"])
    h = covers_mod.build_cover(g, spec)
    return (
        covers_mod.validate_cover(h)
        and is_log_supermodular_factorization(h.graph).ok
        and covers_mod.verify_cover_inequality(g, spec).holds
    )


def _perturbed(g: FactorGraph, rng: np.random.Generator) -> FactorGraph:
    unary = tuple(
        PotentialTable(phi.values * np.exp(rng.uniform(-0.5, 0.5, size=2))) for phi in g.unary
    )
    factors = tuple(
        Factor(fac.scope, PotentialTable(fac.table.values * np.exp(rng.uniform(-0.5, 0.5, size=fac.table.values.size))))
        for fac in g.factors
    )
    return FactorGraph(g.n, unary, factors)


def random_feasible_marginals(g: FactorGraph, rng: np.random.Generator) -> PseudoMarginals:
    """A random point of the polytope: exact marginals of a perturbed model."""
    return exact_marginals(_perturbed(g, rng))


def _bethe_trial(rng: np.random.Generator) -> tuple[bool, dict]:
    g = _random_attractive(rng, max_n=5, max_edges=5)
    tau = random_feasible_marginals(g, rng)
    value = bethe_free_energy(g, tau)
    log_z = partition_function(g)
    lower_ok = value <= log_z + 1e-9
    spec = covers_mod.sample_cover(g, 2, _seed_int(rng))
    cover = covers_mod.build_cover(g, spec)
    lifted = lift_pseudomarginals(tau, cover)
    lifted_value = bethe_free_energy(cover.graph, lifted)
    lift_ok = abs(lifted_value - 2.0 * value) <= 1e-12 * max(1.0, abs(2.0 * value))
    holds = lower_ok and lift_ok
    detail = {
        "property": "bethe",
        "model": to_json_dict(g),
        "tau": tau.to_json_dict(),
        "spec": spec.to_json_dict(),
        "lower_ok": lower_ok,
        "lift_ok": lift_ok,
        "property_holds": holds,
    }
    return holds, detail


def _replay_bethe(detail: dict) -> bool:
    g = from_json_dict(detail["model"])
    tau = PseudoMarginals.from_json_dict(detail["tau"])
    value = bethe_free_energy(g, tau)
    lower_ok = value <= partition_function(g) + 1e-9
    spec = covers_mod.CoverSpec.from_json_dict(detail["spec"])
    cover = covers_mod.build_cover(g, spec)
    lifted_value = bethe_free_energy(cover.graph, lift_pseudomarginals(tau, cover))
    lift_ok = abs(lifted_value - 2.0 * value) <= 1e-12 * max(1.0, abs(2.0 * value))
    return lower_ok and lift_ok


_TRIALS = {
    "four_functions": _four_functions_trial,
    "variant": _variant_trial,
    "marginal_closure": _marginal_closure_trial,
    "prod_lemma": _prod_lemma_trial,
    "covers": _covers_trial,
    "bethe": _bethe_trial,
}

_REPLAYS = {
    "four_functions": _replay_four_functions,
    "variant": _replay_variant,
    "marginal_closure": _replay_marginal_closure,
    "prod_lemma": _replay_prod_lemma,
    "covers": _replay_covers,
    "bethe": _replay_bethe,
}


def run_property(name: str, trials: int, seed, invert: bool = False) -> FuzzReport:
    """Run one named property ``trials`` times with per-trial generators."""
    trial_fn = _TRIALS[name]
    seqs = np.random.SeedSequence(seed).spawn(trials)
    report = FuzzReport(name, trials)
    for t, seq in enumerate(seqs):
        holds, detail = trial_fn(np.random.default_rng(seq))
        if holds == invert:
            report.failures.append(FuzzFailure(name, t, detail))
    return report


def run_suite(suite: str, trials: int, seed, invert: bool = False) -> FuzzReport:
    """CLI-facing suites; ``lattice`` rotates through its four properties."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    report = FuzzReport(suite, trials)
    for t, seq in enumerate(seqs):
        name = _LATTICE_PROPERTIES[t % 4] if suite == "lattice" else suite
        holds, detail = _TRIALS[name](np.random.default_rng(seq))
        if holds == invert:
            report.failures.append(FuzzFailure(name, t, detail))
    return report


def artifact_dict(report: FuzzReport, seed, invert: bool = False) -> dict:
    """Self-contained reproduction record for the failing trials."""
    return {
        "suite": report.suite,
        "seed": seed if isinstance(seed, int) else str(seed),
        "trials": report.trials,
        "invert": invert,
        "failures": [
            {"property": f.property, "trial": f.trial, "detail": f.detail}
            for f in report.failures
        ],
    }


def replay_artifact(doc: dict) -> bool:
    """Re-run every recorded failure; True iff all stored outcomes reproduce."""
    failures = doc.get("failures", [])
    if not failures:
        return False
    for failure in failures:
        detail = failure["detail"]
        if _REPLAYS[failure["property"]](detail) != bool(detail["property_holds"]):
            return False
    return True
