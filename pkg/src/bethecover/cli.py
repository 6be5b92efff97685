"""Command-line front end.

Every command emits line-delimited JSON records (floats that are not finite
are encoded as strings).  Exit codes: 0 ok, 1 verdict violation, 2 input
error, 3 capacity exceeded.  All commands are deterministic given --seed.
"""

from __future__ import annotations

import csv as csv_mod
import json
import math
import sys
from pathlib import Path

import click

from . import core, covers, exact, fuzz, lattice, models
from .bethe import optimize_bethe, validate_polytope

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_CAPACITY = 3


def _num(x: float):
    return float(x) if math.isfinite(x) else repr(float(x))


def _echo(record: dict) -> None:
    click.echo(json.dumps(record, sort_keys=True))


def _input_error(message: str):
    _echo({"record": "error", "kind": "input", "message": message})
    sys.exit(EXIT_INPUT)


def _capacity_error(message: str):
    _echo({"record": "error", "kind": "capacity", "message": message})
    sys.exit(EXIT_CAPACITY)


def _load_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _input_error(str(exc))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _input_error(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")


def _load_model(path: str) -> core.FactorGraph:
    doc = _load_json(path)
    try:
        return core.from_json_dict(doc)
    except (core.StructureError, core.DimensionError, ValueError) as exc:
        _input_error(f"{path}: {exc}")


def _witness_record(w: lattice.LatticeWitness) -> dict | None:
    if w.ok:
        return None
    record = {"lhs": _num(w.lhs), "rhs": _num(w.rhs), "where": w.where}
    if w.witness is not None:
        record["x"] = list(w.witness[0])
        record["y"] = list(w.witness[1])
    return record


@click.group()
def main():
    """Partition-function bounds for binary graphical models."""


@main.command("check")
@click.argument("model_file")
def cmd_check(model_file):
    """Log-supermodularity verdict, exact log Z, and exact marginals."""
    g = _load_model(model_file)
    witness = lattice.is_log_supermodular_factorization(g)
    try:
        log_z = exact.partition_function(g)
    except core.CapacityError as exc:
        _capacity_error(str(exc))
    record = {
        "record": "check",
        "log_supermodular": witness.ok,
        "witness": _witness_record(witness),
        "log_z": _num(log_z),
    }
    try:
        tau = exact.exact_marginals(g)
        record["marginals"] = tau.to_json_dict()
        record["polytope_ok"] = validate_polytope(tau, g).ok
    except exact.DegenerateDistributionError:
        record["marginals"] = None
        record["polytope_ok"] = None
    except core.CapacityError as exc:
        _capacity_error(str(exc))
    _echo(record)


@main.command("bethe")
@click.argument("model_file")
@click.option("--restarts", default=20, show_default=True, help="BP restarts")
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-9, show_default=True, help="verdict slack")
def cmd_bethe(model_file, restarts, seed, tol):
    """Bethe lower estimate, exact log Z, their gap, and the verdict."""
    g = _load_model(model_file)
    supermodular = lattice.is_log_supermodular_factorization(g).ok
    try:
        log_z = exact.partition_function(g)
    except core.CapacityError as exc:
        _capacity_error(str(exc))
    opt = optimize_bethe(g, restarts=restarts, seed=seed)
    verdict = opt.value <= log_z + tol
    _echo(
        {
            "record": "bethe",
            "log_supermodular": supermodular,
            "log_z_bethe_lower": _num(opt.value),
            "log_z": _num(log_z),
            "gap": _num(log_z - opt.value),
            "verdict": verdict,
            "best_effort": opt.best_effort,
        }
    )
    if supermodular and not verdict:
        sys.exit(EXIT_VIOLATION)


@main.command("covers")
@click.argument("model_file")
@click.option("--k", default=2, show_default=True, help="fold count")
@click.option("--samples", type=int, default=None, help="number of sampled covers")
@click.option("--exhaustive", is_flag=True, help="enumerate every labeled cover")
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-9, show_default=True, help="inequality slack")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="also write rows as CSV")
def cmd_covers(model_file, k, samples, exhaustive, seed, tol, csv_path):
    """Per-cover partition functions and the cover-average estimate."""
    g = _load_model(model_file)
    supermodular = lattice.is_log_supermodular_factorization(g).ok
    if k * g.n > exact.MAX_PARTITION_VARS:
        _capacity_error(f"{k}-covers of this model exceed the oracle bound")
    try:
        if exhaustive or (samples is None and covers.count_covers(g, k) <= 1024):
            specs = list(covers.enumerate_covers(g, k))
            exhaustive = True
        else:
            if samples is None:
                samples = 100
            import numpy as np

            rng = np.random.default_rng(seed)
            specs = [covers.sample_cover(g, k, rng) for _ in range(samples)]
    except core.CapacityError as exc:
        _capacity_error(str(exc))
    log_z_base = exact.partition_function(g)
    rows = []
    for spec in specs:
        log_z_cover = exact.partition_function(covers.build_cover(g, spec).graph)
        bound = k * log_z_base
        rows.append(
            {
                "record": "cover",
                "spec": covers.spec_digest(spec),
                "log_z_cover": log_z_cover,
                "k_log_z_base": bound,
                "holds": log_z_cover <= bound + tol,
            }
        )
    rows.sort(key=lambda r: r["spec"])
    for row in rows:
        _echo({**row, "log_z_cover": _num(row["log_z_cover"]), "k_log_z_base": _num(row["k_log_z_base"])})
    avg = covers.average_log_estimate([r["log_z_cover"] for r in rows], k, exhaustive)
    _echo(
        {
            "record": "cover_estimate",
            "k": k,
            "log_estimate": _num(avg.log_estimate),
            "stderr": _num(avg.stderr),
            "num_covers": avg.num_covers,
            "exhaustive": avg.exhaustive,
        }
    )
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv_mod.writer(handle)
            writer.writerow(["spec", "log_z_cover", "k_log_z_base", "holds"])
            for row in rows:
                writer.writerow([row["spec"], row["log_z_cover"], row["k_log_z_base"], row["holds"]])
    if supermodular and any(not row["holds"] for row in rows):
        sys.exit(EXIT_VIOLATION)


@main.command("indsets")
@click.argument("graph_file")
@click.option("--no-flip", is_flag=True, help="skip the bipartite flip")
@click.option("--restarts", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-9, show_default=True)
def cmd_indsets(graph_file, no_flip, restarts, seed, tol):
    """Exact independent-set count vs the Bethe lower estimate."""
    doc = _load_json(graph_file)
    try:
        n, edges, partition = models.graph_from_json_dict(doc)
        model = models.independent_set_model(n, edges)
    except core.StructureError as exc:
        _input_error(f"{graph_file}: {exc}")
    if n > exact.MAX_PARTITION_VARS:
        _capacity_error(f"n={n} exceeds the oracle bound")
    log_count = exact.partition_function(model)
    count = int(round(math.exp(log_count)))
    flipped = not no_flip
    if flipped:
        try:
            if partition is not None:
                part_a = set(partition)
                target = models.flip_bipartite(model, part_a, set(range(n)) - part_a)
            else:
                target = models.flip_bipartite(model)
        except core.StructureError as exc:
            _echo(
                {
                    "record": "error",
                    "kind": "input",
                    "message": str(exc),
                    "odd_cycle": list(exc.witness) if exc.witness else None,
                }
            )
            sys.exit(EXIT_INPUT)
    else:
        target = model
    opt = optimize_bethe(target, restarts=restarts, seed=seed)
    verdict = opt.value <= log_count + tol
    _echo(
        {
            "record": "indsets",
            "count": count,
            "log_count": _num(log_count),
            "log_bethe_lower": _num(opt.value),
            "flipped": flipped,
            "verdict": verdict,
        }
    )
    if flipped and not verdict:
        sys.exit(EXIT_VIOLATION)


@main.command("fuzz")
@click.option("--suite", type=click.Choice(list(fuzz.SUITES)), required=True)
@click.option("--trials", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--artifact", type=click.Path(), default="fuzz-failure.json", show_default=True,
              help="where to write the reproduction record on failure")
@click.option("--invert", is_flag=True, hidden=True)  # test-only: negate verdicts
def cmd_fuzz(suite, trials, seed, artifact, invert):
    """Run a randomized property suite; write an artifact on failure."""
    report = fuzz.run_suite(suite, trials, seed, invert=invert)
    _echo(
        {
            "record": "fuzz",
            "suite": suite,
            "trials": report.trials,
            "failures": len(report.failures),
        }
    )
    for failure in report.failures:
        _echo({"record": "fuzz_failure", "property": failure.property, "trial": failure.trial})
    if report.failures:
        Path(artifact).write_text(
            json.dumps(fuzz.artifact_dict(report, seed, invert=invert), indent=2) + "\n",
            encoding="utf-8",
        )
        _echo({"record": "fuzz_artifact", "path": str(artifact)})
        sys.exit(EXIT_VIOLATION)


if __name__ == "__main__":
    main()
