"""Partition-function bounds for binary graphical models.

Exact enumeration, Bethe free energy with sum-product BP, labeled graph
covers with lifted potentials, and checkers for the lattice correlation
inequalities that connect them.
"""

from .core import (
    CapacityError,
    DimensionError,
    Factor,
    FactorGraph,
    PotentialTable,
    StructureError,
    build_graph,
    evaluate,
    from_json_dict,
    incidences,
    index_bits,
    load_model,
    log_evaluate,
    random_attractive_pairwise,
    save_model,
    table_index,
    to_json_dict,
)
from .lattice import (
    FourFunctionsCheck,
    LatticeWitness,
    NotLogSupermodularError,
    VariantCheck,
    check_four_functions,
    check_prod_lemma,
    check_variant_theorem,
    is_log_submodular,
    is_log_supermodular,
    is_log_supermodular_factorization,
    join,
    marginalize,
    meet,
    order_stat,
    weakly_majorized,
)
from .exact import (
    DegenerateDistributionError,
    exact_marginals,
    partition_function,
)
from .bethe import (
    BetheOptimum,
    BPResult,
    MessageSet,
    PolytopeError,
    PseudoMarginals,
    bethe_free_energy,
    lift_pseudomarginals,
    optimize_bethe,
    run_bp,
    stationarity_check,
    uniform_marginals,
    validate_polytope,
)
from .covers import (
    CoverAverage,
    CoverGraph,
    CoverInequality,
    CoverSpec,
    build_cover,
    count_covers,
    enumerate_covers,
    estimate_bethe_by_covers,
    identity_spec,
    sample_cover,
    spec_digest,
    validate_cover,
    verify_cover_inequality,
)
from .models import (
    bipartition,
    flip_bipartite,
    flip_variables,
    independent_set_model,
    ising_model,
)

__all__ = [name for name in dir() if not name.startswith("_")]
