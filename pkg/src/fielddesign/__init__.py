"""Optimal block designs under a two-dimensional interference model."""

from .arrays import (
    ArrayClassification,
    BlockArray,
    CountStatistics,
    EnumerationBudgetError,
    Orbit,
    Shape,
    all_arrays,
    apply_permutation,
    canonical_form,
    classify_array,
    count_statistics,
    enumerate_orbits,
    normalize_shape,
    orbit_count,
    orbit_members,
    orbit_size,
)
from .designs import (
    EfficiencyReport,
    ExactDesign,
    MinNReport,
    construct_exact,
    efficiencies,
    expand_symmetric,
    measure_of_design,
    min_n_symmetric,
    pseudo_symmetric_efficiency,
)
from .model import (
    IDENTITY,
    CoefficientTriple,
    CovarianceSpec,
    GeneralCov,
    Identity,
    IncidenceSet,
    TypeH,
    btilde,
    c11_base,
    c_coeffs_closed,
    c_coeffs_trace,
    incidence_matrices,
    info_matrix_exact,
    info_matrix_measure,
    sigma_from_json,
    triple_table,
)
from .optimality import (
    GAP_TOL,
    FanClass,
    Measure,
    QSupport,
    SolveResult,
    VerificationReport,
    equivalence_gap,
    fan_classes,
    full_pool,
    measure_triple,
    q_eval,
    q_star,
    r_eval,
    random_pool,
    solve_closed_form,
    solve_exchange,
    solve_sbs_proportions,
    support_pool,
    support_set,
    verify_measure,
)

__version__ = "0.1.0"
