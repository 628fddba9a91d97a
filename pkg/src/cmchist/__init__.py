"""Histogram estimation of controlled Markov transition densities.

Piecewise-constant conditional densities on data-driven dyadic
partitions, selected from a single trajectory by penalized pairwise
comparisons.  Ships the estimator, simulation families with exact
occupation books, recurrence/mixing diagnostics, and a replicated
experiment harness with a CLI front end.
"""

from .counts import CountTree
from .diagnostics import (
    GridOccupation,
    LebesgueOccupation,
    SampleOccupation,
    dyadic_foot_boxes,
    empirical_T,
    expected_hit_times,
    independent_schedule_return,
    kac_check,
    minorized_return_bounds,
    mixing_constants,
    occupation_measures,
    occupation_scan,
    pair_visits,
    remainder_term,
    return_times,
    rho_star,
    sample_size_predicates,
    select_return_set,
    select_worst_set,
    stationary_distribution,
    unvisited_block_probability,
    weak_mixing_products,
    worst_expected_return,
)
from .errors import (
    ChainSpecError,
    CmchistError,
    ConfigError,
    DataError,
    DiagnosticsError,
    GeometryError,
    NegativeDensityError,
)
from .geometry import (
    Box,
    Cell,
    Partition,
    ROOT,
    SpaceShape,
    cell_at_point,
    count_partitions,
    enumerate_partitions,
    overlay,
    random_partition,
    restrict_partition,
    root_partition,
    uniform_partition,
)
from .harness import (
    ExperimentConfig,
    RiskTable,
    fit_rate,
    run_covering_experiment,
    run_kac_experiment,
    run_projection_check,
    run_rate_experiment,
    run_risk_experiment,
)
from .histogram import (
    PiecewiseKernel,
    conditional_projection,
    constant_kernel,
    fit_histogram,
)
from .losses import (
    best_approx_from_tree,
    best_approx_hellinger_sq,
    best_approx_vs_density,
    deterministic_hellinger_sq,
    empirical_hellinger_sq,
    hellinger_sq_vs_density,
    penalty,
    psi,
    t_statistic,
    weighted_hellinger_sq,
)
from .selector import (
    SelectionResult,
    brute_force_gamma,
    brute_force_select,
    gamma_of,
    select_partition,
)
from .simulate import (
    FAMILY_NAMES,
    FiniteCMCSpec,
    HolderKernel,
    InidChain,
    MinorizedProcess,
    build_family,
    make_assouad_chain,
    make_comparison_chain,
    make_fully_connected,
)
from .trajectory import Trajectory, load, save

__version__ = "0.1.0"
