"""Exact ATSP solving and distance-precision phase-transition experiments."""

from .instances import (
    FORBIDDEN,
    DistanceMatrix,
    InstanceSpec,
    PrecisionStats,
    asymptotic_distinct_fraction,
    effective_digits,
    empirical_distinct_fraction,
    expected_distinct_fraction,
    generate,
    read_instance,
    rescale,
    write_instance,
)
from .assignment import (
    ArcConstraints,
    Assignment,
    InfeasibleConstraintsError,
    extract_cycles,
    resolve_after_exclusion,
    solve_ap,
    solve_ap_constrained,
)
from .patching import Tour, patch_once, patch_to_tour
from .solver import (
    SearchNode,
    SolveMetrics,
    SolveOptions,
    SolveResult,
    expand_ct,
    held_karp_oracle,
    select_branch_subtour,
    solve_atsp,
)
from .backbone import (
    BackboneReport,
    TourEnumeration,
    backbone_fraction,
    enumerate_optimal_tours,
    has_zero_cost_tour,
)
from .experiments import (
    AggregateRow,
    CrossoverEstimate,
    SweepConfig,
    estimate_crossover,
    normalize_complexity,
    rescale_table,
    run_sweep,
    table_digits,
)

__version__ = "0.1.0"
