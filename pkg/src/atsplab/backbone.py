"""Backbone measurement, optimal-tour enumeration, and the zero-cost decision.

A directed arc is a backbone arc when every optimal tour uses it.  Rather
than enumerating all optima, each arc of one optimal tour is tested by
re-solving with that arc excluded: the arc is in the backbone exactly when
the constrained optimum strictly exceeds the unconstrained one.
"""
from __future__ import annotations

from dataclasses import dataclass

from .assignment import (
    Arc,
    ArcConstraints,
    Assignment,
    InfeasibleConstraintsError,
    resolve_after_exclusion,
    solve_ap,
)
from .instances import DistanceMatrix
from .patching import Tour
from .solver import SolveOptions, SolveResult, _solve, solve_atsp


@dataclass
class BackboneReport:
    """Arcs shared by all optimal tours, as a fraction of the n tour arcs.

    ``optima_count`` is only filled when it comes for free (a full backbone
    forces a unique optimum) or when the caller enumerated separately.
    """

    optimal_cost: int
    backbone_arcs: list[Arc]
    fraction: float
    optima_count: int | None = None
    optima_saturated: bool = False


@dataclass
class TourEnumeration:
    optimal_cost: int
    count: int
    saturated: bool
    tours: list[Tour] | None


def _arc_is_backbone(
    d: DistanceMatrix, root: Assignment, optimal_cost: int, arc: Arc
) -> bool:
    """True when no tour avoiding ``arc`` matches the optimal cost."""
    try:
        relax = resolve_after_exclusion(d, root, None, arc)
    except InfeasibleConstraintsError:
        return True
    res = _solve(
        d,
        SolveOptions(initial_upper_bound=optimal_cost + 1),
        root_constraints=ArcConstraints(excluded={arc}),
        root_relaxation=relax,
        stop_at_cost=optimal_cost,
    )
    return res.tour is None


def backbone_fraction(
    d: DistanceMatrix,
    base_root: Assignment | None = None,
    base_result: SolveResult | None = None,
) -> BackboneReport:
    """Backbone of ``d`` via one full solve plus one exclusion re-solve per tour arc.

    Callers that already solved the instance can pass the root relaxation
    and solve result to skip the base work.
    """
    root = base_root if base_root is not None else solve_ap(d)
    base = (
        base_result
        if base_result is not None
        else _solve(d, SolveOptions(), root_relaxation=root)
    )
    cstar = base.cost
    assert base.tour is not None and cstar is not None
    backbone = [a for a in base.tour.arcs() if _arc_is_backbone(d, root, cstar, a)]
    fraction = len(backbone) / d.n
    return BackboneReport(
        optimal_cost=cstar,
        backbone_arcs=backbone,
        fraction=fraction,
        optima_count=1 if fraction == 1.0 else None,
    )


def enumerate_optimal_tours(
    d: DistanceMatrix, cap: int = 1_000_000, keep_tours: bool = True
) -> TourEnumeration:
    """Count (and optionally collect) every optimal tour, stopping at ``cap``.

    The search prunes only nodes costing strictly more than the optimum, and
    keeps branching below each optimal leaf on the tour itself, so equal-cost
    tours in the same subproblem are flushed out without duplicates.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    res = solve_atsp(
        d,
        SolveOptions(enumerate_all_optima=True, optima_cap=cap, keep_optima=keep_tours),
    )
    assert res.cost is not None and res.optima_count is not None
    return TourEnumeration(
        optimal_cost=res.cost,
        count=res.optima_count,
        saturated=res.optima_saturated,
        tours=res.optima if keep_tours else None,
    )


def has_zero_cost_tour(d: DistanceMatrix) -> bool:
    """Whether a complete tour of all-zero arcs exists.

    Cities lacking a zero-cost outgoing or incoming arc settle it
    immediately; otherwise a search bounded above by 1 decides.
    """
    zero = d.entries == 0
    if not (zero.any(axis=1).all() and zero.any(axis=0).all()):
        return False
    res = _solve(d, SolveOptions(initial_upper_bound=1), stop_at_cost=0)
    return res.cost == 0
