"""Exact assignment-problem relaxation with forced arcs and O(n^2) re-solves.

The minimum-cost diagonal-free assignment lower-bounds every complete tour
on the same matrix.  Arc constraints are handled by pricing: an excluded arc
costs FORBIDDEN, and a forced arc prices out every alternative leaving its
tail or entering its head.  After a single new exclusion the optimum is
recovered with one augmenting path instead of a full solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import ap_augment, ap_solve, assignment_cost
from .instances import FORBIDDEN, DistanceMatrix

Arc = tuple[int, int]


class InfeasibleConstraintsError(Exception):
    """No diagonal-free assignment satisfies the arc constraints."""


@dataclass
class ArcConstraints:
    """Excluded and included directed arc sets for a constrained solve."""

    excluded: set[Arc] = field(default_factory=set)
    included: set[Arc] = field(default_factory=set)

    def validate(self, n: int) -> None:
        if self.excluded & self.included:
            raise ValueError(f"arcs both excluded and included: {self.excluded & self.included}")
        outs: dict[int, int] = {}
        ins: dict[int, int] = {}
        for i, j in self.included:
            if i == j:
                raise ValueError(f"included arc ({i}, {j}) is diagonal")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"included arc ({i}, {j}) outside 0..{n - 1}")
            if i in outs or j in ins:
                raise ValueError(f"included arcs conflict at ({i}, {j})")
            outs[i] = j
            ins[j] = i
        for i, j in self.excluded:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"excluded arc ({i}, {j}) outside 0..{n - 1}")
        # forced arcs must not close a cycle on fewer than n cities
        seen: set[int] = set()
        for start in outs:
            if start in seen:
                continue
            length, i = 0, start
            while i in outs:
                seen.add(i)
                length += 1
                i = outs[i]
                if i == start:
                    if length < n:
                        raise ValueError("included arcs close a cycle shorter than n")
                    break


@dataclass
class Assignment:
    """A diagonal-free minimum-cost assignment plus its certificate.

    ``succ`` maps each city to its assigned successor; ``duals`` holds the
    row and column prices proving optimality; ``cycles`` is the permutation's
    cycle decomposition, each cycle an arc sequence starting at its smallest
    city, sorted by (length, smallest city).
    """

    succ: np.ndarray
    cost: int
    duals: tuple[np.ndarray, np.ndarray]
    cycles: list[list[Arc]]

    @property
    def n(self) -> int:
        return self.succ.shape[0]

    def is_tour(self) -> bool:
        return len(self.cycles) == 1


def cycles_of(succ: np.ndarray) -> list[list[Arc]]:
    """Cycle decomposition of a permutation given as successor map."""
    n = succ.shape[0]
    seen = np.zeros(n, dtype=bool)
    cycles: list[list[Arc]] = []
    for start in range(n):
        if seen[start]:
            continue
        arcs: list[Arc] = []
        i = start
        while not seen[i]:
            seen[i] = True
            j = int(succ[i])
            arcs.append((i, j))
            i = j
        cycles.append(arcs)
    cycles.sort(key=lambda c: (len(c), c[0][0]))
    return cycles


def extract_cycles(a: Assignment) -> list[list[Arc]]:
    """Cycle decomposition of an assignment, ordered by (length, smallest city)."""
    return cycles_of(a.succ)


def priced_matrix(d: DistanceMatrix, constraints: ArcConstraints | None) -> np.ndarray:
    """Copy of the cost matrix with the constraints applied as prices."""
    w = d.entries.copy()
    if constraints is None:
        return w
    constraints.validate(d.n)
    for i, j in constraints.included:
        keep = w[i, j]
        w[i, :] = FORBIDDEN
        w[:, j] = FORBIDDEN
        w[i, j] = keep
    for i, j in constraints.excluded:
        w[i, j] = FORBIDDEN
    return w


def _finish(w: np.ndarray, u, v, row_to, col_from, ok: bool) -> Assignment:
    if not ok:
        raise InfeasibleConstraintsError("constraints admit no complete assignment")
    cost = int(assignment_cost(w, row_to))
    if cost >= FORBIDDEN:
        raise InfeasibleConstraintsError("constraints admit no assignment on allowed arcs")
    return Assignment(succ=row_to, cost=cost, duals=(u, v), cycles=cycles_of(row_to))


def solve_ap(d: DistanceMatrix) -> Assignment:
    """Minimum-cost diagonal-free assignment; its cost lower-bounds every tour."""
    return solve_ap_constrained(d, None)


def solve_ap_constrained(d: DistanceMatrix, constraints: ArcConstraints | None) -> Assignment:
    """Minimum-cost assignment using every included arc and no excluded arc."""
    w = priced_matrix(d, constraints)
    n = d.n
    u = np.zeros(n, dtype=np.int64)
    v = np.zeros(n, dtype=np.int64)
    row_to = np.full(n, -1, dtype=np.int64)
    col_from = np.full(n, -1, dtype=np.int64)
    ok = ap_solve(w, u, v, row_to, col_from)
    return _finish(w, u, v, row_to, col_from, bool(ok))


def resolve_after_exclusion(
    d: DistanceMatrix,
    parent: Assignment,
    constraints: ArcConstraints | None,
    newly_excluded: Arc,
) -> Assignment:
    """Re-optimize after adding one exclusion to an already-solved subproblem.

    ``constraints`` are the parent's constraints; the newly excluded arc is
    priced out, its row and column are freed, and a single augmenting path
    restores optimality in O(n^2) reusing the parent's dual prices.
    """
    i, j = newly_excluded
    if int(parent.succ[i]) != j:
        return parent  # constraint already inactive
    w = priced_matrix(d, constraints)
    w[i, j] = FORBIDDEN
    u, v = parent.duals[0].copy(), parent.duals[1].copy()
    row_to = parent.succ.copy()
    col_from = np.full(d.n, -1, dtype=np.int64)
    col_from[row_to] = np.arange(d.n, dtype=np.int64)
    row_to[i] = -1
    col_from[j] = -1
    ok = ap_augment(w, u, v, row_to, col_from, i)
    return _finish(w, u, v, row_to, col_from, bool(ok))
