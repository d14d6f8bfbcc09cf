"""Cycle patching: turn a multi-cycle assignment into one complete tour.

Two cycles merge by dropping one arc from each and cross-connecting the
open ends; the pair is chosen to minimize the cost delta.  Repeatedly
merging the two smallest cycles yields a feasible tour whose cost seeds the
search upper bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import Arc, Assignment
from .instances import FORBIDDEN, DistanceMatrix


@dataclass
class Tour:
    """A complete directed tour: every city once, starting at city 0."""

    order: np.ndarray
    cost: int

    @property
    def n(self) -> int:
        return self.order.shape[0]

    def arcs(self) -> list[Arc]:
        o = self.order
        return [(int(o[k]), int(o[(k + 1) % len(o)])) for k in range(len(o))]


def tour_cost(w: np.ndarray, order: np.ndarray) -> int:
    total = 0
    n = order.shape[0]
    for k in range(n):
        total += int(w[order[k], order[(k + 1) % n]])
        if total >= FORBIDDEN:
            return FORBIDDEN
    return total


def tour_from_arcs(w: np.ndarray, arcs: list[Arc]) -> Tour:
    succ = {i: j for i, j in arcs}
    order = np.empty(len(arcs), dtype=np.int64)
    city = 0
    for k in range(len(arcs)):
        order[k] = city
        city = succ[city]
    if city != 0:
        raise ValueError("arc sequence does not close into a single cycle")
    return Tour(order=order, cost=tour_cost(w, order))


def tour_from_succ(w: np.ndarray, succ: np.ndarray) -> Tour:
    order = np.empty(succ.shape[0], dtype=np.int64)
    city = 0
    for k in range(succ.shape[0]):
        order[k] = city
        city = int(succ[city])
    return Tour(order=order, cost=tour_cost(w, order))


def _best_pair(w: np.ndarray, arcs_a: list[Arc], arcs_b: list[Arc]) -> tuple[int, int, int]:
    """Indexes of the arc pair whose swap costs least, ties by smallest tails."""
    ta = np.array([a[0] for a in arcs_a], dtype=np.int64)
    ha = np.array([a[1] for a in arcs_a], dtype=np.int64)
    tb = np.array([b[0] for b in arcs_b], dtype=np.int64)
    hb = np.array([b[1] for b in arcs_b], dtype=np.int64)
    new_il = w[np.ix_(ta, hb)]
    new_kj = w[np.ix_(tb, ha)].T
    bad = (new_il >= FORBIDDEN) | (new_kj >= FORBIDDEN)
    delta = new_il + new_kj - w[ta, ha][:, None] - w[tb, hb][None, :]
    delta[bad] = FORBIDDEN
    dmin = delta.min()
    ties = np.argwhere(delta == dmin)
    p, q = min(ties.tolist(), key=lambda pq: (ta[pq[0]], tb[pq[1]]))
    return int(p), int(q), int(dmin)


def _merge(arcs_a: list[Arc], arcs_b: list[Arc], p: int, q: int) -> list[Arc]:
    i, j = arcs_a[p]
    k, l = arcs_b[q]
    return [(i, l)] + arcs_b[q + 1 :] + arcs_b[:q] + [(k, j)] + arcs_a[p + 1 :] + arcs_a[:p]


def patch_once(d: DistanceMatrix, cycle_a: list[Arc], cycle_b: list[Arc]) -> list[Arc]:
    """Merge two disjoint cycles at the cheapest arc pair.

    Drops one arc (i, j) from A and one (k, l) from B and inserts (i, l) and
    (k, j), minimizing d_il + d_kj - d_ij - d_kl; ties go to the smallest
    (i, k).
    """
    p, q, _ = _best_pair(d.entries, cycle_a, cycle_b)
    return _merge(cycle_a, cycle_b, p, q)


def _cycle_key(arcs: list[Arc]) -> tuple[int, int]:
    return (len(arcs), min(t for t, _ in arcs))


def patch_cycles(w: np.ndarray, cycles: list[list[Arc]]) -> Tour:
    """Merge the two smallest cycles (fewest cities, then smallest city) until one remains."""
    work = list(cycles)
    while len(work) > 1:
        work.sort(key=_cycle_key)
        p, q, _ = _best_pair(w, work[0], work[1])
        merged = _merge(work[0], work[1], p, q)
        work = [merged] + work[2:]
    return tour_from_arcs(w, work[0])


def patch_to_tour(d: DistanceMatrix, a: Assignment) -> Tour:
    """Complete tour obtained by repeatedly patching the assignment's cycles."""
    return patch_cycles(d.entries, a.cycles)
