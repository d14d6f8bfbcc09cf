"""Depth-first branch and bound for the ATSP with subtour-elimination branching.

Every node carries an exact assignment relaxation.  A node whose relaxation
is a single cycle is a complete tour; otherwise one subtour is broken into
t children, the k-th excluding the subtour's k-th free arc while forcing
the preceding k-1, so sibling subtrees share no tour.  Children are visited
cheapest first and pruned against the incumbent upper bound, which patching
keeps tight from the root on.  Child relaxations are recovered from the
parent with one augmenting path each, and the count of those assignment
solves is the search-effort metric.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import ap_augment, ap_solve, assignment_cost, held_karp
from .assignment import (
    Arc,
    ArcConstraints,
    Assignment,
    InfeasibleConstraintsError,
    cycles_of,
    priced_matrix,
    resolve_after_exclusion,
)
from .instances import FORBIDDEN, DistanceMatrix
from .patching import Tour, patch_cycles, tour_from_succ


@dataclass
class SolveOptions:
    """Search controls; the defaults give the plain exact solve."""

    initial_upper_bound: int | None = None
    use_patching: bool = True
    node_order: str = "ascending-cost"
    enumerate_all_optima: bool = False
    optima_cap: int = 1_000_000
    keep_optima: bool = True  # False counts optimal tours without storing them

    def __post_init__(self) -> None:
        if self.node_order != "ascending-cost":
            raise ValueError(f"unsupported node order {self.node_order!r}")
        if self.enumerate_all_optima and self.optima_cap < 1:
            raise ValueError("optima_cap must be >= 1 when enumerating")


@dataclass
class SolveMetrics:
    ap_calls: int = 0  # root solve plus every incremental child re-solve
    nodes_expanded: int = 0
    incumbent_updates: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    tour: Tour | None
    cost: int | None
    metrics: SolveMetrics
    root_ap_cost: int
    optima: list[Tour] | None = None
    optima_count: int | None = None
    optima_saturated: bool = False


@dataclass
class SearchNode:
    """One subproblem: arc constraints plus its solved relaxation."""

    constraints: ArcConstraints
    relaxation: Assignment | None
    depth: int
    pruned: bool = False


def free_arcs(cycle: list[Arc], included: set[Arc]) -> list[Arc]:
    """Arcs of a cycle not yet forced, in cycle order from the smallest city's arc."""
    k = min(range(len(cycle)), key=lambda p: cycle[p][0])
    rotated = cycle[k:] + cycle[:k]
    return [a for a in rotated if a not in included]


def select_branch_subtour(cycles: list[list[Arc]], included: set[Arc]) -> list[Arc]:
    """Cycle with the fewest free arcs (smallest branching factor), ties by smallest city."""
    if len(cycles) < 2:
        raise ValueError("branching needs a relaxation with at least two cycles")
    best = None
    best_key: tuple[int, int] | None = None
    for cyc in cycles:
        t = sum(1 for a in cyc if a not in included)
        if t == 0:
            continue
        key = (t, min(a[0] for a in cyc))
        if best_key is None or key < best_key:
            best, best_key = cyc, key
    if best is None:
        raise ValueError("no branchable cycle: every cycle is fully forced")
    return best


def expand_ct(d: DistanceMatrix, node: SearchNode, chosen: list[Arc]) -> list[SearchNode]:
    """The t child subproblems from breaking ``chosen``.

    Child k excludes the k-th free arc and forces the preceding k-1, so the
    children's tour sets partition the parent's.  Each child's relaxation is
    re-solved incrementally; an infeasible child comes back marked pruned.
    """
    if node.relaxation is None:
        raise ValueError("cannot expand a node without a relaxation")
    arcs = free_arcs(chosen, node.constraints.included)
    if not arcs:
        raise ValueError("chosen cycle has no free arcs")
    children: list[SearchNode] = []
    for k, arc in enumerate(arcs):
        cons = ArcConstraints(
            excluded=set(node.constraints.excluded) | {arc},
            included=set(node.constraints.included) | set(arcs[:k]),
        )
        base = ArcConstraints(excluded=set(node.constraints.excluded), included=cons.included)
        try:
            relax = resolve_after_exclusion(d, node.relaxation, base, arc)
            children.append(SearchNode(constraints=cons, relaxation=relax, depth=node.depth + 1))
        except InfeasibleConstraintsError:
            children.append(
                SearchNode(constraints=cons, relaxation=None, depth=node.depth + 1, pruned=True)
            )
    return children


def held_karp_oracle(d: DistanceMatrix, max_n: int = 16) -> int:
    """Exact optimal tour cost by subset DP; independent of the search path."""
    if d.n > max_n:
        raise ValueError(f"held_karp_oracle capped at n <= {max_n}, got {d.n}")
    return int(held_karp(d.entries))


@dataclass
class _Child:
    arc: Arc
    prefix: list[Arc]  # arcs forced before this one
    cost: int
    state: tuple | None  # (u, v, row_to, col_from) or None when infeasible
    cycles: list[list[Arc]] | None
    order: int


@dataclass
class _Frame:
    children: list[_Child]
    next_child: int = 0
    child_mark: int | None = None  # journal mark of the currently applied child deltas


class _Search:
    """One depth-first run over a working matrix mutated in place with undo."""

    def __init__(
        self,
        d: DistanceMatrix,
        opts: SolveOptions,
        root_constraints: ArcConstraints | None,
        root_relaxation: Assignment | None,
        root_ap_calls: int,
        stop_at_cost: int | None,
    ):
        self.d = d
        self.n = d.n
        self.opts = opts
        self.stop_at_cost = stop_at_cost
        self.w = priced_matrix(d, root_constraints)
        self.journal: list[tuple] = []
        self.included: set[Arc] = set()
        if root_constraints is not None:
            self.included = set(root_constraints.included)
        self.metrics = SolveMetrics(ap_calls=root_ap_calls)
        self.alpha: int = opts.initial_upper_bound if opts.initial_upper_bound is not None else FORBIDDEN
        self.incumbent: Tour | None = None
        self.optima: list[Tour] = []
        self.optima_count = 0
        self.saturated = False
        self.root_relaxation = root_relaxation

    # ---- working-matrix deltas -------------------------------------------------

    def _exclude(self, arc: Arc) -> None:
        i, j = arc
        self.journal.append(("cell", i, j, int(self.w[i, j])))
        self.w[i, j] = FORBIDDEN

    def _include(self, arc: Arc) -> None:
        i, j = arc
        keep = int(self.w[i, j])
        self.journal.append(("rowcol", i, j, self.w[i, :].copy(), self.w[:, j].copy()))
        self.w[i, :] = FORBIDDEN
        self.w[:, j] = FORBIDDEN
        self.w[i, j] = keep
        self.included.add(arc)

    def _rollback(self, mark: int) -> None:
        while len(self.journal) > mark:
            entry = self.journal.pop()
            if entry[0] == "cell":
                _, i, j, old = entry
                self.w[i, j] = old
            else:
                _, i, j, old_row, old_col = entry
                self.w[i, :] = old_row
                self.w[:, j] = old_col
                self.included.discard((i, j))

    def _apply_child(self, child: _Child) -> int:
        mark = len(self.journal)
        for a in child.prefix:
            self._include(a)
        self._exclude(child.arc)
        return mark

    # ---- incumbent --------------------------------------------------------------

    def _offer(self, tour: Tour) -> None:
        if tour.cost < self.alpha:
            self.alpha = tour.cost
            self.incumbent = tour
            self.metrics.incumbent_updates += 1
            if self.opts.enumerate_all_optima:
                self.optima.clear()
                self.optima_count = 0

    def _record_optimum(self, tour: Tour) -> None:
        self.optima_count += 1
        if self.opts.keep_optima:
            self.optima.append(tour)
        if self.optima_count >= self.opts.optima_cap:
            self.saturated = True

    def _bound_reached(self) -> bool:
        return self.stop_at_cost is not None and self.alpha <= self.stop_at_cost

    # ---- expansion ---------------------------------------------------------------

    def _generate_children(self, parent_state: tuple, parent_cost: int, chosen: list[Arc]) -> list[_Child]:
        arcs = free_arcs(chosen, self.included)
        u0, v0, row0, col0 = parent_state
        children: list[_Child] = []
        mark = len(self.journal)
        for k, arc in enumerate(arcs):
            if k > 0:
                self._rollback(len(self.journal) - 1)  # drop previous exclusion
                self._include(arcs[k - 1])
            self._exclude(arc)
            u, v = u0.copy(), v0.copy()
            row_to, col_from = row0.copy(), col0.copy()
            row_to[arc[0]] = -1
            col_from[arc[1]] = -1
            self.metrics.ap_calls += 1
            ok = ap_augment(self.w, u, v, row_to, col_from, arc[0])
            if ok:
                cost = int(assignment_cost(self.w, row_to))
                ok = cost < FORBIDDEN
            if ok:
                if cost < parent_cost:
                    raise AssertionError("child relaxation undercut its parent bound")
                children.append(
                    _Child(arc, arcs[:k], cost, (u, v, row_to, col_from), cycles_of(row_to), k)
                )
            else:
                children.append(_Child(arc, arcs[:k], FORBIDDEN, None, None, k))
        self._rollback(mark)
        children.sort(key=lambda c: (c.cost, c.order))
        return children

    def _expand(self, state: tuple, cost: int, cycles: list[list[Arc]]) -> list[_Child]:
        self.metrics.nodes_expanded += 1
        chosen = select_branch_subtour(cycles, self.included)
        children = self._generate_children(state, cost, chosen)
        self._patch_best_child(children)
        return children

    def _expand_tour_leaf(self, state: tuple, cost: int, tour: Tour) -> list[_Child]:
        # enumeration continues under a tour leaf by branching on the tour itself
        arcs = [a for a in tour.arcs() if a not in self.included]
        if not arcs:
            return []
        self.metrics.nodes_expanded += 1
        return self._generate_children(state, cost, tour.arcs())

    def _patch_best_child(self, children: list[_Child]) -> None:
        if not self.opts.use_patching:
            return
        for child in children:
            if child.state is None:
                return
            if len(child.cycles) == 1:
                return  # best child is already a tour; the leaf visit handles it
            mark = self._apply_child(child)
            patched = patch_cycles(self.w, child.cycles)
            self._rollback(mark)
            if patched.cost < FORBIDDEN:
                self._offer(patched)
            return

    # ---- main loop -----------------------------------------------------------------

    def run(self) -> SolveResult:
        start = time.perf_counter()
        result = self._run()
        result.metrics.wall_time = time.perf_counter() - start
        return result

    def _finish(self) -> SolveResult:
        enum = self.opts.enumerate_all_optima
        return SolveResult(
            tour=self.incumbent,
            cost=self.incumbent.cost if self.incumbent is not None else None,
            metrics=self.metrics,
            root_ap_cost=self.root_cost,
            optima=self.optima if enum and self.opts.keep_optima else None,
            optima_count=self.optima_count if enum else None,
            optima_saturated=self.saturated,
        )

    def _run(self) -> SolveResult:
        enum = self.opts.enumerate_all_optima
        if self.root_relaxation is None:
            n = self.n
            u = np.zeros(n, dtype=np.int64)
            v = np.zeros(n, dtype=np.int64)
            row_to = np.full(n, -1, dtype=np.int64)
            col_from = np.full(n, -1, dtype=np.int64)
            if not ap_solve(self.w, u, v, row_to, col_from):
                self.root_cost = FORBIDDEN
                return self._finish()
            root_cost = int(assignment_cost(self.w, row_to))
            if root_cost >= FORBIDDEN:
                self.root_cost = FORBIDDEN
                return self._finish()
            root_state = (u, v, row_to, col_from)
        else:
            rel = self.root_relaxation
            col_from = np.full(self.n, -1, dtype=np.int64)
            col_from[rel.succ] = np.arange(self.n, dtype=np.int64)
            root_state = (rel.duals[0], rel.duals[1], rel.succ, col_from)
            root_cost = rel.cost
        self.root_cost = root_cost
        root_cycles = cycles_of(root_state[2])

        if len(root_cycles) == 1:
            tour = tour_from_succ(self.w, root_state[2])
            self._offer(tour)
            if enum and tour.cost == self.alpha:
                self._record_optimum(tour)
                if not self.saturated and not self._bound_reached():
                    self._descend_root_leaf(root_state, root_cost, tour)
            return self._finish()

        if self.opts.use_patching:
            patched = patch_cycles(self.w, root_cycles)
            if patched.cost < FORBIDDEN:
                self._offer(patched)
        if self._bound_reached():
            return self._finish()
        if not enum and self.alpha <= root_cost:
            return self._finish()  # the incumbent already meets the lower bound
        if enum and self.alpha < root_cost:
            return self._finish()

        stack = [_Frame(children=self._expand(root_state, root_cost, root_cycles))]
        self._drive(stack)
        return self._finish()

    def _descend_root_leaf(self, state: tuple, cost: int, tour: Tour) -> None:
        children = self._expand_tour_leaf(state, cost, tour)
        if children:
            self._drive([_Frame(children=children)])

    def _drive(self, stack: list[_Frame]) -> None:
        enum = self.opts.enumerate_all_optima
        while stack:
            if self._bound_reached() or self.saturated:
                break
            frame = stack[-1]
            if frame.child_mark is not None:
                self._rollback(frame.child_mark)
                frame.child_mark = None
            if frame.next_child >= len(frame.children):
                stack.pop()
                continue
            child = frame.children[frame.next_child]
            frame.next_child += 1
            if child.state is None:
                continue
            if (enum and child.cost > self.alpha) or (not enum and child.cost >= self.alpha):
                frame.next_child = len(frame.children)  # siblings are sorted; all pruned
                continue
            if len(child.cycles) == 1:
                tour = tour_from_succ(self.w, child.state[2])
                self._offer(tour)
                if enum and tour.cost == self.alpha:
                    self._record_optimum(tour)
                    if self.saturated or self._bound_reached():
                        continue
                    mark = self._apply_child(child)
                    frame.child_mark = mark
                    grand = self._expand_tour_leaf(child.state, child.cost, tour)
                    if grand:
                        stack.append(_Frame(children=grand))
                    else:
                        self._rollback(mark)
                        frame.child_mark = None
                continue
            mark = self._apply_child(child)
            frame.child_mark = mark
            stack.append(_Frame(children=self._expand(child.state, child.cost, child.cycles)))


def _solve(
    d: DistanceMatrix,
    opts: SolveOptions,
    root_constraints: ArcConstraints | None = None,
    root_relaxation: Assignment | None = None,
    root_ap_calls: int = 1,
    stop_at_cost: int | None = None,
) -> SolveResult:
    search = _Search(d, opts, root_constraints, root_relaxation, root_ap_calls, stop_at_cost)
    return search.run()


def solve_atsp(d: DistanceMatrix, opts: SolveOptions | None = None) -> SolveResult:
    """Exact ATSP solve; returns a provably optimal tour and search metrics.

    With ``enumerate_all_optima`` the result also carries every optimal tour
    (up to ``optima_cap``, with the saturation flag set when the cap cut the
    enumeration short).  A finite ``initial_upper_bound`` excluding every
    tour yields ``tour=None``.
    """
    return _solve(d, opts if opts is not None else SolveOptions())
