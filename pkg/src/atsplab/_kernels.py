"""Jitted inner loops: dense assignment solves and the subset-DP tour oracle.

All kernels work on int64 arrays and treat any value >= FORBIDDEN as a
forbidden arc; additions saturate there so nothing overflows.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .instances import FORBIDDEN

_FORBIDDEN = np.int64(FORBIDDEN)


@nb.njit(cache=True)
def ap_augment(cost, u, v, row_to, col_from, start_row):
    """Assign ``start_row`` via one shortest augmenting path over reduced costs.

    Dijkstra scan; on ties the lowest column index wins, which makes the
    returned matching deterministic.  Updates the dual prices so that
    feasibility (u[i] + v[j] <= cost[i, j]) and tightness on matched arcs
    are preserved.  Returns False when every augmenting path runs through a
    forbidden arc.
    """
    n = cost.shape[0]
    dist = np.full(n, _FORBIDDEN, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    scanned = np.zeros(n, dtype=np.bool_)
    i = start_row
    base = np.int64(0)
    sink = -1
    while sink == -1:
        ui = u[i]
        for j in range(n):
            if scanned[j]:
                continue
            red = cost[i, j] - ui - v[j]
            if red > _FORBIDDEN:
                red = _FORBIDDEN
            nd = base + red
            if nd >= _FORBIDDEN or nd < 0:
                nd = _FORBIDDEN
            if nd < dist[j]:
                dist[j] = nd
                pred[j] = i
        best = _FORBIDDEN
        jbest = -1
        for j in range(n):
            if not scanned[j] and dist[j] < best:
                best = dist[j]
                jbest = j
        if jbest < 0:
            return False
        scanned[jbest] = True
        base = best
        if col_from[jbest] < 0:
            sink = jbest
        else:
            i = col_from[jbest]
    delta = dist[sink]
    u[start_row] += delta
    for j in range(n):
        if scanned[j] and j != sink:
            u[col_from[j]] += delta - dist[j]
            v[j] -= delta - dist[j]
    j = sink
    while True:
        i = pred[j]
        col_from[j] = i
        nxt = row_to[i]
        row_to[i] = j
        if i == start_row:
            break
        j = nxt
    return True


@nb.njit(cache=True)
def ap_solve(cost, u, v, row_to, col_from):
    """Full assignment solve: column-reduction start, then augment each free row."""
    n = cost.shape[0]
    for i in range(n):
        u[i] = 0
        row_to[i] = -1
        col_from[i] = -1
    for j in range(n):
        best = cost[0, j]
        arg = 0
        for i in range(1, n):
            if cost[i, j] < best:
                best = cost[i, j]
                arg = i
        if best >= _FORBIDDEN:
            return False  # no allowed arc enters column j
        v[j] = best
        if row_to[arg] < 0:
            row_to[arg] = j
            col_from[j] = arg
    for i in range(n):
        if row_to[i] < 0:
            if not ap_augment(cost, u, v, row_to, col_from, i):
                return False
    return True


@nb.njit(cache=True)
def assignment_cost(cost, row_to):
    """Saturating total cost of a matching given as row -> column."""
    total = np.int64(0)
    for i in range(cost.shape[0]):
        total += cost[i, row_to[i]]
        if total >= _FORBIDDEN or total < 0:
            return _FORBIDDEN
    return total


@nb.njit(cache=True)
def held_karp(cost):
    """Exact optimal tour cost by dynamic programming over city subsets.

    State (mask, k): cheapest path starting at city 0, visiting exactly the
    cities of ``mask`` (a subset of 1..n-1), ending at city k+1.  Exponential
    space; callers cap n.
    """
    n = cost.shape[0]
    nsub = n - 1
    full = 1 << nsub
    dp = np.full((full, nsub), _FORBIDDEN, dtype=np.int64)
    for k in range(nsub):
        c = cost[0, k + 1]
        if c < _FORBIDDEN:
            dp[1 << k, k] = c
    for mask in range(1, full):
        for k in range(nsub):
            if not (mask >> k) & 1:
                continue
            cur = dp[mask, k]
            if cur >= _FORBIDDEN:
                continue
            for m in range(nsub):
                if (mask >> m) & 1:
                    continue
                val = cur + cost[k + 1, m + 1]
                if val >= _FORBIDDEN or val < 0:
                    val = _FORBIDDEN
                if val < dp[mask | (1 << m), m]:
                    dp[mask | (1 << m), m] = val
    best = _FORBIDDEN
    for k in range(nsub):
        if dp[full - 1, k] >= _FORBIDDEN:
            continue
        val = dp[full - 1, k] + cost[k + 1, 0]
        if val >= _FORBIDDEN or val < 0:
            val = _FORBIDDEN
        if val < best:
            best = val
    return best
