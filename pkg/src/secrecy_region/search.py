"""Uniform-grid line search over the outer slack variable.

The outer objective eta(x) satisfies x * eta(x) nondecreasing in x, so for
every x in [x_i, x_j] we have eta(x) <= x_j * eta(x_j) / x_i.  Feasibility is
also monotone: if x is infeasible so is every smaller grid value.  The search
below is a branch and bound on the grid that uses both facts to skip
intervals that cannot beat the incumbent by more than a set tolerance.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np


@dataclass
class Evaluation:
    lower: float          # certified value of eta at this grid point
    upper: float          # upper bound on the true eta at this grid point
    payload: Any = None


FAILED = object()         # evaluation gave no answer (neither a value nor infeasibility)


@dataclass
class SearchResult:
    index: int
    x: float
    value: float
    payload: Any
    evaluations: int
    grid_size: int
    failures: int = 0


def uniform_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Points lo, lo + step, ... up to hi, with hi always included."""
    if hi <= lo:
        return np.array([lo])
    n = int(np.floor((hi - lo) / step + 1e-12))
    grid = lo + step * np.arange(n + 1)
    if hi - grid[-1] > 1e-12 * max(1.0, hi):
        grid = np.append(grid, hi)
    return grid


def pruned_grid_search(grid: np.ndarray, evaluate: Callable[[float], Any],
                       rel_tol: float = 0.0, slack: float = 0.0) -> SearchResult | None:
    """Maximize a function with nondecreasing ``x * f(x)`` over an increasing positive grid.

    ``evaluate`` returns an :class:`Evaluation`, None when the grid point is
    infeasible, or ``FAILED``.  An interval is skipped once its bound is at
    most ``best * (1 + rel_tol) + slack``.  The bound holds for every real x
    in the interval, so on return ``max f <= best * (1 + rel_tol) + slack``
    over the searched range, up to failed points.  A failed point is simply
    passed over: it neither bounds its left neighbours nor marks them infeasible.
    """
    grid = np.asarray(grid, dtype=float)
    cache: dict[int, Any] = {}

    def ev(i: int):
        if i not in cache:
            cache[i] = evaluate(float(grid[i]))
        return cache[i]

    # the top grid point anchors every bound; walk down past failures
    top_i = len(grid) - 1
    while ev(top_i) is FAILED and top_i > 0:
        top_i -= 1
    top = cache[top_i]
    if top is None or top is FAILED:
        return None
    best_i, best = top_i, top
    # entries: (-bound, i, j, r): candidates i..j-1, bound taken from evaluated point r >= j
    heap = [(-grid[top_i] * top.upper / grid[0], 0, top_i, top_i)]
    while heap:
        neg_bound, i, j, r = heapq.heappop(heap)
        if i >= j:
            continue
        if -neg_bound <= best.lower * (1.0 + rel_tol) + slack:
            continue
        m = (i + j - 1) // 2
        e = ev(m)
        if e is FAILED:
            ru = cache[r].upper
            if i < m:
                heapq.heappush(heap, (-grid[r] * ru / grid[i], i, m, r))
            if m + 1 < j:
                heapq.heappush(heap, (-grid[r] * ru / grid[m + 1], m + 1, j, r))
            continue
        if e is None:
            # everything left of m is infeasible too
            if m + 1 < j:
                heapq.heappush(heap, (-grid[r] * cache[r].upper / grid[m + 1], m + 1, j, r))
            continue
        if e.lower > best.lower or (e.lower == best.lower and m < best_i):
            best_i, best = m, e
        if i < m:
            heapq.heappush(heap, (-grid[m] * e.upper / grid[i], i, m, m))
        if m + 1 < j:
            heapq.heappush(heap, (-grid[r] * cache[r].upper / grid[m + 1], m + 1, j, r))
    failures = sum(1 for v in cache.values() if v is FAILED)
    return SearchResult(best_i, float(grid[best_i]), best.lower, best.payload, len(cache), len(grid),
                        failures)
