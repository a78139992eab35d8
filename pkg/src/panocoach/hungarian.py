"""Minimum-cost assignment on square matrices (Hungarian method, O(n^3)).

Among cost-equal optima the lexicographically smallest row->column
permutation is returned, so callers get a deterministic answer for
symmetric inputs (two players swapping mirrored slots, etc.).
"""

from __future__ import annotations

import math


class NonSquare(ValueError):
    pass


class NonFinite(ValueError):
    pass


# Tolerance for "achieves the optimal total" checks during lexicographic
# refinement.  Zero-risk for integer or dyadic-rational costs; for arbitrary
# floats it only matters when two assignments are closer than this anyway.
_EQ_TOL = 1e-9


def _solve(cost: list[list[float]]) -> list[int]:
    """Return an optimal row->column assignment (potentials method)."""
    n = len(cost)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # column -> row (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    perm = [0] * n
    for j in range(1, n + 1):
        if match[j]:
            perm[match[j] - 1] = j - 1
    return perm


def _total(cost: list[list[float]], perm: list[int]) -> float:
    return sum(cost[i][perm[i]] for i in range(len(perm)))


def _validate(cost) -> int:
    n = len(cost)
    if n == 0:
        raise NonSquare("cost matrix must be at least 1x1")
    for row in cost:
        if len(row) != n:
            raise NonSquare(f"expected {n} columns, got {len(row)}")
        for x in row:
            if not math.isfinite(x):
                raise NonFinite(f"non-finite cost entry {x!r}")
    return n


def optimal_assignment(cost: list[list[float]]) -> list[int]:
    """Minimize sum(cost[i][sigma(i)]); ties broken toward the smallest sigma.

    Raises NonSquare / NonFinite on malformed input.
    """
    n = _validate(cost)
    best = _total(cost, _solve(cost))

    # Fix one row at a time: the smallest column that still permits an
    # assignment of the remaining rows at the optimal total.
    perm: list[int] = []
    free = list(range(n))
    remaining = best
    for i in range(n):
        chosen = None
        rest_rows = range(i + 1, n)
        for j in free:
            if not rest_rows:
                sub_total = 0.0
            else:
                cols = [c for c in free if c != j]
                sub = [[cost[r][c] for c in cols] for r in rest_rows]
                sub_total = _total(sub, _solve(sub))
            if abs(cost[i][j] + sub_total - remaining) <= _EQ_TOL * max(1.0, abs(remaining)):
                chosen = j
                break
        if chosen is None:  # float slack fallback; unreachable for exact costs
            chosen = min(free, key=lambda j: cost[i][j])
        perm.append(chosen)
        free.remove(chosen)
        remaining -= cost[i][chosen]
    return perm


def assignment_total(cost: list[list[float]], perm: list[int]) -> float:
    """Total cost of an assignment, summed in row order."""
    return _total(cost, perm)
