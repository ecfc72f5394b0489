"""Linear assignment: Hungarian, Murty m-best, gated partial assignment, GLA.

Forbidden pairs are encoded as ``+inf``. Among equal-cost optima the solvers
return the lexicographically smallest assignment, compared as the tuple of
columns taken by rows 0, 1, ... with an unassigned row ranking after every
column.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np


class InfeasibleError(ValueError):
    """No complete assignment avoids the forbidden (infinite) entries."""


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    @classmethod
    def from_pairs(cls, cost, pairs) -> "Assignment":
        pairs = tuple(sorted((int(r), int(c)) for r, c in pairs))
        total = math.fsum(float(cost[r][c]) for r, c in pairs)
        return cls(pairs, total)

    def row_tuple(self, n_rows: int, n_cols: int) -> tuple[int, ...]:
        """Columns per row, with ``n_cols`` standing for "unassigned"."""
        out = [n_cols] * n_rows
        for r, c in self.pairs:
            out[r] = c
        return tuple(out)

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)

    def __len__(self):
        return len(self.pairs)


def _as_matrix(cost) -> np.ndarray:
    c = np.array(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if np.isnan(c).any() or np.isneginf(c).any():
        raise ValueError("cost matrix entries must be finite or +inf")
    return c


def _solve_square(c: np.ndarray):
    """Shortest-augmenting-path Hungarian on a square matrix.

    Returns (col_of_row, u, v) with ``c[i, j] - u[i] - v[j] >= 0`` everywhere
    and equality on the matching.
    """
    n = c.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: 1-based row matched to column j
    way = np.zeros(n + 1, dtype=int)
    a = np.full((n + 1, n + 1), np.inf)
    a[1:, 1:] = c
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = a[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            if not np.isfinite(delta):
                raise InfeasibleError("no feasible complete assignment")
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lex_min_matching(tight: np.ndarray, col_of_row: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Rewrite a perfect matching of ``tight`` into its lexicographic minimum.

    Columns ``>= n_cols`` are padding and rank after every real column. Only
    the first ``n_rows`` rows take part in the ordering. Row i can move to a
    smaller column c exactly when an alternating path leads from c's owner,
    through rows after i, back to the column row i gives up.
    """
    n = tight.shape[0]
    match = col_of_row.copy()
    owner = np.empty(n, dtype=int)
    owner[match] = np.arange(n)
    adj = [np.flatnonzero(tight[i]) for i in range(n)]

    for i in range(n_rows):
        target = match[i]
        limit = min(target, n_cols)
        for c in adj[i]:
            if c >= limit:
                break
            start = owner[c]
            if start < i:
                continue
            prev_row = {c: i}
            stack = [start]
            found = False
            while stack and not found:
                r = stack.pop()
                for c2 in adj[r]:
                    if c2 in prev_row or owner[c2] < i:
                        continue
                    prev_row[c2] = r
                    if c2 == target:
                        found = True
                        break
                    stack.append(owner[c2])
            if not found:
                continue
            col = target
            while True:
                r = prev_row[col]
                old = match[r]
                match[r] = col
                owner[col] = r
                if r == i:
                    break
                col = old
            break
    return match


def hungarian(cost) -> Assignment:
    """Minimum-cost assignment of size ``min(rows, cols)``.

    Raises :class:`InfeasibleError` when every complete assignment hits a
    forbidden entry.
    """
    c = _as_matrix(cost)
    r, k = c.shape
    if r == 0 or k == 0:
        return Assignment((), 0.0)
    n = max(r, k)
    padded = np.zeros((n, n))
    padded[:r, :k] = c
    col_of_row, u, v = _solve_square(padded)

    finite = np.isfinite(padded)
    scale = float(np.abs(padded[finite]).max()) if finite.any() else 1.0
    tol = 1e-10 * (1.0 + scale) * n
    reduced = np.where(finite, padded - u[:, None] - v[None, :], np.inf)
    tight = reduced <= tol
    # the optimal matching is tight by construction; guard against round-off
    tight[np.arange(n), col_of_row] = True
    match = _lex_min_matching(tight, col_of_row, min(r, n), k)
    pairs = [(i, int(match[i])) for i in range(r) if match[i] < k]
    return Assignment.from_pairs(c, pairs)


def murty_mbest(cost, m: int) -> list[Assignment]:
    """The ``m`` cheapest distinct complete assignments, ascending.

    Ties are ordered lexicographically. Fewer than ``m`` are returned when the
    matrix admits fewer complete assignments.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    c = _as_matrix(cost)
    r, k = c.shape
    first = hungarian(c)  # raises on infeasible input
    if r == 0 or k == 0:
        return [first]
    n_pad = max(0, r - k)  # padding columns represent "row left unassigned"

    def solve(fixed: tuple, banned: frozenset):
        # fixed: columns for rows 0..len(fixed)-1 (k means unassigned);
        # banned: (row, col) pairs excluded, col == k bans leaving the row out
        sub = np.zeros((r, k + n_pad))
        sub[:, :k] = c
        for row, col in banned:
            if col == k:
                sub[row, k:] = np.inf
            else:
                sub[row, col] = np.inf
        for row, col in enumerate(fixed):
            keep = sub[row].copy()
            sub[row, :] = np.inf
            if col == k:
                sub[row, k:] = keep[k:]
            else:
                sub[row, col] = keep[col]
        try:
            a = hungarian(sub)
        except InfeasibleError:
            return None
        pairs = [(i, j) for i, j in a.pairs if j < k]
        return Assignment.from_pairs(c, pairs)

    def key(a: Assignment):
        return (a.total_cost, a.row_tuple(r, k))

    heap = []
    counter = 0
    heapq.heappush(heap, (key(first), counter, first, (), frozenset()))
    out: list[Assignment] = []
    while heap and len(out) < m:
        _, _, a, fixed, banned = heapq.heappop(heap)
        out.append(a)
        if len(out) == m:
            break
        t = a.row_tuple(r, k)
        for row in range(len(fixed), r):
            new_fixed = t[:row]
            new_banned = frozenset(b for b in banned if b[0] >= row) | {(row, t[row])}
            sol = solve(new_fixed, new_banned)
            if sol is not None:
                counter += 1
                heapq.heappush(heap, (key(sol), counter, sol, new_fixed, new_banned))
    return out


def _components(finite: np.ndarray):
    """Connected components of the bipartite graph of allowed (row, col) pairs."""
    r, k = finite.shape
    parent = list(range(r + k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(finite)):
        a, b = find(int(i)), find(r + int(j))
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[int, tuple[list, list]] = {}
    for i in range(r):
        if finite[i].any():
            groups.setdefault(find(i), ([], []))[0].append(i)
    for j in range(k):
        if finite[:, j].any():
            groups.setdefault(find(r + j), ([], []))[1].append(j)
    return [groups[g] for g in sorted(groups)]


def gated_assignment(cost, unmatched_cost: float) -> Assignment:
    """Partial assignment: any row or column may stay unmatched at ``unmatched_cost``.

    ``inf`` entries are never matched. Each independent block of the allowed
    pairs is solved separately.
    """
    c = _as_matrix(cost)
    r, k = c.shape
    pairs = []
    for rows, cols in _components(np.isfinite(c)):
        sub = c[np.ix_(rows, cols)]
        a, b = len(rows), len(cols)
        big = np.full((a + b, b + a), np.inf)
        big[:a, :b] = sub
        big[np.arange(a), b + np.arange(a)] = unmatched_cost
        big[a + np.arange(b), np.arange(b)] = unmatched_cost
        big[a:, b:] = 0.0
        sol = hungarian(big)
        pairs.extend((rows[i], cols[j]) for i, j in sol.pairs if i < a and j < b)
    return Assignment.from_pairs(c, pairs)


def gla_solve(similarity) -> Assignment:
    """One-to-one partial matching maximising total similarity.

    Pairs with similarity <= 0 are never matched. ``total_cost`` of the result
    holds the total similarity.
    """
    s = np.array(similarity, dtype=float)
    if s.ndim != 2:
        raise ValueError("similarity matrix must be 2-D")
    s = np.nan_to_num(s, nan=-np.inf)
    cost = np.where(s > 0, -s, np.inf)
    a = gated_assignment(cost, 0.0)
    return Assignment.from_pairs(s, a.pairs)
