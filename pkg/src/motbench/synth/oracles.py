"""Exhaustive-enumeration oracles for small instances.

These are deliberately naive. They share no code with the solvers they
check beyond the input types.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from ..model import BBox
from ..solvers.assignment import Assignment, InfeasibleError

ASSIGNMENT_CAP = 8
KBEST_CAP = 5
FLOW_CAP = 6
JPDA_CAP = 3


class OracleSizeError(ValueError):
    """Instance exceeds the enumeration cap."""


@lru_cache(maxsize=None)
def _complete_assignments(r: int, k: int) -> np.ndarray:
    """All complete assignments as row tuples (value ``k`` = unassigned)."""
    if r <= k:
        return np.array(list(itertools.permutations(range(k), r)), dtype=int).reshape(-1, r)
    out = []
    for rows in itertools.permutations(range(r), k):
        t = [k] * r
        for col, row in enumerate(rows):
            t[row] = col
        out.append(t)
    return np.array(out, dtype=int)


def _enumerate(c: np.ndarray):
    r, k = c.shape
    tuples = _complete_assignments(r, k)
    padded = np.hstack([c, np.zeros((r, 1))])
    approx = padded[np.arange(r), tuples].sum(axis=1)
    ok = np.isfinite(approx)
    return tuples[ok], approx[ok]


def _exact(c: np.ndarray, t) -> tuple[float, tuple]:
    k = c.shape[1]
    t = tuple(int(v) for v in t)
    return math.fsum(c[i, j] for i, j in enumerate(t) if j < k), t


def _to_assignment(c: np.ndarray, t) -> Assignment:
    k = c.shape[1]
    pairs = tuple((i, j) for i, j in enumerate(t) if j < k)
    return Assignment(pairs, math.fsum(c[i, j] for i, j in pairs))


def oracle_assignment(cost) -> Assignment:
    c = np.array(cost, dtype=float)
    r, k = c.shape
    if r > ASSIGNMENT_CAP or k > ASSIGNMENT_CAP:
        raise OracleSizeError(f"assignment oracle capped at {ASSIGNMENT_CAP}x{ASSIGNMENT_CAP}")
    if r == 0 or k == 0:
        return Assignment((), 0.0)
    tuples, approx = _enumerate(c)
    if len(tuples) == 0:
        raise InfeasibleError("no feasible complete assignment")
    lo = approx.min()
    near = tuples[approx <= lo + 1e-9 * (1.0 + abs(lo))]
    best = min(_exact(c, t) for t in near)
    return _to_assignment(c, best[1])


def oracle_kbest(cost, m: int) -> list[Assignment]:
    c = np.array(cost, dtype=float)
    r, k = c.shape
    if r > KBEST_CAP or k > KBEST_CAP:
        raise OracleSizeError(f"k-best oracle capped at {KBEST_CAP}x{KBEST_CAP}")
    tuples, _ = _enumerate(c)
    if len(tuples) == 0:
        raise InfeasibleError("no feasible complete assignment")
    ranked = sorted(_exact(c, t) for t in tuples)
    return [_to_assignment(c, t) for _, t in ranked[:m]]


def oracle_gla(similarity) -> tuple[float, tuple]:
    """Best total similarity over all partial one-to-one matchings."""
    s = np.array(similarity, dtype=float)
    r, k = s.shape
    if r > 6 or k > 6:
        raise OracleSizeError("GLA oracle capped at 6x6")
    best = (0.0, ())
    for size in range(1, min(r, k) + 1):
        for rows in itertools.combinations(range(r), size):
            for cols in itertools.permutations(range(k), size):
                vals = [s[i, j] for i, j in zip(rows, cols)]
                total = math.fsum(vals)
                if total > best[0]:
                    best = (total, tuple(zip(rows, cols)))
    return best


def oracle_flow(g) -> list[tuple[int, ...]]:
    """Minimum-cost set of node-disjoint source-to-sink paths, by enumeration.

    Detections are visited in frame order; each one is skipped, starts a new
    path, or continues a path whose current end has an edge to it.
    """
    n = len(g.detections)
    if n > FLOW_CAP:
        raise OracleSizeError(f"flow oracle capped at {FLOW_CAP} detections")
    order = sorted(range(n), key=lambda k: g.detections[k].frame)
    weight = {(i, j): w for i, j, w in g.edges}
    best_cost = 0.0
    best_paths: list[tuple[int, ...]] = []

    def cost_of(paths):
        total = []
        for p in paths:
            total.append(g.entry_cost + g.exit_cost)
            total.extend(g.det_cost[k] for k in p)
            total.extend(weight[a, b] for a, b in zip(p, p[1:]))
        return math.fsum(total)

    def rec(idx: int, paths: list[list[int]]):
        nonlocal best_cost, best_paths
        if idx == n:
            c = cost_of(paths)
            if c < best_cost:
                best_cost = c
                best_paths = [tuple(p) for p in paths]
            return
        k = order[idx]
        rec(idx + 1, paths)
        rec(idx + 1, paths + [[k]])
        for pi, p in enumerate(paths):
            if (p[-1], k) in weight:
                extended = paths[:pi] + [p + [k]] + paths[pi + 1:]
                rec(idx + 1, extended)

    rec(0, [])
    return sorted(best_paths)


def _gaussian(z: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    d = z - mean
    quad = float(d @ np.linalg.inv(cov) @ d)
    return math.exp(-0.5 * quad) / math.sqrt((2 * math.pi) ** len(z) * np.linalg.det(cov))


def oracle_jpda(targets, measurements, cfg, meas_cov: np.ndarray):
    """Exact JPDA marginals by enumerating every joint association hypothesis.

    ``targets`` are predicted Kalman states; ``measurements`` are boxes.
    Returns ``(beta, miss)`` with ``beta[i, j]`` the probability that target
    i produced measurement j and ``miss[i]`` the probability it produced none.
    """
    n, k = len(targets), len(measurements)
    if n > JPDA_CAP or k > JPDA_CAP:
        raise OracleSizeError(f"JPDA oracle capped at {JPDA_CAP} targets x {JPDA_CAP} measurements")
    zs = []
    for b in measurements:
        if isinstance(b, BBox):
            zs.append(np.array([b.left + b.width / 2, b.top + b.height / 2, b.width, b.height]))
        else:
            zs.append(np.asarray(b, dtype=float))
    lik = np.zeros((n, k))
    for i, t in enumerate(targets):
        zhat = np.asarray(t.mean)[:4]
        S = np.asarray(t.cov)[:4, :4] + meas_cov
        Sinv = np.linalg.inv(S)
        for j, z in enumerate(zs):
            d = z - zhat
            if float(d @ Sinv @ d) <= cfg.gate:
                lik[i, j] = cfg.p_detect * _gaussian(z, zhat, S) / cfg.clutter_density
    beta = np.zeros((n, k))
    miss = np.zeros(n)
    total = 0.0
    options = [[None] + [j for j in range(k) if lik[i, j] > 0] for i in range(n)]
    for choice in itertools.product(*options):
        used = [j for j in choice if j is not None]
        if len(used) != len(set(used)):
            continue
        w = 1.0
        for i, j in enumerate(choice):
            w *= (1 - cfg.p_detect) if j is None else lik[i, j]
        total += w
        for i, j in enumerate(choice):
            if j is None:
                miss[i] += w
            else:
                beta[i, j] += w
    if n:
        beta /= total
        miss /= total
    return beta, miss
