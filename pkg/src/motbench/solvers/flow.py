"""Min-cost-flow tracking graph and its two solvers.

Every detection is a split node (in -> out) carrying a detection cost. The
source connects to every in-node and every out-node connects to the sink;
transition edges join detections up to ``max_gap`` frames apart. All
capacities are one, so a flow decomposes into node-disjoint tracks.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..model import Detection, ParamSet, iou

CONF_EPS = 1e-9
COST_CLAMP = 20.0


@dataclass(frozen=True)
class FlowGraph:
    detections: tuple[Detection, ...]
    det_cost: tuple[float, ...]
    entry_cost: float
    exit_cost: float
    edges: tuple[tuple[int, int, float], ...]
    nms_threshold: float = 0.5

    def __len__(self):
        return len(self.detections)

    def successors(self) -> list[list[tuple[int, float]]]:
        out = [[] for _ in self.detections]
        for i, j, w in self.edges:
            out[i].append((j, w))
        return out

    def predecessors(self) -> list[list[tuple[int, float]]]:
        out = [[] for _ in self.detections]
        for i, j, w in self.edges:
            out[j].append((i, w))
        return out

    def path_cost(self, path) -> float:
        if not path:
            return 0.0
        w = dict(((i, j), c) for i, j, c in self.edges)
        total = [self.entry_cost, self.exit_cost]
        total.extend(self.det_cost[k] for k in path)
        total.extend(w[a, b] for a, b in zip(path, path[1:]))
        return math.fsum(total)

    def total_cost(self, paths) -> float:
        return math.fsum(self.path_cost(p) for p in paths)


def detection_cost(confidence: float) -> float:
    """log((1 - c) / c), clamped; negative for confident detections."""
    c = min(max(confidence, CONF_EPS), 1.0 - CONF_EPS)
    return float(np.clip(math.log((1.0 - c) / c), -COST_CLAMP, COST_CLAMP))


def transition_cost(a: Detection, b: Detection, motion_sigma: float, gap_penalty: float) -> float:
    """Quadratic in the centre displacement plus a linear charge per skipped frame.

    The displacement is not divided by the gap: a skip edge must never be
    cheaper than the chain of single steps it bypasses.
    """
    gap = b.frame - a.frame
    (ax, ay), (bx, by) = a.box.center, b.box.center
    dist = math.hypot(bx - ax, by - ay)
    return 0.5 * (dist / motion_sigma) ** 2 + gap_penalty * (gap - 1)


def transition_allowed(a: Detection, b: Detection, max_gap: int, max_speed: float) -> bool:
    gap = b.frame - a.frame
    if gap < 1 or gap > max_gap:
        return False
    (ax, ay), (bx, by) = a.box.center, b.box.center
    return math.hypot(bx - ax, by - ay) <= max_speed * gap


FLOW_DEFAULTS = {
    "entry_exit_cost": 2.0,
    "max_gap": 5,
    "max_speed": 20.0,
    "motion_sigma": 5.0,
    "gap_penalty": 0.5,
    "nms_threshold": 0.5,
}


def flow_params(**overrides) -> ParamSet:
    return ParamSet(FLOW_DEFAULTS, integer={"max_gap"}).replace(overrides)


def build_flow_graph(detections, params: ParamSet) -> FlowGraph:
    """Build the tracking network; detections are put in canonical frame order."""
    dets = sorted(
        detections,
        key=lambda d: (d.frame, d.box.left, d.box.top, d.box.width, d.box.height, d.confidence),
    )
    max_gap = params["max_gap"]
    max_speed = params["max_speed"]
    sigma = params["motion_sigma"]
    gap_penalty = params["gap_penalty"]

    frames = np.array([d.frame for d in dets], dtype=int)
    edges = []
    for i, a in enumerate(dets):
        lo = np.searchsorted(frames, a.frame + 1, side="left")
        hi = np.searchsorted(frames, a.frame + max_gap, side="right")
        for j in range(lo, hi):
            b = dets[j]
            if transition_allowed(a, b, max_gap, max_speed):
                edges.append((i, j, transition_cost(a, b, sigma, gap_penalty)))
    cost = params["entry_exit_cost"]
    return FlowGraph(
        detections=tuple(dets),
        det_cost=tuple(detection_cost(d.confidence) for d in dets),
        entry_cost=float(cost),
        exit_cost=float(cost),
        edges=tuple(edges),
        nms_threshold=float(params["nms_threshold"]),
    )


class _Residual:
    """Residual network over split nodes: source 0, in(k)=2k+1, out(k)=2k+2, sink 2n+1."""

    def __init__(self, g: FlowGraph):
        n = len(g)
        self.n_nodes = 2 * n + 2
        self.source, self.sink = 0, 2 * n + 1
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for k in range(n):
            self._add(self.source, 2 * k + 1, g.entry_cost)
            self._add(2 * k + 1, 2 * k + 2, g.det_cost[k])
            self._add(2 * k + 2, self.sink, g.exit_cost)
        for i, j, w in g.edges:
            self._add(2 * i + 2, 2 * j + 1, w)

    def _add(self, u, v, w):
        self.adj[u].append(len(self.to))
        self.to.append(v); self.cap.append(1); self.cost.append(w)
        self.adj[v].append(len(self.to))
        self.to.append(u); self.cap.append(0); self.cost.append(-w)

    def dag_potentials(self, n_dets: int) -> list[float]:
        # nodes 0..2n+1 are already in topological order (detections sorted by frame)
        dist = [math.inf] * self.n_nodes
        dist[self.source] = 0.0
        for u in range(self.n_nodes):
            if dist[u] == math.inf:
                continue
            for e in self.adj[u]:
                if self.cap[e] > 0:
                    v = self.to[e]
                    if dist[u] + self.cost[e] < dist[v]:
                        dist[v] = dist[u] + self.cost[e]
        return dist


def min_cost_flow(g: FlowGraph) -> list[tuple[int, ...]]:
    """Exact optimum over all flow values by successive shortest paths.

    Augments one unit at a time along the cheapest residual path (Dijkstra on
    potential-reduced costs) and stops once that path would not lower the
    total cost. Returns tracks as tuples of detection indices.
    """
    n = len(g)
    if n == 0:
        return []
    res = _Residual(g)
    pot = res.dag_potentials(n)
    s, t = res.source, res.sink
    while True:
        dist = [math.inf] * res.n_nodes
        via = [-1] * res.n_nodes
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for e in res.adj[u]:
                if res.cap[e] <= 0:
                    continue
                v = res.to[e]
                nd = d + max(0.0, res.cost[e] + pot[u] - pot[v])
                if nd < dist[v]:
                    dist[v] = nd
                    via[v] = e
                    heapq.heappush(heap, (nd, v))
        if dist[t] == math.inf:
            break
        true_cost = dist[t] + pot[t] - pot[s]
        if true_cost >= 0:
            break
        v = t
        while v != s:
            e = via[v]
            res.cap[e] -= 1
            res.cap[e ^ 1] += 1
            v = res.to[e ^ 1]
        for u in range(res.n_nodes):
            if dist[u] < math.inf:
                pot[u] += dist[u]
    return _extract_paths(res, n)


def _extract_paths(res: _Residual, n: int) -> list[tuple[int, ...]]:
    paths = []
    for e in res.adj[res.source]:
        if e % 2 == 0 and res.cap[e] == 0:
            node = res.to[e]
            path = []
            while node != res.sink:
                k = (node - 1) // 2
                path.append(k)
                out_node = 2 * k + 2
                nxt = None
                for e2 in res.adj[out_node]:
                    if e2 % 2 == 0 and res.cap[e2] == 0:
                        nxt = res.to[e2]
                        break
                node = nxt
            paths.append(tuple(path))
    paths.sort()
    return paths


def dp_greedy_paths(g: FlowGraph) -> list[tuple[int, ...]]:
    """Approximate solver: repeated best single path by DAG dynamic programming.

    After each extracted track, its detections are removed together with every
    same-frame detection it suppresses (IoU above the NMS threshold). Stops
    when the best remaining track has non-negative cost.
    """
    n = len(g)
    alive = [True] * n
    preds = g.predecessors()
    by_frame: dict[int, list[int]] = {}
    for k, d in enumerate(g.detections):
        by_frame.setdefault(d.frame, []).append(k)
    paths = []
    while True:
        best = [math.inf] * n
        back = [-1] * n
        for k in range(n):
            if not alive[k]:
                continue
            b, arg = g.entry_cost, -1
            for i, w in preds[k]:
                if alive[i] and best[i] + w < b:
                    b, arg = best[i] + w, i
            best[k] = b + g.det_cost[k]
            back[k] = arg
        end, end_cost = -1, 0.0
        for k in range(n):
            if alive[k] and best[k] + g.exit_cost < end_cost:
                end, end_cost = k, best[k] + g.exit_cost
        if end < 0:
            break
        path = []
        k = end
        while k >= 0:
            path.append(k)
            k = back[k]
        path.reverse()
        paths.append(tuple(path))
        for k in path:
            alive[k] = False
            box = g.detections[k].box
            for other in by_frame[g.detections[k].frame]:
                if alive[other] and iou(box, g.detections[other].box) > g.nms_threshold:
                    alive[other] = False
    return paths
