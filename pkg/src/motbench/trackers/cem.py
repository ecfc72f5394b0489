"""Continuous energy minimisation over target centre positions.

A state is a set of targets, each a run of (x, y) centres over consecutive
frames. The energy has five weighted terms:

* data: ``-lam / (|p - d|^2 + lam)`` summed over target positions and the
  detections within ``data_gate`` of them, shifted so it vanishes at the gate;
* dynamics: squared second differences of every target's path;
* exclusion: ``sigma / (|p_i - p_j|^2 + eps)`` over co-temporal target pairs;
* persistence: a sigmoid in the distance to the image border for every track
  that starts after the first frame or ends before the last;
* regulariser: number of targets plus ``mu`` times the summed inverse lengths.

Optimisation alternates Polak-Ribiere conjugate gradient on the positions with
a sweep of jump moves (grow, shrink, merge, split, add, remove), each accepted
only if it strictly lowers the energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..model import BBox, ParamSet, Sequence, frames_by_index
from .common import infer_sequence, interpolate, number_tracks

DEFAULTS = {
    "w_data": 1.0,
    "w_dyn": 0.05,
    "w_exc": 1.0,
    "w_per": 2.0,
    "w_reg": 1.0,
    "data_lambda": 25.0,
    "data_gate": 30.0,
    "exc_sigma": 100.0,
    "exc_eps": 1.0,
    "per_margin": 50.0,
    "per_scale": 10.0,
    "reg_mu": 5.0,
    "merge_gap": 20,
    "max_speed": 20.0,
    "cg_iters": 30,
    "max_rounds": 5,
    "energy_tol": 1e-3,
}


def default_params() -> ParamSet:
    return ParamSet(DEFAULTS, integer={"merge_gap", "cg_iters", "max_rounds"})


@dataclass(frozen=True)
class CEMTarget:
    start: int
    xy: np.ndarray  # (L, 2) centres for frames start .. start + L - 1

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise ValueError("target must span at least one frame")
        object.__setattr__(self, "xy", xy)

    @property
    def end(self) -> int:
        return self.start + len(self.xy) - 1

    def __len__(self):
        return len(self.xy)


@dataclass(frozen=True)
class CEMState:
    targets: tuple[CEMTarget, ...] = ()

    def flat(self) -> np.ndarray:
        if not self.targets:
            return np.zeros(0)
        return np.concatenate([t.xy.ravel() for t in self.targets])

    def with_flat(self, x: np.ndarray) -> "CEMState":
        out, k = [], 0
        for t in self.targets:
            n = 2 * len(t)
            out.append(CEMTarget(t.start, x[k:k + n].reshape(-1, 2)))
            k += n
        return CEMState(tuple(out))

    def replace(self, index: int, *new: CEMTarget) -> "CEMState":
        return CEMState(self.targets[:index] + tuple(new) + self.targets[index + 1:])


class CEMProblem:
    """Detections and weights, preprocessed for fast energy evaluation."""

    def __init__(self, detections, params: ParamSet | None = None, seq: Sequence | None = None):
        self.params = params or default_params()
        detections = list(detections)
        self.seq = infer_sequence(detections, seq)
        self.T = self.seq.frame_count
        self.W, self.H = self.seq.image_width, self.seq.image_height
        by_frame = frames_by_index(detections)
        dmax = max((len(v) for v in by_frame.values()), default=0)
        self.det_xy = np.full((self.T + 2, max(dmax, 1), 2), np.nan)
        self.det_wh = np.full((self.T + 2, max(dmax, 1), 2), np.nan)
        for f, dets in by_frame.items():
            if 1 <= f <= self.T:
                for j, d in enumerate(dets):
                    self.det_xy[f, j] = d.box.center
                    self.det_wh[f, j] = (d.box.width, d.box.height)
        self.detections = detections

    # -- energy terms ----------------------------------------------------------

    def _data(self, t: CEMTarget, grad: np.ndarray | None):
        p = self.params
        lam, gate = p["data_lambda"], p["data_gate"]
        d = self.det_xy[t.start:t.end + 1]
        diff = t.xy[:, None, :] - d
        r2 = np.nansum(diff ** 2, axis=2)
        inside = ~np.isnan(d[..., 0]) & (r2 < gate ** 2)
        e = np.where(inside, -lam / (r2 + lam) + lam / (gate ** 2 + lam), 0.0)
        if grad is not None:
            coef = np.where(inside, 2.0 * lam / (r2 + lam) ** 2, 0.0)
            grad += np.nansum(coef[..., None] * np.nan_to_num(diff), axis=1)
        return float(e.sum())

    @staticmethod
    def _dyn(t: CEMTarget, grad: np.ndarray | None):
        if len(t) < 3:
            return 0.0
        x = t.xy
        a = x[2:] - 2 * x[1:-1] + x[:-2]
        if grad is not None:
            grad[:-2] += 2 * a
            grad[1:-1] -= 4 * a
            grad[2:] += 2 * a
        return float((a ** 2).sum())

    def _exc(self, ti: CEMTarget, tj: CEMTarget, gi, gj):
        lo, hi = max(ti.start, tj.start), min(ti.end, tj.end)
        if lo > hi:
            return 0.0
        sig, eps = self.params["exc_sigma"], self.params["exc_eps"]
        a = ti.xy[lo - ti.start:hi - ti.start + 1]
        b = tj.xy[lo - tj.start:hi - tj.start + 1]
        d = a - b
        q = (d ** 2).sum(axis=1) + eps
        if gi is not None:
            g = (-2.0 * sig / q ** 2)[:, None] * d
            gi[lo - ti.start:hi - ti.start + 1] += g
            gj[lo - tj.start:hi - tj.start + 1] -= g
        return float((sig / q).sum())

    def _border(self, pt: np.ndarray):
        x, y = pt
        dists = np.array([x, self.W - x, y, self.H - y])
        k = int(np.argmin(dists))
        grad = np.zeros(2)
        grad[k // 2] = 1.0 if k % 2 == 0 else -1.0
        return dists[k], grad

    def _per(self, t: CEMTarget, grad: np.ndarray | None):
        m, s = self.params["per_margin"], self.params["per_scale"]
        total = 0.0
        for idx, active in ((0, t.start > 1), (len(t) - 1, t.end < self.T)):
            if not active:
                continue
            b, db = self._border(t.xy[idx])
            sg = 1.0 / (1.0 + math.exp(-(b - m) / s))
            total += sg
            if grad is not None:
                grad[idx] += sg * (1 - sg) / s * db
        return total

    def _reg(self, state: CEMState):
        return len(state.targets) + self.params["reg_mu"] * sum(1.0 / len(t) for t in state.targets)

    def terms(self, state: CEMState) -> dict[str, float]:
        """Unweighted value of each energy term."""
        ts = state.targets
        return {
            "data": sum(self._data(t, None) for t in ts),
            "dyn": sum(self._dyn(t, None) for t in ts),
            "exc": sum(self._exc(ts[i], ts[j], None, None)
                       for i in range(len(ts)) for j in range(i + 1, len(ts))),
            "per": sum(self._per(t, None) for t in ts),
            "reg": self._reg(state),
        }

    def energy(self, state: CEMState) -> float:
        p = self.params
        t = self.terms(state)
        return (p["w_data"] * t["data"] + p["w_dyn"] * t["dyn"] + p["w_exc"] * t["exc"]
                + p["w_per"] * t["per"] + p["w_reg"] * t["reg"])

    def gradient(self, state: CEMState) -> np.ndarray:
        """Analytic gradient with respect to every centre, flattened like ``state.flat()``."""
        p = self.params
        ts = state.targets
        grads = [np.zeros_like(t.xy) for t in ts]
        for t, g in zip(ts, grads):
            gd = np.zeros_like(g)
            self._data(t, gd)
            g += p["w_data"] * gd
            gd[:] = 0
            self._dyn(t, gd)
            g += p["w_dyn"] * gd
            gd[:] = 0
            self._per(t, gd)
            g += p["w_per"] * gd
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                gi, gj = np.zeros_like(grads[i]), np.zeros_like(grads[j])
                self._exc(ts[i], ts[j], gi, gj)
                grads[i] += p["w_exc"] * gi
                grads[j] += p["w_exc"] * gj
        if not grads:
            return np.zeros(0)
        return np.concatenate([g.ravel() for g in grads])

    # -- helpers for moves and output -------------------------------------------

    def detections_near(self, frame: int, pt: np.ndarray, radius: float) -> np.ndarray:
        if not 1 <= frame <= self.T:
            return np.zeros(0, dtype=int)
        d = self.det_xy[frame]
        r2 = np.nansum((d - pt) ** 2, axis=1)
        ok = ~np.isnan(d[:, 0]) & (r2 < radius ** 2)
        idx = np.flatnonzero(ok)
        return idx[np.argsort(r2[idx], kind="stable")]


# -- public energy API ---------------------------------------------------------


def cem_energy(state: CEMState, detections, params: ParamSet | None = None, seq: Sequence | None = None) -> float:
    return CEMProblem(detections, params, seq).energy(state)


def cem_gradient(state: CEMState, detections, params: ParamSet | None = None, seq: Sequence | None = None) -> np.ndarray:
    return CEMProblem(detections, params, seq).gradient(state)


# -- conjugate gradient ---------------------------------------------------------


def conjugate_gradient(problem: CEMProblem, state: CEMState, iters: int, tol: float, on_step=None) -> CEMState:
    """Polak-Ribiere (non-negative beta) with restarts and Armijo backtracking.

    Every accepted step lowers the energy; ``on_step`` receives the new value.
    """
    x = state.flat()
    if x.size == 0:
        return state
    fx = problem.energy(state)
    g = problem.gradient(state)
    d = -g
    reach = 1.0  # trial step, as the largest coordinate displacement in pixels
    for _ in range(iters):
        gd = float(g @ d)
        if gd >= 0:
            d, gd = -g, -float(g @ g)
        if -gd < 1e-12:
            break
        dmax = np.abs(d).max()
        alpha = reach / dmax
        while True:
            xn = x + alpha * d
            fn = problem.energy(state.with_flat(xn))
            if fn <= fx + 1e-4 * alpha * gd and fn < fx:
                break
            alpha *= 0.5
            if alpha * dmax < 1e-8:
                return state.with_flat(x)
        gn = problem.gradient(state.with_flat(xn))
        beta = max(0.0, float(gn @ (gn - g)) / float(g @ g))
        d = -gn + beta * d
        improvement = fx - fn
        x, fx, g = xn, fn, gn
        if on_step is not None:
            on_step(fx)
        reach = min(2.0 * alpha * dmax, 10.0)
        if improvement < tol:
            break
    return state.with_flat(x)


# -- jump moves ---------------------------------------------------------------


MOVE_ORDER = ("grow", "shrink", "merge", "split", "add", "remove")


@dataclass
class CEMResult:
    state: CEMState
    trajectories: list
    energy_trace: list = field(default_factory=list)
    moves: list = field(default_factory=list)  # (move name, target index)


class _Search:
    def __init__(self, problem: CEMProblem, state: CEMState, trace: list, moves: list):
        self.problem = problem
        self.state = state
        self.energy = problem.energy(state)
        self.trace = trace
        self.moves = moves

    def attempt(self, candidate: CEMState, name: str, index: int) -> bool:
        e = self.problem.energy(candidate)
        if e < self.energy:
            self.state, self.energy = candidate, e
            self.trace.append(e)
            self.moves.append((name, index))
            return True
        return False

    def _extension(self, t: CEMTarget, at_end: bool):
        p = self.problem
        frame = t.end + 1 if at_end else t.start - 1
        if not 1 <= frame <= p.T:
            return None
        xy = t.xy if at_end else t.xy[::-1]
        guess = xy[-1] + (xy[-1] - xy[-2] if len(xy) > 1 else 0.0)
        near = p.detections_near(frame, guess, p.params["data_gate"])
        if len(near):
            guess = p.det_xy[frame, near[0]]
        if at_end:
            return CEMTarget(t.start, np.vstack([t.xy, guess]))
        return CEMTarget(t.start - 1, np.vstack([guess, t.xy]))

    def grow(self):
        i = 0
        while i < len(self.state.targets):
            for at_end in (True, False):
                while True:
                    new = self._extension(self.state.targets[i], at_end)
                    if new is None or not self.attempt(self.state.replace(i, new), "grow", i):
                        break
            i += 1

    def shrink(self):
        i = 0
        while i < len(self.state.targets):
            for at_end in (True, False):
                while len(self.state.targets[i]) > 1:
                    t = self.state.targets[i]
                    new = CEMTarget(t.start, t.xy[:-1]) if at_end else CEMTarget(t.start + 1, t.xy[1:])
                    if not self.attempt(self.state.replace(i, new), "shrink", i):
                        break
            i += 1

    def merge(self):
        gap_max = self.problem.params["merge_gap"]
        changed = True
        while changed:
            changed = False
            ts = self.state.targets
            for i, a in enumerate(ts):
                for j, b in enumerate(ts):
                    gap = b.start - a.end
                    if i == j or gap < 1 or gap > gap_max:
                        continue
                    steps = np.arange(1, gap)[:, None] / gap
                    fill = a.xy[-1] + steps * (b.xy[0] - a.xy[-1])
                    joined = CEMTarget(a.start, np.vstack([a.xy, fill, b.xy]))
                    rest = [t for k, t in enumerate(ts) if k not in (i, j)]
                    rest.insert(min(i, j), joined)
                    if self.attempt(CEMState(tuple(rest)), "merge", i):
                        changed = True
                        break
                if changed:
                    break

    def split(self):
        i = 0
        while i < len(self.state.targets):
            t = self.state.targets[i]
            if len(t) >= 4:
                acc = np.linalg.norm(t.xy[2:] - 2 * t.xy[1:-1] + t.xy[:-2], axis=1)
                k = int(np.argmax(acc)) + 1  # split after the kink
                left = CEMTarget(t.start, t.xy[:k + 1])
                right = CEMTarget(t.start + k + 1, t.xy[k + 1:])
                if len(right) and self.attempt(self.state.replace(i, left, right), "split", i):
                    i += 2
                    continue
            i += 1

    def _unexplained(self):
        p = self.problem
        gate = p.params["data_gate"]
        mask = ~np.isnan(p.det_xy[..., 0])
        for t in self.state.targets:
            d = p.det_xy[t.start:t.end + 1]
            r2 = np.nansum((d - t.xy[:, None, :]) ** 2, axis=2)
            mask[t.start:t.end + 1] &= ~(r2 < gate ** 2)
        return mask

    def add(self):
        p = self.problem
        speed = p.params["max_speed"]
        free = self._unexplained()
        for f in range(1, p.T + 1):
            for j in np.flatnonzero(free[f]):
                if not free[f, j]:
                    continue
                chain = [p.det_xy[f, j]]
                used = [(f, j)]
                g = f + 1
                while g <= p.T:
                    cand = [k for k in np.flatnonzero(free[g])
                            if np.linalg.norm(p.det_xy[g, k] - chain[-1]) <= speed]
                    if not cand:
                        break
                    k = min(cand, key=lambda k: np.linalg.norm(p.det_xy[g, k] - chain[-1]))
                    chain.append(p.det_xy[g, k])
                    used.append((g, k))
                    g += 1
                new = CEMTarget(f, np.array(chain))
                state = CEMState(self.state.targets + (new,))
                if self.attempt(state, "add", len(self.state.targets)):
                    for a, b in used:
                        free[a, b] = False

    def remove(self):
        i = 0
        while i < len(self.state.targets):
            if not self.attempt(self.state.replace(i), "remove", i):
                i += 1

    def sweep(self):
        for name in MOVE_ORDER:
            getattr(self, name)()


def state_from_tracks(tracks) -> CEMState:
    targets = []
    for t in tracks:
        boxes = interpolate(dict(t.boxes))
        targets.append(CEMTarget(min(boxes), np.array([b.center for b in boxes.values()])))
    return CEMState(tuple(targets))


def _box_sizes(problem: CEMProblem, t: CEMTarget) -> np.ndarray:
    """Per-frame (w, h) from the nearest gated detection, held across frames without one."""
    gate = problem.params["data_gate"]
    wh = np.full((len(t), 2), np.nan)
    for k in range(len(t)):
        near = problem.detections_near(t.start + k, t.xy[k], gate)
        if len(near):
            wh[k] = problem.det_wh[t.start + k, near[0]]
    have = np.flatnonzero(~np.isnan(wh[:, 0]))
    if len(have) == 0:
        fallback = np.nanmedian(problem.det_wh.reshape(-1, 2), axis=0)
        return np.tile(np.nan_to_num(fallback, nan=1.0), (len(t), 1))
    for k in np.flatnonzero(np.isnan(wh[:, 0])):
        wh[k] = wh[have[np.argmin(np.abs(have - k))]]
    return wh


def to_trajectories(problem: CEMProblem, state: CEMState):
    maps = []
    for t in state.targets:
        wh = _box_sizes(problem, t)
        maps.append({
            t.start + k: BBox.from_center(t.xy[k, 0], t.xy[k, 1], max(wh[k, 0], 1e-3), max(wh[k, 1], 1e-3))
            for k in range(len(t))
        })
    return number_tracks(maps)


def run_cem(detections, params: ParamSet | None = None, init=None, seq: Sequence | None = None) -> CEMResult:
    """Alternate conjugate gradient and jump-move sweeps from an initial solution.

    ``init`` is a list of trajectories; when omitted the DP flow tracker
    provides it.
    """
    detections = list(detections)
    params = params or default_params()
    problem = CEMProblem(detections, params, seq)
    if init is None:
        from .dp_nms import track_dp_nms

        init = track_dp_nms(detections, seq=problem.seq, mode="dp")
    state = state_from_tracks(init)
    trace = [problem.energy(state)]
    moves: list = []

    for _ in range(params["max_rounds"]):
        before = trace[-1]
        state = conjugate_gradient(problem, state, params["cg_iters"], params["energy_tol"], trace.append)
        search = _Search(problem, state, trace, moves)
        search.sweep()
        state = search.state
        if before - trace[-1] < params["energy_tol"]:
            break
    return CEMResult(state, to_trajectories(problem, state), trace, moves)


def track_cem(detections, params: ParamSet | None = None, seq: Sequence | None = None, init=None):
    return run_cem(detections, params, init, seq).trajectories
