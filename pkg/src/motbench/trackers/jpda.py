"""Online JPDA with the joint distribution truncated to the m best hypotheses.

Each frame: predict every target, gate measurements by Mahalanobis distance,
rank joint association hypotheses with Murty's algorithm, turn hypothesis
weights into per-(target, measurement) marginals and apply the PDA update.
Targets that share no gated measurement are handled as separate clusters,
which leaves the marginals unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..model import Detection, ParamSet, Trajectory, frames_by_index, iou
from ..solvers.assignment import gated_assignment, murty_mbest
from ..solvers.kalman import (
    H,
    KalmanState,
    MotionModel,
    box_to_measurement,
    checked_covariance,
    initial_state,
    innovation,
    kalman_gain,
    kalman_predict,
)

DEFAULTS = {
    "m": 100,
    "gate": 16.0,
    "p_detect": 0.9,
    "clutter_density": 1e-6,
    "q_pos": 0.5,
    "q_size": 0.1,
    "r_pos": 2.0,
    "r_size": 3.0,
    "birth_threshold": 0.5,
    "birth_iou": 0.3,
    "init_frames": 3,
    "death_threshold": 0.5,
    "kill_frames": 5,
    "coast_frames": 3,
}


def default_params() -> ParamSet:
    return ParamSet(DEFAULTS, integer={"m", "init_frames", "kill_frames", "coast_frames"})


@dataclass(frozen=True)
class JPDAConfig:
    m: int = 100
    gate: float = 16.0
    p_detect: float = 0.9
    clutter_density: float = 1e-6

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 0.0 < self.p_detect < 1.0:
            raise ValueError("p_detect must lie in (0, 1)")
        if not self.clutter_density > 0:
            raise ValueError("clutter_density must be > 0")

    @classmethod
    def from_params(cls, params: ParamSet) -> "JPDAConfig":
        # p_detect may be pushed past 1 by the tuner's [x/2, 2x] sampling
        p = min(max(params["p_detect"], 1e-6), 1 - 1e-6)
        return cls(params["m"], params["gate"], p, params["clutter_density"])


def motion_model(params: ParamSet) -> MotionModel:
    return MotionModel(params["q_pos"], params["q_size"], params["r_pos"], params["r_size"])


def log_likelihoods(states, zs, cfg: JPDAConfig, model: MotionModel) -> np.ndarray:
    """log(p_D N(z; zhat, S) / clutter_density) per pair; -inf outside the gate."""
    out = np.full((len(states), len(zs)), -np.inf)
    for i, s in enumerate(states):
        zhat, S = innovation(s, model)
        Sinv = np.linalg.inv(S)
        _, logdet = np.linalg.slogdet(S)
        for j, z in enumerate(zs):
            d = z - zhat
            d2 = float(d @ Sinv @ d)
            if d2 <= cfg.gate:
                out[i, j] = (
                    math.log(cfg.p_detect) - 0.5 * d2 - 0.5 * logdet
                    - 0.5 * len(z) * math.log(2 * math.pi) - math.log(cfg.clutter_density)
                )
    return out


def hypothesis_cost_matrix(loglik: np.ndarray, p_detect: float) -> np.ndarray:
    """Rows: targets. Columns: measurements, then one private miss column per target."""
    n, k = loglik.shape
    cost = np.full((n, k + n), np.inf)
    cost[:, :k] = -loglik
    cost[np.arange(n), k + np.arange(n)] = -math.log(1.0 - p_detect)
    return cost


def _clusters(gated: np.ndarray):
    n, k = gated.shape
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j in range(k):
        rows = np.flatnonzero(gated[:, j])
        for r in rows[1:]:
            a, b = find(int(rows[0])), find(int(r))
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for rows in groups.values():
        cols = sorted(set(np.flatnonzero(gated[rows].any(axis=0)).tolist()))
        out.append((rows, cols))
    return out


def jpda_marginals(states, zs, cfg: JPDAConfig, model: MotionModel):
    """Association marginals from the m best joint hypotheses.

    Returns ``(beta, miss, n_hypotheses)``: ``beta[i, j]`` is the probability
    that target i produced measurement j, ``miss[i]`` that it produced none,
    and ``n_hypotheses`` the number of hypotheses used per cluster.
    """
    zs = [np.asarray(z, dtype=float) for z in zs]
    n, k = len(states), len(zs)
    beta = np.zeros((n, k))
    miss = np.ones(n)
    used = []
    if n == 0:
        return beta, miss, used
    loglik = log_likelihoods(states, zs, cfg, model)
    for rows, cols in _clusters(np.isfinite(loglik)):
        if not cols:
            continue
        sub = hypothesis_cost_matrix(loglik[np.ix_(rows, cols)], cfg.p_detect)
        hyps = murty_mbest(sub, cfg.m)
        used.append(len(hyps))
        costs = np.array([h.total_cost for h in hyps])
        w = np.exp(-(costs - costs.min()))
        w /= w.sum()
        b = np.zeros((len(rows), len(cols)))
        ms = np.zeros(len(rows))
        for wt, h in zip(w, hyps):
            for r, c in h.pairs:
                if c < len(cols):
                    b[r, c] += wt
                else:
                    ms[r] += wt
        beta[np.ix_(rows, cols)] = b
        miss[rows] = ms
    return beta, miss, used


def pda_update(s: KalmanState, zs, beta_row: np.ndarray, miss: float, model: MotionModel) -> KalmanState:
    """Probability-weighted Kalman update with the spread-of-innovations term."""
    if not len(zs) or miss >= 1.0:
        return s
    zhat, S = innovation(s, model)
    K = kalman_gain(s, model)
    nus = np.array([np.asarray(z, dtype=float) - zhat for z in zs])
    nu = beta_row @ nus
    mean = s.mean + K @ nu
    a = np.eye(len(s.mean)) - K @ H
    p_upd = a @ s.cov @ a.T + K @ model.measurement_noise() @ K.T
    spread = (nus.T * beta_row) @ nus - np.outer(nu, nu)
    cov = miss * s.cov + (1.0 - miss) * p_upd + K @ spread @ K.T
    return KalmanState(mean, checked_covariance(cov))


@dataclass
class _Target:
    id: int
    state: KalmanState
    misses: int = 0
    boxes: dict = field(default_factory=dict)


@dataclass
class FrameRecord:
    frame: int
    target_ids: list
    predicted: list
    measurements: list
    beta: np.ndarray
    miss: np.ndarray


class JPDATracker:
    """Frame-by-frame tracker; output at frame t depends on frames <= t only."""

    def __init__(self, params: ParamSet | None = None, record: bool = False):
        self.params = params or default_params()
        self.cfg = JPDAConfig.from_params(self.params)
        self.model = motion_model(self.params)
        self.targets: list[_Target] = []
        self.finished: list[_Target] = []
        self.candidates: list[list[Detection]] = []
        self.next_id = 1
        self.last_frame = None
        self.records: list[FrameRecord] | None = [] if record else None

    def step(self, frame: int, detections: list[Detection]) -> None:
        p = self.params
        dt = 1 if self.last_frame is None else frame - self.last_frame
        self.last_frame = frame
        for t in self.targets:
            t.state = kalman_predict(t.state, dt, self.model)
        zs = [box_to_measurement(d.box) for d in detections]
        states = [t.state for t in self.targets]
        beta, miss, _ = jpda_marginals(states, zs, self.cfg, self.model)
        if self.records is not None:
            self.records.append(FrameRecord(frame, [t.id for t in self.targets], states, zs, beta, miss))

        survivors = []
        for i, t in enumerate(self.targets):
            t.state = pda_update(t.state, zs, beta[i], miss[i], self.model)
            t.misses = t.misses + 1 if miss[i] > p["death_threshold"] else 0
            # coast through short detection gaps on the prediction
            if t.misses <= p["coast_frames"]:
                t.boxes[frame] = t.state.box
            if t.misses >= p["kill_frames"]:
                self.finished.append(t)
            else:
                survivors.append(t)
        self.targets = survivors

        claimed = beta.max(axis=0) if beta.shape[0] else np.zeros(len(zs))
        free = [d for d, c in zip(detections, claimed) if c < p["birth_threshold"]]
        self._births(frame, free)

    def _births(self, frame: int, free: list[Detection]) -> None:
        p = self.params
        live = [c for c in self.candidates if c[-1].frame == frame - 1]
        links = {}
        if live and free:
            ov = np.array([[iou(c[-1].box, d.box) for d in free] for c in live])
            cost = np.where(ov > p["birth_iou"], 1.0 - ov, np.inf)
            links = {col: row for row, col in gated_assignment(cost, 1.0).pairs}
        chains = []
        for j, d in enumerate(free):
            chains.append(live[links[j]] + [d] if j in links else [d])
        self.candidates = []
        for chain in chains:
            if len(chain) >= p["init_frames"]:
                self._spawn(chain)
            else:
                self.candidates.append(chain)

    def _spawn(self, chain: list[Detection]) -> None:
        first, last = chain[0], chain[-1]
        span = max(last.frame - first.frame, 1)
        vel = (box_to_measurement(last.box) - box_to_measurement(first.box)) / span
        t = _Target(self.next_id, initial_state(last.box, self.model, vel, velocity_sd=2.0))
        self.next_id += 1
        t.boxes.update({d.frame: d.box for d in chain})
        self.targets.append(t)

    def trajectories(self) -> list[Trajectory]:
        # ids follow birth order, which is stable under truncation of the input
        done = sorted(self.finished + self.targets, key=lambda t: t.id)
        return [Trajectory(t.id, t.boxes) for t in done if t.boxes]


def track_jpda_m(detections, params: ParamSet | None = None, seq=None, record: bool = False):
    tracker = JPDATracker(params, record=record)
    by_frame = frames_by_index(detections)
    if by_frame:
        last = seq.frame_count if seq is not None else max(by_frame)
        for f in range(min(by_frame), last + 1):
            tracker.step(f, by_frame.get(f, []))
    tracks = tracker.trajectories()
    return (tracks, tracker) if record else tracks
