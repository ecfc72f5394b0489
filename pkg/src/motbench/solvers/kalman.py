"""Constant-velocity Kalman filter on boxes.

State: (cx, cy, w, h, vcx, vcy, vw, vh). Measurement: (cx, cy, w, h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import BBox

DIM = 8
MEAS_DIM = 4
SYM_TOL = 1e-9

H = np.hstack([np.eye(MEAS_DIM), np.zeros((MEAS_DIM, MEAS_DIM))])


class CovarianceError(ArithmeticError):
    """Covariance lost positive definiteness."""


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(DIM)
        cov = np.asarray(self.cov, dtype=float).reshape(DIM, DIM)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def box(self) -> BBox:
        cx, cy, w, h = self.mean[:4]
        return BBox.from_center(cx, cy, max(w, 1.0), max(h, 1.0))


@dataclass(frozen=True)
class MotionModel:
    """Noise levels, as standard deviations in pixels (per frame for process noise)."""

    q_pos: float = 0.5
    q_size: float = 0.1
    r_pos: float = 2.0
    r_size: float = 3.0

    def transition(self, dt: float) -> np.ndarray:
        f = np.eye(DIM)
        f[:4, 4:] = dt * np.eye(4)
        return f

    def process_noise(self, dt: float) -> np.ndarray:
        # white-acceleration model, per axis [[dt^3/3, dt^2/2], [dt^2/2, dt]]
        q = np.zeros((DIM, DIM))
        for axis, sd in enumerate([self.q_pos, self.q_pos, self.q_size, self.q_size]):
            var = sd ** 2
            q[axis, axis] = var * dt ** 3 / 3.0
            q[axis, axis + 4] = q[axis + 4, axis] = var * dt ** 2 / 2.0
            q[axis + 4, axis + 4] = var * dt
        return q

    def measurement_noise(self) -> np.ndarray:
        return np.diag([self.r_pos ** 2, self.r_pos ** 2, self.r_size ** 2, self.r_size ** 2])


def box_to_measurement(box: BBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.width, box.height])


def initial_state(box: BBox, model: MotionModel, velocity=(0.0, 0.0, 0.0, 0.0), velocity_sd: float = 5.0) -> KalmanState:
    mean = np.concatenate([box_to_measurement(box), np.asarray(velocity, dtype=float)])
    var = np.concatenate([np.diag(model.measurement_noise()), np.full(4, velocity_sd ** 2)])
    return KalmanState(mean, np.diag(var))


def checked_covariance(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise CovarianceError("covariance is not positive definite")
    return cov


def kalman_predict(s: KalmanState, dt: float = 1.0, model: MotionModel = MotionModel()) -> KalmanState:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    f = model.transition(dt)
    return KalmanState(f @ s.mean, checked_covariance(f @ s.cov @ f.T + model.process_noise(dt)))


def innovation(s: KalmanState, model: MotionModel = MotionModel()):
    """Predicted measurement and its covariance S = H P H^T + R."""
    return H @ s.mean, H @ s.cov @ H.T + model.measurement_noise()


def kalman_gain(s: KalmanState, model: MotionModel = MotionModel()) -> np.ndarray:
    _, S = innovation(s, model)
    return np.linalg.solve(S, H @ s.cov).T


def kalman_update(s: KalmanState, z, model: MotionModel = MotionModel()) -> KalmanState:
    """Linear update with the Joseph-form covariance."""
    z = box_to_measurement(z) if isinstance(z, BBox) else np.asarray(z, dtype=float)
    k = kalman_gain(s, model)
    mean = s.mean + k @ (z - H @ s.mean)
    a = np.eye(DIM) - k @ H
    cov = a @ s.cov @ a.T + k @ model.measurement_noise() @ k.T
    return KalmanState(mean, checked_covariance(cov))
