"""Constant-velocity Kalman filter over (cx, cy, aspect, height) box states.

Noise scales with box height, the SORT-family convention: observation and
process uncertainty of a 200 px pedestrian should dwarf that of a 20 px bird.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import BBox

# aspect ratio is dimensionless, so its noise does not scale with height
_ASPECT_STD = 1e-2
_ASPECT_VEL_STD = 1e-5
_ASPECT_MEAS_STD = 1e-1


@dataclass(frozen=True)
class MotionNoiseConfig:
    """Kalman noise weights, all relative to current box height."""

    pos_weight: float = 1.0 / 20.0
    vel_weight: float = 1.0 / 160.0
    meas_weight: float = 1.0 / 20.0
    init_pos_factor: float = 2.0
    init_vel_factor: float = 10.0


DEFAULT_NOISE = MotionNoiseConfig()

_DIM = 8
_F = np.eye(_DIM)
for _i in range(4):
    _F[_i, _i + 4] = 1.0
_H = np.eye(4, _DIM)


@dataclass
class KalmanState:
    """mean = (cx, cy, a, h, v_cx, v_cy, v_a, v_h); cov is 8x8 SPD."""

    mean: np.ndarray
    cov: np.ndarray


def bbox_to_state(b: BBox) -> np.ndarray:
    return np.array([b.cx, b.cy, b.aspect, b.h])


def state_to_bbox(vec: np.ndarray) -> BBox:
    cx, cy, a, h = float(vec[0]), float(vec[1]), float(vec[2]), float(vec[3])
    w = a * h
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def kf_init(b: BBox, noise: MotionNoiseConfig = DEFAULT_NOISE) -> KalmanState:
    """Start a filter on a box with zero velocity and inflated velocity spread."""
    mean = np.zeros(_DIM)
    mean[:4] = bbox_to_state(b)
    pw = noise.init_pos_factor * noise.pos_weight * b.h
    vw = noise.init_vel_factor * noise.vel_weight * b.h
    std = np.array([
        pw, pw, _ASPECT_STD, pw,
        vw, vw, noise.init_vel_factor * _ASPECT_VEL_STD, vw,
    ])
    return KalmanState(mean=mean, cov=np.diag(std ** 2))


def _process_noise(h: float, noise: MotionNoiseConfig) -> np.ndarray:
    std = np.array([
        noise.pos_weight * h, noise.pos_weight * h, _ASPECT_STD, noise.pos_weight * h,
        noise.vel_weight * h, noise.vel_weight * h, _ASPECT_VEL_STD, noise.vel_weight * h,
    ])
    return np.diag(std ** 2)


def kf_predict(
    s: KalmanState, noise: MotionNoiseConfig = DEFAULT_NOISE
) -> tuple[KalmanState, BBox]:
    """One constant-velocity step; returns the new state and the predicted box."""
    h = max(float(s.mean[3]), 1e-6)
    mean = _F @ s.mean
    cov = _F @ s.cov @ _F.T + _process_noise(h, noise)
    # long unobserved coasting can drive size negative; freeze it instead
    if mean[3] <= 0:
        mean[3] = 1e-6
        mean[7] = 0.0
    if mean[2] <= 0:
        mean[2] = 1e-6
        mean[6] = 0.0
    state = KalmanState(mean=mean, cov=0.5 * (cov + cov.T))
    return state, state_to_bbox(mean)


def kf_update(
    s: KalmanState, observed: BBox, noise: MotionNoiseConfig = DEFAULT_NOISE
) -> KalmanState:
    """Standard Kalman correction toward an observed box."""
    z = bbox_to_state(observed)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"non-finite observation {z}")
    if not np.all(np.isfinite(s.mean)):
        raise ValueError("non-finite filter state")
    h = max(float(s.mean[3]), 1e-6)
    mw = noise.meas_weight * h
    measurement_cov = np.diag(np.array([mw, mw, _ASPECT_MEAS_STD, mw]) ** 2)
    innovation_cov = _H @ s.cov @ _H.T + measurement_cov
    gain = s.cov @ _H.T @ np.linalg.inv(innovation_cov)
    mean = s.mean + gain @ (z - _H @ s.mean)
    cov = (np.eye(_DIM) - gain @ _H) @ s.cov
    return KalmanState(mean=mean, cov=0.5 * (cov + cov.T))
