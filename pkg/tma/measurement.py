"""Bearing and Doppler-shifted frequency seen by the carrier's passive sonar.

Bearing is measured clockwise from north (+y), so a target due east has
bearing pi/2.  The received frequency follows f0 * (1 - rdot / c) where rdot
is the horizontal range rate.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dynamics.carrier import CarrierState
from dynamics.target import TargetState
from utils.errors import ConfigurationError, DegenerateGeometryError


def wrap_angle(angle):
    """Map to (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Measurement:
    bearing: float
    frequency: float
    t: int

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.bearing, self.frequency])


@dataclass(frozen=True)
class MeasurementModel:
    f0: float = 300.0
    c_sound: float = 1500.0
    sigma_bearing: float = math.radians(1.0)
    sigma_freq: float = 0.05

    def __post_init__(self):
        if self.sigma_bearing <= 0 or self.sigma_freq <= 0:
            raise ConfigurationError(
                f"measurement stds must be positive, got {self.sigma_bearing}, {self.sigma_freq}"
            )
        if self.c_sound <= 0:
            raise ConfigurationError(f"c_sound must be positive, got {self.c_sound}")

    @property
    def noise_covariance(self) -> np.ndarray:
        return np.diag([self.sigma_bearing ** 2, self.sigma_freq ** 2])


def observe(
    w: np.ndarray,
    observer_xy: Sequence[float],
    observer_velocity: Sequence[float],
    model: MeasurementModel,
) -> np.ndarray:
    """Noise-free (bearing, frequency) for target states w of shape (..., 4)."""
    w = np.asarray(w, dtype=float)
    dx = w[..., 0] - observer_xy[0]
    dy = w[..., 2] - observer_xy[1]
    dvx = w[..., 1] - observer_velocity[0]
    dvy = w[..., 3] - observer_velocity[1]
    r = np.hypot(dx, dy)
    if np.any(r == 0):
        raise DegenerateGeometryError("target and observer coincide horizontally")
    bearing = np.arctan2(dx, dy)
    range_rate = (dx * dvx + dy * dvy) / r
    frequency = model.f0 * (1.0 - range_rate / model.c_sound)
    return np.stack([bearing, frequency], axis=-1)


def measure(
    target: TargetState,
    observer: CarrierState,
    observer_velocity: Sequence[float],
    model: MeasurementModel,
    noise: Sequence[float],
    t: int = 0,
) -> Measurement:
    """One noisy measurement; `noise` holds two standard-normal draws."""
    clean = observe(target.w, (observer.x, observer.y), observer_velocity, model)
    bearing = wrap_angle(clean[0] + noise[0] * model.sigma_bearing)
    frequency = float(clean[1] + noise[1] * model.sigma_freq)
    return Measurement(bearing=bearing, frequency=frequency, t=t)
