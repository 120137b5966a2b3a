"""Synthetic signal-loss field.

The loss perceived at a receiver from an emitter is a closed-form function of
the horizontal range, the receiver depth and the emitter (source) depth:

    L = base_offset + spreading_coeff * log10(max(r, 1))
        + absorption * r / 1000
        + modulation_amp * cos(2 pi r / cz_period)
          * sin(pi z_r / D) * sin(pi z_s / D)

clamped to [loss_floor, loss_ceiling].  The cosine term produces range-periodic
detection lobes, the two sine terms make them strongest at mid-depth.
"""
import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from utils.errors import ConfigurationError, DomainError, OutputError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PropagationField:
    """Parameters of one emitter's loss field (meters, dB)."""

    source_depth: float = 500.0
    water_depth: float = 1000.0
    base_offset: float = 40.0
    spreading_coeff: float = 20.0
    absorption: float = 0.3  # dB per km
    modulation_amp: float = 25.0
    cz_period: float = 35000.0
    loss_floor: float = 80.0
    loss_ceiling: float = 200.0

    def __post_init__(self):
        if not self.loss_floor < self.loss_ceiling:
            raise ConfigurationError(
                f"loss_floor must be below loss_ceiling, got {self.loss_floor} >= {self.loss_ceiling}"
            )
        if self.water_depth <= 0:
            raise ConfigurationError(f"water_depth must be positive, got {self.water_depth}")
        if not 0 <= self.source_depth <= self.water_depth:
            raise ConfigurationError(
                f"source_depth {self.source_depth} outside [0, {self.water_depth}]"
            )
        if self.cz_period <= 0:
            raise ConfigurationError(f"cz_period must be positive, got {self.cz_period}")


@dataclass(frozen=True)
class LossDiagram:
    range_axis: np.ndarray
    depth_axis: np.ndarray
    values: np.ndarray  # shape (n_z, n_r)

    def to_csv(self, path: str) -> None:
        """First row is the range axis, first column the depth axis, cells in dB."""
        try:
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["depth_m\\range_m"] + [f"{r:.2f}" for r in self.range_axis])
                for depth, row in zip(self.depth_axis, self.values):
                    writer.writerow([f"{depth:.2f}"] + [f"{v:.2f}" for v in row])
        except OSError as e:
            raise OutputError(f"Cannot write loss diagram {path}: {e}") from e
        logger.debug(f"Wrote loss diagram {os.path.basename(path)} ({self.values.shape[0]}x{self.values.shape[1]})")


def _check_depths(field: PropagationField, depth: ArrayLike, what: str) -> None:
    depth = np.asarray(depth, dtype=float)
    if np.any(depth < 0) or np.any(depth > field.water_depth) or np.any(np.isnan(depth)):
        raise DomainError(f"{what} outside [0, {field.water_depth}]: {depth}")


def loss_between(
    field: PropagationField,
    horizontal_range: ArrayLike,
    receiver_depth: ArrayLike,
    source_depth: ArrayLike,
) -> ArrayLike:
    """Loss for an emitter at an arbitrary (possibly varying) source depth.

    All arguments broadcast together; scalars in give a float out.
    """
    r = np.asarray(horizontal_range, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError(f"range must be non-negative, got {horizontal_range}")
    _check_depths(field, receiver_depth, "receiver_depth")
    _check_depths(field, source_depth, "source_depth")

    z_r = np.asarray(receiver_depth, dtype=float)
    z_s = np.asarray(source_depth, dtype=float)
    loss = (
        field.base_offset
        + field.spreading_coeff * np.log10(np.maximum(r, 1.0))
        + field.absorption * r / 1000.0
        + field.modulation_amp
        * np.cos(2.0 * math.pi * r / field.cz_period)
        * np.sin(math.pi * z_r / field.water_depth)
        * np.sin(math.pi * z_s / field.water_depth)
    )
    loss = np.clip(loss, field.loss_floor, field.loss_ceiling)
    if loss.ndim == 0:
        return float(loss)
    return loss


def loss_at(field: PropagationField, horizontal_range: ArrayLike, receiver_depth: ArrayLike) -> ArrayLike:
    """Loss in dB at (range, receiver depth) for the field's own source depth."""
    return loss_between(field, horizontal_range, receiver_depth, field.source_depth)


def render_diagram(
    field: PropagationField,
    range_max: float,
    n_r: int,
    n_z: int,
    saturation: float = math.inf,
) -> LossDiagram:
    """Loss on a uniform (depth, range) grid, optionally saturated from above."""
    if n_r < 2 or n_z < 2:
        raise DomainError(f"diagram needs at least 2x2 cells, got n_r={n_r}, n_z={n_z}")
    if range_max <= 0:
        raise DomainError(f"range_max must be positive, got {range_max}")

    range_axis = np.linspace(0.0, range_max, n_r)
    depth_axis = np.linspace(0.0, field.water_depth, n_z)
    ranges, depths = np.meshgrid(range_axis, depth_axis)
    values = loss_at(field, ranges, depths)
    if math.isfinite(saturation):
        values = np.minimum(values, saturation)
    return LossDiagram(range_axis=range_axis, depth_axis=depth_axis, values=values)
