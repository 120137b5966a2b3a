"""Stage costs built on the propagation field.

Every cost is a loss in dB (lower is better for detection), evaluated on the
horizontal range between carrier and target and on their two depths.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from acoustics.propagation import PropagationField, loss_between
from dynamics.carrier import CarrierState
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

MODES = ("single_target", "multi_target", "tradeoff")
TERMINAL_MODES = ("zero", "same_as_stage")

F_LOW = 80.0
F_HIGH = 200.0


@dataclass(frozen=True)
class CostModel:
    mode: str
    target_fields: Tuple[PropagationField, ...]
    carrier_field: Optional[PropagationField] = None
    alphas: Tuple[float, ...] = ()
    epsilon: float = 0.1
    terminal_mode: str = "same_as_stage"

    def __post_init__(self):
        object.__setattr__(self, "target_fields", tuple(self.target_fields))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.mode not in MODES:
            raise ConfigurationError(f"Unknown cost mode: {self.mode}")
        if self.terminal_mode not in TERMINAL_MODES:
            raise ConfigurationError(f"Unknown terminal mode: {self.terminal_mode}")
        if not self.target_fields:
            raise ConfigurationError("cost model needs at least one target emitter field")
        if self.mode == "multi_target":
            if len(self.alphas) != len(self.target_fields):
                raise ConfigurationError(
                    f"{len(self.target_fields)} targets but {len(self.alphas)} weights"
                )
            if any(a < 0 for a in self.alphas) or abs(sum(self.alphas) - 1.0) > 1e-9:
                raise ConfigurationError(f"weights must be non-negative and sum to 1, got {self.alphas}")
        if self.mode == "tradeoff":
            if not 0 < self.epsilon < 1:
                raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
            if self.carrier_field is None:
                raise ConfigurationError("tradeoff cost needs the carrier emitter field")

    @property
    def n_targets(self) -> int:
        return 1 if self.mode in ("single_target", "tradeoff") else len(self.target_fields)


def f_multiplier(x, epsilon: float):
    """1 below 80 dB, epsilon from 200 dB, linear and continuous in between."""
    if not 0 < epsilon < 1:
        raise ConfigurationError(f"epsilon must lie in (0, 1), got {epsilon}")
    a = (epsilon - 1.0) / (F_HIGH - F_LOW)
    b = (F_HIGH - F_LOW * epsilon) / (F_HIGH - F_LOW)
    x_arr = np.asarray(x, dtype=float)
    out = np.where(x_arr < F_LOW, 1.0, np.where(x_arr >= F_HIGH, epsilon, a * x_arr + b))
    if out.ndim == 0:
        return float(out)
    return out


def horizontal_range(carrier_xyz: np.ndarray, target_xy: np.ndarray) -> np.ndarray:
    """Broadcast (..., 3) carrier positions against (..., 2) target positions."""
    return np.hypot(carrier_xyz[..., 0] - target_xy[..., 0], carrier_xyz[..., 1] - target_xy[..., 1])


def detection_loss(field: PropagationField, carrier_xyz: np.ndarray, target_xy: np.ndarray, target_depth: float) -> np.ndarray:
    """C^W: loss at the carrier from the target's emission."""
    r = horizontal_range(carrier_xyz, target_xy)
    return loss_between(field, r, carrier_xyz[..., 2], target_depth)


def counter_detection_loss(field: PropagationField, carrier_xyz: np.ndarray, target_xy: np.ndarray, target_depth: float) -> np.ndarray:
    """C^S: loss at the target from the carrier's emission (source at carrier depth)."""
    r = horizontal_range(carrier_xyz, target_xy)
    return loss_between(field, r, target_depth, carrier_xyz[..., 2])


class StageCost(ABC):
    """Cost of having the carrier at l while the target(s) sit at given positions."""

    @abstractmethod
    def evaluate(self, carrier_xyz: np.ndarray, targets_xy: np.ndarray, depths: Sequence[float]) -> np.ndarray:
        """carrier_xyz (..., 3) broadcast against targets_xy (..., k, 2); depths (k,)."""
        pass

    def matrix(self, carrier_xyz: np.ndarray, targets_xy: np.ndarray, depths: Sequence[float]) -> np.ndarray:
        """(K, 3) carrier positions against (M, k, 2) target sets -> (K, M)."""
        return self.evaluate(carrier_xyz[:, np.newaxis, :], targets_xy[np.newaxis, :, :, :], depths)


class SingleTargetCost(StageCost):
    def __init__(self, field: PropagationField):
        self.field = field

    def evaluate(self, carrier_xyz, targets_xy, depths):
        return detection_loss(self.field, carrier_xyz, targets_xy[..., 0, :], depths[0])


class MultiTargetCost(StageCost):
    def __init__(self, fields: Sequence[PropagationField], alphas: Sequence[float]):
        self.fields = tuple(fields)
        self.alphas = tuple(alphas)

    def evaluate(self, carrier_xyz, targets_xy, depths):
        if targets_xy.shape[-2] != len(self.fields):
            raise ConfigurationError(
                f"multi-target cost built for {len(self.fields)} targets, got {targets_xy.shape[-2]}"
            )
        total = 0.0
        for k, (field, alpha) in enumerate(zip(self.fields, self.alphas)):
            total = total + alpha * detection_loss(field, carrier_xyz, targets_xy[..., k, :], depths[k])
        return total


class TradeoffCost(StageCost):
    def __init__(self, target_field: PropagationField, carrier_field: PropagationField, epsilon: float):
        self.target_field = target_field
        self.carrier_field = carrier_field
        self.epsilon = epsilon

    def evaluate(self, carrier_xyz, targets_xy, depths):
        target = targets_xy[..., 0, :]
        c_w = detection_loss(self.target_field, carrier_xyz, target, depths[0])
        c_s = counter_detection_loss(self.carrier_field, carrier_xyz, target, depths[0])
        return c_w * f_multiplier(c_s, self.epsilon)


def get_cost_function(cost: CostModel) -> StageCost:
    """Factory function to get the stage cost for the configured mode."""
    if cost.mode == "single_target":
        return SingleTargetCost(cost.target_fields[0])
    if cost.mode == "multi_target":
        return MultiTargetCost(cost.target_fields, cost.alphas)
    if cost.mode == "tradeoff":
        return TradeoffCost(cost.target_fields[0], cost.carrier_field, cost.epsilon)
    raise ConfigurationError(f"Unknown cost mode: {cost.mode}")


def target_depths(cost: CostModel) -> Tuple[float, ...]:
    """Each target emitter sits at its field's source depth."""
    return tuple(f.source_depth for f in cost.target_fields[:cost.n_targets])


def grid_targets(points: np.ndarray) -> np.ndarray:
    """(..., 4k) stacked target states -> (..., k, 2) horizontal positions."""
    points = np.asarray(points, dtype=float)
    k = points.shape[-1] // 4
    return np.stack([points[..., [4 * j, 4 * j + 2]] for j in range(k)], axis=-2)


def stage_cost(
    cost: CostModel,
    l: CarrierState,
    targets: Sequence[Tuple[Tuple[float, float], float]],
) -> float:
    """Cost at one geometry; `targets` is a list of ((x, y), depth)."""
    if len(targets) != cost.n_targets:
        raise ConfigurationError(f"{cost.mode} cost expects {cost.n_targets} target(s), got {len(targets)}")
    targets_xy = np.array([pos for pos, _ in targets], dtype=float)
    depths = [depth for _, depth in targets]
    return float(get_cost_function(cost).evaluate(l.vector, targets_xy, depths))


def signal_levels(cost: CostModel, l: CarrierState, target_xy: Tuple[float, float], target_depth: float) -> Tuple[float, float]:
    """(C^W, C^S) for the first target, used in the scenario log."""
    target = np.asarray(target_xy, dtype=float)
    c_w = float(detection_loss(cost.target_fields[0], l.vector, target, target_depth))
    carrier_field = cost.carrier_field or cost.target_fields[0]
    c_s = float(counter_detection_loss(carrier_field, l.vector, target, target_depth))
    return c_w, c_s
