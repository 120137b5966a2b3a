"""Carrier kinematics on the action lattice.

Positions are (x, y, depth) in meters, depth positive down with the surface at
0.  An action moves the carrier by (i1*d1, i2*d2, i3*d3) with |ij| <= Lj.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)

Offset = Tuple[int, int, int]
Action = Tuple[float, float, float]


@dataclass(frozen=True)
class CarrierState:
    x: float
    y: float
    depth: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.depth])

    @classmethod
    def from_vector(cls, s: Sequence[float]) -> "CarrierState":
        return cls(float(s[0]), float(s[1]), float(s[2]))


@dataclass(frozen=True)
class ActionSpace:
    deltas: Tuple[float, float, float]
    ranges: Tuple[int, int, int]
    depth_bounds: Tuple[float, float]
    # ((x_min, x_max), (y_min, y_max)); None means open ocean
    horizontal_bounds: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "ranges", tuple(int(n) for n in self.ranges))
        object.__setattr__(self, "depth_bounds", tuple(float(b) for b in self.depth_bounds))
        if len(self.deltas) != 3 or len(self.ranges) != 3:
            raise ConfigurationError("action space needs three deltas and three ranges")
        if any(d <= 0 for d in self.deltas):
            raise ConfigurationError(f"action deltas must be positive, got {self.deltas}")
        if any(n < 0 for n in self.ranges):
            raise ConfigurationError(f"action ranges must be non-negative, got {self.ranges}")
        lo, hi = self.depth_bounds
        if lo > hi:
            raise ConfigurationError(f"depth bounds reversed: {self.depth_bounds}")

    @property
    def cardinality(self) -> int:
        return int(np.prod([2 * n + 1 for n in self.ranges]))

    def lattice(self) -> List[Offset]:
        """Every index triple in lexicographic order; this order breaks DP ties."""
        axes = [range(-n, n + 1) for n in self.ranges]
        return [tuple(idx) for idx in itertools.product(*axes)]

    def displacement(self, idx: Offset) -> Action:
        return tuple(i * d for i, d in zip(idx, self.deltas))

    def contains(self, s: CarrierState) -> bool:
        lo, hi = self.depth_bounds
        if not lo <= s.depth <= hi:
            return False
        if self.horizontal_bounds is not None:
            (x_lo, x_hi), (y_lo, y_hi) = self.horizontal_bounds
            if not (x_lo <= s.x <= x_hi and y_lo <= s.y <= y_hi):
                return False
        return True

    def index_of(self, a: Sequence[float]) -> Optional[Offset]:
        """Lattice index of displacement `a`, or None if it is off-lattice."""
        idx = []
        for value, delta, n in zip(a, self.deltas, self.ranges):
            k = int(round(value / delta))
            if abs(k) > n or abs(k * delta - value) > 1e-6 * max(1.0, delta):
                return None
            idx.append(k)
        return tuple(idx)


def _shift(s: CarrierState, a: Sequence[float]) -> CarrierState:
    return CarrierState(s.x + a[0], s.y + a[1], s.depth + a[2])


def feasible_indices(space: ActionSpace, s: CarrierState) -> List[Offset]:
    return [idx for idx in space.lattice() if space.contains(_shift(s, space.displacement(idx)))]


def feasible_actions(space: ActionSpace, s: CarrierState) -> List[Action]:
    return [space.displacement(idx) for idx in feasible_indices(space, s)]


def apply_action(s: CarrierState, a: Sequence[float], space: Optional[ActionSpace] = None) -> CarrierState:
    """s + a; with `space` given the action must be feasible at s."""
    if space is not None:
        idx = space.index_of(a)
        if idx is None or not space.contains(_shift(s, a)):
            raise ContractViolation(f"action {tuple(a)} is not feasible at {s}")
    return _shift(s, a)


def position_of(space: ActionSpace, s0: CarrierState, offset: Offset) -> CarrierState:
    return _shift(s0, space.displacement(offset))


def reachable_offsets(space: ActionSpace, s0: CarrierState, horizon: int) -> List[List[Offset]]:
    """Reachable carrier grid X_t^S for t = 0..horizon as sorted lattice offsets."""
    if not space.contains(s0):
        raise ContractViolation(f"initial carrier state {s0} violates the action-space bounds")
    layers: List[List[Offset]] = [[(0, 0, 0)]]
    feasible_cache: Dict[Offset, List[Offset]] = {}
    for _ in range(horizon):
        nxt = set()
        for offset in layers[-1]:
            if offset not in feasible_cache:
                feasible_cache[offset] = feasible_indices(space, position_of(space, s0, offset))
            for idx in feasible_cache[offset]:
                nxt.add((offset[0] + idx[0], offset[1] + idx[1], offset[2] + idx[2]))
        layers.append(sorted(nxt))
    return layers
