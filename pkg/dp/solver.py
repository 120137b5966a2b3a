"""Finite-horizon dynamic programming on (carrier position x quantized target).

A state at time t is a pair (l, i): l is a reachable carrier position, stored
as an integer lattice offset from s0, and i indexes the target grid at t.  The
target part moves by the quantized transition matrix regardless of the action,
so the backward step is

    J_t(l, i) = opt_a  sum_j P^t_ij [ c(l + a, j) + J_{t+1}(l + a, j) ]

with the stage cost read at the destination.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from config.settings import settings
from dynamics.carrier import ActionSpace, CarrierState, Offset, reachable_offsets
from dynamics.target import ChainSampler
from quantize.chain import QuantizedChain
from quantize.clvq import nearest_indices
from utils.archive import save_arrays
from utils.errors import ConfigurationError, ContractViolation

from .costs import CostModel, StageCost, get_cost_function, grid_targets, target_depths

logger = logging.getLogger(__name__)

DIRECTIONS = ("min", "max")


@dataclass
class CarrierGrid:
    """Reachable carrier offsets X_t^S for t = 0..N, with fast row lookup."""

    space: ActionSpace
    s0: CarrierState
    offsets: List[np.ndarray]  # (K_t, 3) int, lexicographically sorted
    _bound: int
    _keys: List[np.ndarray]

    @classmethod
    def build(cls, space: ActionSpace, s0: CarrierState, horizon: int) -> "CarrierGrid":
        layers = reachable_offsets(space, s0, horizon)
        offsets = [np.array(layer, dtype=np.int64).reshape(-1, 3) for layer in layers]
        bound = horizon * max(max(space.ranges), 1) + 1
        grid = cls(space=space, s0=s0, offsets=offsets, _bound=bound, _keys=[])
        grid._keys = [grid._encode(o) for o in offsets]
        return grid

    def _encode(self, offsets: np.ndarray) -> np.ndarray:
        width = 2 * self._bound + 1
        shifted = np.asarray(offsets, dtype=np.int64) + self._bound
        return (shifted[..., 0] * width + shifted[..., 1]) * width + shifted[..., 2]

    @property
    def horizon(self) -> int:
        return len(self.offsets) - 1

    def positions(self, t: int) -> np.ndarray:
        return self.s0.vector + self.offsets[t] * np.asarray(self.space.deltas)

    def rows(self, t: int, offsets: np.ndarray) -> np.ndarray:
        """Row of each offset in layer t, -1 where the offset is not reachable."""
        offsets = np.asarray(offsets, dtype=np.int64)
        inside = np.all(np.abs(offsets) < self._bound, axis=-1)
        keys = self._encode(np.where(inside[..., np.newaxis], offsets, 0))
        layer = self._keys[t]
        pos = np.clip(np.searchsorted(layer, keys), 0, len(layer) - 1)
        return np.where(inside & (layer[pos] == keys), pos, -1)

    def row(self, t: int, offset: Sequence[int]) -> int:
        r = int(self.rows(t, np.asarray([offset]))[0])
        if r < 0:
            raise ContractViolation(f"carrier offset {tuple(offset)} is not reachable at t={t}")
        return r


@dataclass
class ValueTable:
    grid: CarrierGrid
    values: List[np.ndarray]  # J*_t, (K_t, M_t)
    stage: List[Optional[np.ndarray]]  # c(l, j) at layer t, None for t = 0

    def value_at(self, t: int, offset: Sequence[int], i: int) -> float:
        return float(self.values[t][self.grid.row(t, offset), i])


@dataclass
class PolicyTable:
    grid: CarrierGrid
    lattice: List[Offset]
    choices: List[np.ndarray]  # (K_t, M_t) index into `lattice`
    direction: str = "min"

    @property
    def horizon(self) -> int:
        return len(self.choices)

    def action_index(self, t: int, offset: Sequence[int], i: int) -> Offset:
        return self.lattice[int(self.choices[t][self.grid.row(t, offset), i])]

    def action_at(self, t: int, offset: Sequence[int], i: int) -> Tuple[float, float, float]:
        return self.grid.space.displacement(self.action_index(t, offset, i))


@dataclass(frozen=True)
class PolicyEvaluation:
    mean: float
    std_error: float
    runs: int


def _resolve_cost(cost: Union[CostModel, StageCost], depths, terminal_mode):
    if isinstance(cost, CostModel):
        return (
            get_cost_function(cost),
            tuple(depths) if depths is not None else target_depths(cost),
            terminal_mode or cost.terminal_mode,
        )
    if depths is None:
        raise ConfigurationError("a custom stage cost needs explicit target depths")
    return cost, tuple(depths), terminal_mode or "same_as_stage"


def _destinations(grid: CarrierGrid, lattice: np.ndarray, t: int) -> np.ndarray:
    """(K_t, A) row in layer t+1 reached by each action, -1 if infeasible."""
    space = grid.space
    dest_offsets = grid.offsets[t][:, np.newaxis, :] + lattice[np.newaxis, :, :]
    dest_xyz = grid.s0.vector + dest_offsets * np.asarray(space.deltas)
    lo, hi = space.depth_bounds
    feasible = (dest_xyz[..., 2] >= lo) & (dest_xyz[..., 2] <= hi)
    if space.horizontal_bounds is not None:
        (x_lo, x_hi), (y_lo, y_hi) = space.horizontal_bounds
        feasible &= (dest_xyz[..., 0] >= x_lo) & (dest_xyz[..., 0] <= x_hi)
        feasible &= (dest_xyz[..., 1] >= y_lo) & (dest_xyz[..., 1] <= y_hi)
    rows = grid.rows(t + 1, dest_offsets)
    return np.where(feasible, rows, -1)


def solve(
    chain: QuantizedChain,
    space: ActionSpace,
    s0: CarrierState,
    cost: Union[CostModel, StageCost],
    N: Optional[int] = None,
    direction: str = "min",
    depths: Optional[Sequence[float]] = None,
    terminal_mode: Optional[str] = None,
) -> Tuple[ValueTable, PolicyTable]:
    """Backward induction over the product state space."""
    N = chain.horizon if N is None else N
    if N != chain.horizon:
        raise ConfigurationError(f"horizon {N} does not match the chain's {chain.horizon} transition matrices")
    if direction not in DIRECTIONS:
        raise ConfigurationError(f"direction must be one of {DIRECTIONS}, got {direction}")
    cost_fn, depths, terminal_mode = _resolve_cost(cost, depths, terminal_mode)

    grid = CarrierGrid.build(space, s0, N)
    lattice_list = space.lattice()
    lattice = np.array(lattice_list, dtype=np.int64).reshape(-1, 3)
    logger.info(
        f"Solving DP: N={N}, M={chain.M}, {len(lattice_list)} lattice actions, "
        f"{sum(len(o) for o in grid.offsets)} carrier states, direction={direction}"
    )

    stage: List[Optional[np.ndarray]] = [None]
    for t in range(1, N + 1):
        stage.append(cost_fn.matrix(grid.positions(t), grid_targets(chain.grids[t].points), depths))

    values: List[Optional[np.ndarray]] = [None] * (N + 1)
    if terminal_mode == "same_as_stage" and N > 0:
        values[N] = stage[N].copy()
    elif terminal_mode == "same_as_stage":
        values[N] = cost_fn.matrix(grid.positions(0), grid_targets(chain.grids[0].points), depths)
    else:
        values[N] = np.zeros((len(grid.offsets[N]), chain.grids[N].size))

    choices: List[Optional[np.ndarray]] = [None] * N
    bad = np.inf if direction == "min" else -np.inf
    for t in range(N - 1, -1, -1):
        continuation = stage[t + 1] + values[t + 1]
        # expected[k, i] = sum_j P_ij continuation[k, j]
        expected = continuation @ chain.transitions[t].T
        dest = _destinations(grid, lattice, t)
        q = expected[np.where(dest >= 0, dest, 0)]  # (K_t, A, M_t)
        q[dest < 0] = bad
        best = np.argmin(q, axis=1) if direction == "min" else np.argmax(q, axis=1)
        choices[t] = best
        values[t] = np.take_along_axis(q, best[:, np.newaxis, :], axis=1)[:, 0, :]

    return (
        ValueTable(grid=grid, values=values, stage=stage),
        PolicyTable(grid=grid, lattice=lattice_list, choices=choices, direction=direction),
    )


def bellman_residual(values: ValueTable, policy: PolicyTable, chain: QuantizedChain) -> float:
    """Largest gap between stored J*_t and the recursion recomputed from the tables."""
    grid = values.grid
    lattice = np.array(policy.lattice, dtype=np.int64).reshape(-1, 3)
    worst = 0.0
    for t in range(policy.horizon):
        dest = _destinations(grid, lattice, t)
        P = chain.transitions[t]
        nxt = values.stage[t + 1] + values.values[t + 1]
        for k in range(dest.shape[0]):
            for i in range(P.shape[0]):
                candidates = [float(np.dot(P[i], nxt[d])) for d in dest[k] if d >= 0]
                best = min(candidates) if policy.direction == "min" else max(candidates)
                worst = max(worst, abs(best - values.values[t][k, i]))
    return worst


def _sample_rows(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum((u[:, np.newaxis] >= cdf).sum(axis=1), cdf.shape[1] - 1)


def evaluate_policy(
    policy: PolicyTable,
    chain: QuantizedChain,
    cost: Union[CostModel, StageCost],
    runs: int,
    seed: int,
    sampler: Optional[ChainSampler] = None,
    initial_index: Optional[int] = None,
    depths: Optional[Sequence[float]] = None,
    terminal_mode: Optional[str] = None,
) -> PolicyEvaluation:
    """Monte Carlo estimate of the expected total cost of following `policy` from s0.

    Without `sampler` the target follows the quantized chain itself (initial cell
    drawn from weights_0 unless `initial_index` is given).  With a sampler the
    target follows continuous trajectories, the policy sees their nearest cells
    and the cost is charged at the true positions.
    """
    cost_fn, depths, terminal_mode = _resolve_cost(cost, depths, terminal_mode)
    grid = policy.grid
    lattice = np.array(policy.lattice, dtype=np.int64).reshape(-1, 3)
    deltas = np.asarray(grid.space.deltas)
    rng = np.random.default_rng(seed)
    N = policy.horizon

    offsets = np.zeros((runs, 3), dtype=np.int64)
    paths = None
    if sampler is None:
        if initial_index is None:
            cells = _sample_rows(np.cumsum(chain.weights[0])[np.newaxis, :], rng.random(runs))
        else:
            cells = np.full(runs, int(initial_index))
    else:
        paths = sampler.sample(runs, N, rng)
        cells = nearest_indices(chain.grids[0].points, paths[:, 0], chain.metric_weights)

    totals = np.zeros(runs)
    for t in tqdm(range(N), desc="evaluate", disable=not settings.SHOW_PROGRESS):
        rows = grid.rows(t, offsets)
        if np.any(rows < 0):
            raise ContractViolation(f"policy queried at an unreachable carrier state at t={t}")
        offsets = offsets + lattice[policy.choices[t][rows, cells]]
        if sampler is None:
            cdf = np.cumsum(chain.transitions[t], axis=1)[cells]
            cells = _sample_rows(cdf, rng.random(runs))
            targets = grid_targets(chain.grids[t + 1].points[cells])
        else:
            cells = nearest_indices(chain.grids[t + 1].points, paths[:, t + 1], chain.metric_weights)
            targets = grid_targets(paths[:, t + 1])
        positions = grid.s0.vector + offsets * deltas
        totals += cost_fn.evaluate(positions, targets, depths)

    if np.any(grid.rows(N, offsets) < 0):
        raise ContractViolation(f"policy moved the carrier off the reachable grid at t={N}")

    if terminal_mode == "same_as_stage":
        positions = grid.s0.vector + offsets * deltas
        targets = grid_targets(chain.grids[N].points[cells] if sampler is None else paths[:, N])
        totals += cost_fn.evaluate(positions, targets, depths)

    std_error = float(totals.std(ddof=1) / np.sqrt(runs)) if runs > 1 else 0.0
    return PolicyEvaluation(mean=float(totals.mean()), std_error=std_error, runs=runs)


def save_tables(values: ValueTable, policy: PolicyTable, path: str) -> None:
    """Archive keyed by time: offsets (K_t, 3), J values (K_t, M), action triples (K_t, M, 3)."""
    deltas = np.asarray(values.grid.space.deltas)
    lattice = np.array(policy.lattice, dtype=np.int64).reshape(-1, 3)
    arrays: Dict[str, np.ndarray] = {"deltas": deltas, "s0": values.grid.s0.vector}
    for t, offsets in enumerate(values.grid.offsets):
        arrays[f"offsets_{t:04d}"] = offsets
        arrays[f"values_{t:04d}"] = values.values[t]
        if t < policy.horizon:
            arrays[f"actions_{t:04d}"] = lattice[policy.choices[t]] * deltas
    save_arrays(path, arrays)
    logger.info(f"Saved value and policy tables (N={policy.horizon}) to {path}")
