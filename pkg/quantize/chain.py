import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config.settings import settings
from dynamics.target import ChainSampler
from utils.archive import load_arrays, save_arrays
from utils.errors import ConfigurationError, OutputError
from utils.seeding import derive_seed

from .clvq import ClvqParams, QuantizationGrid, clvq_train, nearest, nearest_indices, resolve_metric_weights

logger = logging.getLogger(__name__)


@dataclass
class QuantizedChain:
    """Finite approximation of the target chain on grids t = 0..N."""

    grids: List[QuantizationGrid]
    weights: List[np.ndarray]
    transitions: List[np.ndarray]  # P^t, t = 0..N-1, each (M_t, M_{t+1})
    metric_weights: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.grids) or len(self.transitions) != len(self.grids) - 1:
            raise ConfigurationError(
                f"inconsistent chain: {len(self.grids)} grids, {len(self.weights)} weight vectors, "
                f"{len(self.transitions)} transition matrices"
            )

    @property
    def horizon(self) -> int:
        return len(self.transitions)

    @property
    def M(self) -> int:
        return self.grids[0].size

    @property
    def dim(self) -> int:
        return int(self.grids[0].points.shape[1])

    def nearest(self, t: int, p: Sequence[float]) -> int:
        return nearest(self.grids[t], p, self.metric_weights)

    def save(self, path: str) -> None:
        arrays = {"metric_weights": np.asarray(self.metric_weights, dtype=float)}
        for t, grid in enumerate(self.grids):
            arrays[f"points_{t:04d}"] = grid.points
            arrays[f"weights_{t:04d}"] = self.weights[t]
        for t, matrix in enumerate(self.transitions):
            arrays[f"transition_{t:04d}"] = matrix
        save_arrays(path, arrays)
        logger.info(f"Saved quantized chain (N={self.horizon}, M={self.M}) to {path}")

    @classmethod
    def load(cls, path: str) -> "QuantizedChain":
        arrays = load_arrays(path)
        try:
            n_grids = sum(1 for name in arrays if name.startswith("points_"))
            grids = [QuantizationGrid(t=t, points=arrays[f"points_{t:04d}"]) for t in range(n_grids)]
            weights = [arrays[f"weights_{t:04d}"] for t in range(n_grids)]
            transitions = [arrays[f"transition_{t:04d}"] for t in range(n_grids - 1)]
            return cls(grids=grids, weights=weights, transitions=transitions,
                       metric_weights=arrays["metric_weights"])
        except KeyError as e:
            raise OutputError(f"Archive {path} is not a quantized chain: missing {e}") from e


def _count_shard(
    sampler: ChainSampler,
    grids: Sequence[QuantizationGrid],
    n_paths: int,
    seed: int,
    metric_weights: np.ndarray,
):
    rng = np.random.default_rng(seed)
    horizon = len(grids) - 1
    paths = sampler.sample(n_paths, horizon, rng)
    cells = [nearest_indices(g.points, paths[:, t], metric_weights) for t, g in enumerate(grids)]
    visits = [np.bincount(c, minlength=grids[t].size) for t, c in enumerate(cells)]
    joints = []
    for t in range(horizon):
        m_next = grids[t + 1].size
        flat = cells[t] * m_next + cells[t + 1]
        joints.append(np.bincount(flat, minlength=grids[t].size * m_next).reshape(grids[t].size, m_next))
    return visits, joints


def estimate_transitions(
    sampler: ChainSampler,
    grids: Sequence[QuantizationGrid],
    NS: int,
    seed: int,
    metric_weights: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
) -> QuantizedChain:
    """Monte Carlo weights and transition matrices on fixed grids.

    Trajectories are drawn in shards of TRANSITION_SHARD_SIZE, each from its own
    derived seed, and the integer counts are merged in shard order, so the result
    does not depend on the number of workers.
    """
    if NS < 1:
        raise ConfigurationError(f"NS must be at least 1, got {NS}")
    w = resolve_metric_weights(metric_weights, sampler.dim)
    shard_size = max(1, settings.TRANSITION_SHARD_SIZE)
    sizes = [min(shard_size, NS - start) for start in range(0, NS, shard_size)]
    seeds = [derive_seed(seed, k) for k in range(len(sizes))]
    workers = workers or settings.WORKERS

    logger.info(f"Estimating transitions from {NS} trajectories in {len(sizes)} shards ({workers} workers)")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(_count_shard, sampler, grids, n, s, w) for n, s in zip(sizes, seeds)]
        results = [f.result() for f in tqdm(futures, desc="transitions", disable=not settings.SHOW_PROGRESS)]

    horizon = len(grids) - 1
    visits = [sum(r[0][t] for r in results) for t in range(horizon + 1)]
    joints = [sum(r[1][t] for r in results) for t in range(horizon)]

    weights = [v / float(NS) for v in visits]
    transitions = []
    for t in range(horizon):
        counts = joints[t].astype(float)
        row_totals = counts.sum(axis=1)
        matrix = np.zeros_like(counts)
        visited = row_totals > 0
        matrix[visited] = counts[visited] / row_totals[visited, np.newaxis]
        for i in np.flatnonzero(~visited):
            # unvisited cell: send it to the nearest point of the next grid
            matrix[i, nearest(grids[t + 1], grids[t].points[i], w)] = 1.0
        transitions.append(matrix)
        if (~visited).any():
            logger.debug(f"t={t}: {int((~visited).sum())} unvisited cells")

    return QuantizedChain(grids=list(grids), weights=weights, transitions=transitions, metric_weights=w)


def quantize_chain(
    sampler: ChainSampler,
    params: ClvqParams,
    NS: int,
    metric_weights: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
) -> QuantizedChain:
    """Train grids then estimate weights and transitions on fresh trajectories."""
    grids = clvq_train(sampler, params, metric_weights=metric_weights)
    return estimate_transitions(sampler, grids, NS, derive_seed(params.seed, 2), metric_weights, workers)
