"""Competitive learning vector quantization of a Markov chain.

One grid per time index.  Each training trajectory visits the grids in time
order: the competitive phase picks the grid point closest to w_t, the learning
phase moves that point toward w_t by the current step gamma_m.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config.settings import settings
from dynamics.target import ChainSampler
from utils.errors import ConfigurationError, QuantizationError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

_CHUNK = 4096


@dataclass(frozen=True)
class QuantizationGrid:
    t: int
    points: np.ndarray  # (M, d)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class ClvqParams:
    M: int
    NR: int
    N: int
    gamma0: float = 0.1
    gamma_decay: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.NR < 0 or self.N < 0:
            raise ConfigurationError(f"invalid CLVQ sizes M={self.M}, NR={self.NR}, N={self.N}")
        if not 0 <= self.gamma0 <= 1:
            raise ConfigurationError(f"gamma0 must lie in [0, 1], got {self.gamma0}")
        if self.gamma_decay is not None and self.gamma_decay < 0:
            raise ConfigurationError(f"gamma_decay must be non-negative, got {self.gamma_decay}")

    @property
    def decay(self) -> float:
        # default: the step has shrunk by a factor of about (1 + gamma0*M) after NR runs
        if self.gamma_decay is not None:
            return self.gamma_decay
        return self.gamma0 * self.M / max(self.NR, 1)

    def step(self, m: int) -> float:
        return self.gamma0 / (1.0 + self.decay * m)


def default_metric_weights(dim: int, velocity_scale: float = 60.0) -> np.ndarray:
    """(1, lambda^2, 1, lambda^2, ...) for stacked (x, vx, y, vy) targets; ones otherwise."""
    if dim % 4 != 0:
        return np.ones(dim)
    return np.tile([1.0, velocity_scale ** 2, 1.0, velocity_scale ** 2], dim // 4)


def resolve_metric_weights(metric_weights: Optional[Sequence[float]], dim: int) -> np.ndarray:
    """Explicit weights, or the target-state default for the dimension."""
    if metric_weights is None:
        return default_metric_weights(dim)
    w = np.asarray(metric_weights, dtype=float)
    if w.shape != (dim,):
        raise ConfigurationError(f"metric weights need {dim} entries, got {w.shape}")
    return w


def nearest(grid: QuantizationGrid, p: Sequence[float], metric_weights: Optional[Sequence[float]] = None) -> int:
    """Index of the grid point closest to p; lowest index wins ties."""
    points = grid.points
    w = resolve_metric_weights(metric_weights, points.shape[1])
    dist = ((points - np.asarray(p, dtype=float)) ** 2 * w).sum(axis=1)
    return int(np.argmin(dist))


def nearest_indices(points: np.ndarray, samples: np.ndarray, metric_weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Vectorized `nearest` over the rows of `samples` (same arithmetic, same ties)."""
    w = resolve_metric_weights(metric_weights, points.shape[1])
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    out = np.empty(samples.shape[0], dtype=np.int64)
    for start in range(0, samples.shape[0], _CHUNK):
        block = samples[start:start + _CHUNK]
        dist = ((points[np.newaxis, :, :] - block[:, np.newaxis, :]) ** 2 * w).sum(axis=2)
        out[start:start + _CHUNK] = np.argmin(dist, axis=1)
    return out


def distortion(grid: QuantizationGrid, samples: np.ndarray, metric_weights: Optional[Sequence[float]] = None) -> float:
    """Mean squared distance from each sample to its nearest grid point."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise QuantizationError("distortion needs at least one sample")
    w = resolve_metric_weights(metric_weights, grid.points.shape[1])
    idx = nearest_indices(grid.points, samples, w)
    diff = samples - grid.points[idx]
    return float(((diff ** 2) * w).sum(axis=1).mean())


def _initial_grids(sampler: ChainSampler, params: ClvqParams, rng: np.random.Generator) -> List[np.ndarray]:
    """First M distinct simulated values at every time index."""
    grids: List[Optional[np.ndarray]] = [None] * (params.N + 1)
    collected = [np.empty((0, sampler.dim)) for _ in range(params.N + 1)]
    batch = params.M
    for attempt in range(8):
        paths = sampler.sample(batch, params.N, rng)
        for t in range(params.N + 1):
            if grids[t] is not None:
                continue
            stacked = np.vstack([collected[t], paths[:, t]])
            _, first = np.unique(stacked, axis=0, return_index=True)
            distinct = stacked[np.sort(first)]
            collected[t] = distinct
            if distinct.shape[0] >= params.M:
                grids[t] = distinct[:params.M].copy()
        if all(g is not None for g in grids):
            return grids
        batch *= 2
    missing = [t for t, g in enumerate(grids) if g is None]
    raise QuantizationError(
        f"could not find {params.M} distinct initial samples at time indices {missing}"
    )


def clvq_train(
    sampler: ChainSampler,
    params: ClvqParams,
    init_grids: Optional[Sequence[QuantizationGrid]] = None,
    metric_weights: Optional[Sequence[float]] = None,
) -> List[QuantizationGrid]:
    """Train N+1 grids of M points on NR simulated trajectories."""
    rng_init = np.random.default_rng(derive_seed(params.seed, 0))
    rng_train = np.random.default_rng(derive_seed(params.seed, 1))

    if init_grids is None:
        grids = _initial_grids(sampler, params, rng_init)
    else:
        if len(init_grids) != params.N + 1:
            raise ConfigurationError(f"expected {params.N + 1} initial grids, got {len(init_grids)}")
        grids = [np.array(g.points, dtype=float) for g in init_grids]
    w = resolve_metric_weights(metric_weights, sampler.dim)

    logger.info(f"Training CLVQ grids: M={params.M}, NR={params.NR}, N={params.N}, dim={sampler.dim}")
    m = 0
    with tqdm(total=params.NR, desc="clvq", disable=not settings.SHOW_PROGRESS) as progress:
        while m < params.NR:
            n_paths = min(_CHUNK, params.NR - m)
            paths = sampler.sample(n_paths, params.N, rng_train)
            for path in paths:
                gamma = params.step(m)
                for t in range(params.N + 1):
                    grid = grids[t]
                    # competitive phase
                    y = int(np.argmin(((grid - path[t]) ** 2 * w).sum(axis=1)))
                    # learning phase
                    grid[y] -= gamma * (grid[y] - path[t])
                m += 1
            progress.update(n_paths)

    return [QuantizationGrid(t=t, points=g) for t, g in enumerate(grids)]
