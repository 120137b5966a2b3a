"""Nearly-constant-velocity target motion.

State layout per target: (x, vx, y, vy).  One step of length T applies

    w' = F w + K eps,   F = [[1, T], [0, 1]] (x) I2,   K = [T^2/2, T]' (x) I2

with eps ~ N(0, sigma_eps^2 I2).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

STATE_DIM = 4
NOISE_DIM = 2


def transition_matrix(T: float) -> np.ndarray:
    # (x) I2 with the interleaved (x, vx, y, vy) layout
    F = np.eye(STATE_DIM)
    F[0, 1] = T
    F[2, 3] = T
    return F


def noise_gain(T: float) -> np.ndarray:
    K = np.zeros((STATE_DIM, NOISE_DIM))
    K[0, 0] = K[2, 1] = T * T / 2.0
    K[1, 0] = K[3, 1] = T
    return K


def _check_covariance(cov: np.ndarray, name: str) -> None:
    if not np.allclose(cov, cov.T, atol=1e-9):
        raise ConfigurationError(f"{name} must be symmetric")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.linalg.eigvalsh(cov).min() < -1e-9 * scale:
        raise ConfigurationError(f"{name} must be positive semi-definite")


@dataclass(frozen=True)
class TargetState:
    w: np.ndarray  # (x, vx, y, vy)
    depth: float

    @property
    def position(self) -> Tuple[float, float]:
        return float(self.w[0]), float(self.w[2])

    @property
    def velocity(self) -> Tuple[float, float]:
        return float(self.w[1]), float(self.w[3])


@dataclass(frozen=True)
class TargetModel:
    T: float
    sigma_eps: float
    mu0: np.ndarray
    Sigma0: np.ndarray
    depth: float

    def __post_init__(self):
        object.__setattr__(self, "mu0", np.asarray(self.mu0, dtype=float).reshape(STATE_DIM))
        object.__setattr__(self, "Sigma0", np.asarray(self.Sigma0, dtype=float).reshape(STATE_DIM, STATE_DIM))
        if self.T <= 0:
            raise ConfigurationError(f"time step T must be positive, got {self.T}")
        if self.sigma_eps < 0:
            raise ConfigurationError(f"sigma_eps must be non-negative, got {self.sigma_eps}")
        _check_covariance(self.Sigma0, "Sigma0")

    @property
    def F(self) -> np.ndarray:
        return transition_matrix(self.T)

    @property
    def K(self) -> np.ndarray:
        return noise_gain(self.T)

    @property
    def noise_std(self) -> np.ndarray:
        return np.full(NOISE_DIM, self.sigma_eps)

    @property
    def process_covariance(self) -> np.ndarray:
        """K Sigma_eps K', the covariance added by one step."""
        K = self.K
        return (self.sigma_eps ** 2) * K @ K.T

    @property
    def depths(self) -> Tuple[float, ...]:
        return (self.depth,)


@dataclass(frozen=True)
class JointTargetModel:
    """Several independent targets stacked into one state vector."""

    models: Tuple[TargetModel, ...]

    @property
    def T(self) -> float:
        return self.models[0].T

    @property
    def F(self) -> np.ndarray:
        return block_diag(*(m.F for m in self.models))

    @property
    def K(self) -> np.ndarray:
        return block_diag(*(m.K for m in self.models))

    @property
    def noise_std(self) -> np.ndarray:
        return np.concatenate([m.noise_std for m in self.models])

    @property
    def mu0(self) -> np.ndarray:
        return np.concatenate([m.mu0 for m in self.models])

    @property
    def Sigma0(self) -> np.ndarray:
        return block_diag(*(m.Sigma0 for m in self.models))

    @property
    def depths(self) -> Tuple[float, ...]:
        return tuple(m.depth for m in self.models)


def propagate(F: np.ndarray, K: np.ndarray, w: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Batch step: rows of `w` and `noise` are independent states."""
    return w @ F.T + noise @ K.T


def step_target(model: TargetModel, state: TargetState, noise: Sequence[float]) -> TargetState:
    w_next = propagate(model.F, model.K, np.asarray(state.w, dtype=float), np.asarray(noise, dtype=float))
    return TargetState(w=w_next, depth=state.depth)


def join_models(*models: TargetModel) -> JointTargetModel:
    if len(models) < 2:
        raise ConfigurationError(f"joining needs at least two target models, got {len(models)}")
    steps = {m.T for m in models}
    if len(steps) != 1:
        raise ConfigurationError(f"target models disagree on the time step: {sorted(steps)}")
    return JointTargetModel(models=tuple(models))


class ChainSampler(ABC):
    """Source of i.i.d. trajectories (w_0, ..., w_N) of a target chain."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def sample(self, n_paths: int, horizon: int, rng: np.random.Generator) -> np.ndarray:
        """Return an array of shape (n_paths, horizon + 1, dim)."""
        pass


@dataclass(frozen=True)
class LinearGaussianChain(ChainSampler):
    F: np.ndarray
    K: np.ndarray
    noise_std: np.ndarray
    mean0: np.ndarray
    cov0: np.ndarray
    depths: Tuple[float, ...] = field(default=())

    @property
    def dim(self) -> int:
        return int(self.F.shape[0])

    def sample(self, n_paths: int, horizon: int, rng: np.random.Generator) -> np.ndarray:
        d = self.dim
        paths = np.empty((n_paths, horizon + 1, d))
        paths[:, 0] = rng.multivariate_normal(self.mean0, self.cov0, size=n_paths, method="eigh")
        noise_dim = self.K.shape[1]
        for t in range(horizon):
            noise = rng.standard_normal((n_paths, noise_dim)) * self.noise_std
            paths[:, t + 1] = propagate(self.F, self.K, paths[:, t], noise)
        return paths


def chain_sampler(
    model,
    mean0: Optional[np.ndarray] = None,
    cov0: Optional[np.ndarray] = None,
) -> LinearGaussianChain:
    """Sampler for a TargetModel or JointTargetModel.

    The initial law defaults to the model prior N(mu0, Sigma0); the control loop
    overrides it with a filter posterior or the known true state.
    """
    mean = model.mu0 if mean0 is None else np.asarray(mean0, dtype=float)
    cov = model.Sigma0 if cov0 is None else np.asarray(cov0, dtype=float)
    return LinearGaussianChain(
        F=model.F,
        K=model.K,
        noise_std=model.noise_std,
        mean0=mean,
        cov0=cov,
        depths=model.depths,
    )
