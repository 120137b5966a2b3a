"""Unscented Kalman filter for target motion analysis.

The target dynamics are linear-Gaussian, so prediction is the exact Kalman
step; only the measurement update goes through sigma points.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from filterpy.kalman import MerweScaledSigmaPoints, unscented_transform

from dynamics.carrier import CarrierState
from dynamics.target import STATE_DIM, TargetModel
from utils.errors import ConfigurationError, FilterDivergenceError, NumericalError

from .measurement import Measurement, MeasurementModel, observe, wrap_angle

logger = logging.getLogger(__name__)


def cholesky_with_jitter(A: np.ndarray) -> np.ndarray:
    """Upper Cholesky factor of A; one retry with 1e-9 * trace(A) / n on the diagonal."""
    try:
        return scipy.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        n = A.shape[0]
        jitter = 1e-9 * np.trace(A) / n
        logger.debug(f"Cholesky failed, retrying with jitter {jitter:.3e}")
        try:
            return scipy.linalg.cholesky(A + jitter * np.eye(n))
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Cholesky factorization failed even with jitter {jitter:.3e}: {e}") from e


@dataclass(frozen=True)
class UkfParams:
    alpha_sp: float = 0.5
    beta_sp: float = 2.0
    kappa_sp: float = 0.0

    def __post_init__(self):
        n = STATE_DIM
        if n + self.lam(n) <= 0:
            raise ConfigurationError(
                f"sigma-point scaling gives n + lambda = {n + self.lam(n)} <= 0"
            )

    def lam(self, n: int) -> float:
        return self.alpha_sp ** 2 * (n + self.kappa_sp) - n

    def points(self, n: int) -> MerweScaledSigmaPoints:
        return MerweScaledSigmaPoints(
            n, alpha=self.alpha_sp, beta=self.beta_sp, kappa=self.kappa_sp, sqrt_method=cholesky_with_jitter
        )

    def weights(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        points = self.points(n)
        return points.Wm, points.Wc


@dataclass(frozen=True)
class UkfState:
    mean: np.ndarray
    cov: np.ndarray
    t: int = 0
    innovation: Optional[np.ndarray] = None

    @property
    def position(self) -> Tuple[float, float]:
        return float(self.mean[0]), float(self.mean[2])


def _check_psd(cov: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(cov)):
        raise NumericalError(f"{where}: covariance has non-finite entries")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > 1e-9 * scale:
        raise NumericalError(f"{where}: covariance is not symmetric")
    smallest = float(np.linalg.eigvalsh(cov).min())
    if smallest < -1e-9 * scale:
        raise NumericalError(f"{where}: covariance not positive semi-definite (min eigenvalue {smallest:.3e})")


def sigma_points(mean: np.ndarray, cov: np.ndarray, params: UkfParams) -> np.ndarray:
    """2n+1 points (rows): the mean, then mean +/- rows of sqrt((n + lambda) P)."""
    return params.points(mean.shape[0]).sigma_points(mean, cov)


def ukf_predict(state: UkfState, model: TargetModel) -> UkfState:
    _check_psd(state.cov, "ukf_predict")
    F = model.F
    mean = F @ state.mean
    cov = F @ state.cov @ F.T + model.process_covariance
    return UkfState(mean=mean, cov=0.5 * (cov + cov.T), t=state.t + 1)


def _measurement_fns(angular: np.ndarray):
    def z_mean(sigmas: np.ndarray, Wm: np.ndarray) -> np.ndarray:
        z = Wm @ sigmas
        # circular mean for angles
        z[angular] = np.arctan2(Wm @ np.sin(sigmas[:, angular]), Wm @ np.cos(sigmas[:, angular]))
        return z

    def residual_z(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        y = np.asarray(a, dtype=float) - b
        y[..., angular] = wrap_angle(y[..., angular])
        return y

    return z_mean, residual_z


def unscented_update(
    state: UkfState,
    z: Sequence[float],
    hx: Callable[[np.ndarray], np.ndarray],
    R: np.ndarray,
    params: UkfParams,
    angular: Sequence[bool] = (),
) -> UkfState:
    """Generic sigma-point update; components flagged in `angular` are wrapped.

    `hx` maps the (2n+1, n) sigma array to the (2n+1, m) predicted measurements.
    """
    _check_psd(state.cov, "ukf_update")
    n = state.mean.shape[0]
    points = params.points(n)
    chi = points.sigma_points(state.mean, state.cov)
    Z = np.atleast_2d(hx(chi))
    m = Z.shape[1]
    angular = np.array(list(angular) + [False] * (m - len(angular)), dtype=bool)

    if angular.any():
        z_mean, residual_z = _measurement_fns(angular)
        z_pred, Pzz = unscented_transform(Z, points.Wm, points.Wc, R, mean_fn=z_mean, residual_fn=residual_z)
        dz = residual_z(Z, z_pred)
        innovation = residual_z(z, z_pred)
    else:
        z_pred, Pzz = unscented_transform(Z, points.Wm, points.Wc, R)
        dz = Z - z_pred
        innovation = np.asarray(z, dtype=float) - z_pred
    dx = chi - state.mean
    Pxz = (points.Wc[:, np.newaxis] * dx).T @ dz

    try:
        gain = scipy.linalg.solve(Pzz, Pxz.T, assume_a="sym").T
    except (np.linalg.LinAlgError, ValueError) as e:
        raise FilterDivergenceError(f"innovation covariance is singular at t={state.t}: {e}") from e
    if not np.all(np.isfinite(gain)):
        raise FilterDivergenceError(f"non-finite Kalman gain at t={state.t}")

    mean = state.mean + gain @ innovation
    cov = state.cov - gain @ Pzz @ gain.T
    return UkfState(mean=mean, cov=0.5 * (cov + cov.T), t=state.t, innovation=innovation)


def ukf_update(
    state: UkfState,
    z: Measurement,
    observer: CarrierState,
    observer_velocity: Sequence[float],
    model: MeasurementModel,
    params: UkfParams,
) -> UkfState:
    """Bearing/frequency update from one carrier position."""
    def hx(chi: np.ndarray) -> np.ndarray:
        return observe(chi, (observer.x, observer.y), observer_velocity, model)

    return unscented_update(state, z.vector, hx, model.noise_covariance, params, angular=(True, False))


def initial_state(
    mu0: np.ndarray,
    Sigma0: np.ndarray,
    mode: str = "prior",
    first: Optional[Measurement] = None,
    observer: Optional[CarrierState] = None,
    assumed_range: float = 10000.0,
) -> UkfState:
    """Filter start: the prior, or the first line of sight at an assumed range."""
    mean = np.array(mu0, dtype=float)
    if mode == "bearing":
        if first is None or observer is None:
            raise ConfigurationError("bearing initialization needs the first measurement and observer")
        mean[0] = observer.x + assumed_range * np.sin(first.bearing)
        mean[2] = observer.y + assumed_range * np.cos(first.bearing)
    elif mode != "prior":
        raise ConfigurationError(f"Unknown filter initialization mode: {mode}")
    return UkfState(mean=mean, cov=np.array(Sigma0, dtype=float), t=0)


def nees(state: UkfState, truth: np.ndarray) -> float:
    """Normalized estimation error squared."""
    error = np.asarray(truth, dtype=float) - state.mean
    try:
        return float(error @ scipy.linalg.solve(state.cov, error, assume_a="pos"))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"covariance not invertible for NEES: {e}") from e
