from .measurement import Measurement, MeasurementModel, measure, observe, wrap_angle
from .ukf import (
    UkfParams,
    cholesky_with_jitter,
    UkfState,
    initial_state,
    nees,
    sigma_points,
    ukf_predict,
    ukf_update,
    unscented_update,
)

__all__ = [
    'Measurement',
    'MeasurementModel',
    'measure',
    'observe',
    'wrap_angle',
    'UkfParams',
    'UkfState',
    'cholesky_with_jitter',
    'initial_state',
    'nees',
    'sigma_points',
    'ukf_predict',
    'ukf_update',
    'unscented_update',
]
