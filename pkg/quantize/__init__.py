from .chain import QuantizedChain, estimate_transitions, quantize_chain
from .clvq import (
    ClvqParams,
    QuantizationGrid,
    clvq_train,
    default_metric_weights,
    distortion,
    nearest,
    nearest_indices,
)

__all__ = [
    'QuantizedChain',
    'estimate_transitions',
    'quantize_chain',
    'ClvqParams',
    'QuantizationGrid',
    'clvq_train',
    'default_metric_weights',
    'distortion',
    'nearest',
    'nearest_indices',
]
