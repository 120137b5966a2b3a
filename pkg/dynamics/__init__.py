from .carrier import (
    ActionSpace,
    CarrierState,
    apply_action,
    feasible_actions,
    feasible_indices,
    position_of,
    reachable_offsets,
)
from .target import (
    ChainSampler,
    JointTargetModel,
    LinearGaussianChain,
    TargetModel,
    TargetState,
    chain_sampler,
    join_models,
    propagate,
    step_target,
)

__all__ = [
    'ActionSpace',
    'CarrierState',
    'apply_action',
    'feasible_actions',
    'feasible_indices',
    'position_of',
    'reachable_offsets',
    'ChainSampler',
    'JointTargetModel',
    'LinearGaussianChain',
    'TargetModel',
    'TargetState',
    'chain_sampler',
    'join_models',
    'propagate',
    'step_target',
]
