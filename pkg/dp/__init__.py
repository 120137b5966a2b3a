from .costs import (
    CostModel,
    MultiTargetCost,
    SingleTargetCost,
    StageCost,
    TradeoffCost,
    f_multiplier,
    get_cost_function,
    signal_levels,
    stage_cost,
)
from .solver import (
    CarrierGrid,
    PolicyEvaluation,
    PolicyTable,
    ValueTable,
    bellman_residual,
    evaluate_policy,
    save_tables,
    solve,
)

__all__ = [
    'CostModel',
    'MultiTargetCost',
    'SingleTargetCost',
    'StageCost',
    'TradeoffCost',
    'f_multiplier',
    'get_cost_function',
    'signal_levels',
    'stage_cost',
    'CarrierGrid',
    'PolicyEvaluation',
    'PolicyTable',
    'ValueTable',
    'bellman_residual',
    'evaluate_policy',
    'save_tables',
    'solve',
]
