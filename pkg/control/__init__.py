from .compare import (
    PeriodSummary,
    RunComparison,
    SplittingResult,
    compare_runs,
    horizon_splitting_ratio,
    realized_cost,
    summarize_log,
)
from .log import ScenarioLog, StepRecord, read_log_csv, write_log_csv
from .loop import PlanningCycle, plan_cycle, run_bot, run_known, run_scenario, run_tma

__all__ = [
    'PeriodSummary',
    'RunComparison',
    'SplittingResult',
    'compare_runs',
    'horizon_splitting_ratio',
    'realized_cost',
    'summarize_log',
    'ScenarioLog',
    'StepRecord',
    'read_log_csv',
    'write_log_csv',
    'PlanningCycle',
    'plan_cycle',
    'run_bot',
    'run_known',
    'run_scenario',
    'run_tma',
]
