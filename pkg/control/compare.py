"""Summary statistics over scenario logs."""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from config.scenario import ScenarioConfig
from utils.errors import ConfigurationError, ContractViolation

from .log import ScenarioLog, StepRecord
from .loop import run_known

logger = logging.getLogger(__name__)

METRICS = ("stage_cost", "c_w", "c_s", "position_rmse")


@dataclass(frozen=True)
class PeriodSummary:
    steps: int
    stage_cost: Optional[float]
    c_w: Optional[float]
    c_s: Optional[float]
    position_rmse: Optional[float]


def _mean(values: List[float]) -> Optional[float]:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else None


def summarize_period(records: List[StepRecord]) -> PeriodSummary:
    errors = [
        (r.estimate[0] - r.target_positions[0][0]) ** 2 + (r.estimate[2] - r.target_positions[0][1]) ** 2
        for r in records
        if r.estimate is not None
    ]
    return PeriodSummary(
        steps=len(records),
        stage_cost=_mean([r.stage_cost for r in records]),
        c_w=_mean([r.c_w for r in records]),
        c_s=_mean([r.c_s for r in records]),
        position_rmse=float(np.sqrt(np.mean(errors))) if errors else None,
    )


def summarize_log(log: ScenarioLog) -> Dict[str, object]:
    return {
        "scenario_kind": log.scenario_kind,
        "total_steps": log.total_steps,
        "period1_end": log.period1_end,
        "aborted": log.aborted,
        "period1": asdict(summarize_period(log.period(1))),
        "period2": asdict(summarize_period(log.period(2))),
    }


@dataclass(frozen=True)
class RunComparison:
    period1_a: PeriodSummary
    period2_a: PeriodSummary
    period1_b: PeriodSummary
    period2_b: PeriodSummary

    @staticmethod
    def _diff(a: PeriodSummary, b: PeriodSummary) -> Dict[str, Optional[float]]:
        out = {}
        for name in METRICS:
            x, y = getattr(a, name), getattr(b, name)
            out[name] = None if x is None or y is None else x - y
        return out

    @property
    def differences(self) -> Dict[str, Dict[str, Optional[float]]]:
        """a minus b, per period."""
        return {
            "period1": self._diff(self.period1_a, self.period1_b),
            "period2": self._diff(self.period2_a, self.period2_b),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "a": {"period1": asdict(self.period1_a), "period2": asdict(self.period2_a)},
            "b": {"period1": asdict(self.period1_b), "period2": asdict(self.period2_b)},
            "difference": self.differences,
        }


def compare_runs(log_a: ScenarioLog, log_b: ScenarioLog) -> RunComparison:
    if len(log_a) != len(log_b) or log_a.total_steps != log_b.total_steps:
        raise ContractViolation(
            f"logs cover different horizons: {len(log_a)} rows (t<={log_a.total_steps}) "
            f"vs {len(log_b)} rows (t<={log_b.total_steps})"
        )
    if log_a.period1_end != log_b.period1_end:
        raise ContractViolation(f"logs disagree on period1_end: {log_a.period1_end} vs {log_b.period1_end}")
    return RunComparison(
        period1_a=summarize_period(log_a.period(1)),
        period2_a=summarize_period(log_a.period(2)),
        period1_b=summarize_period(log_b.period(1)),
        period2_b=summarize_period(log_b.period(2)),
    )


def realized_cost(log: ScenarioLog, terminal_mode: str = "same_as_stage") -> float:
    """The planning objective on the logged path: stage costs for t >= 1 plus the terminal charge."""
    stages = [r.stage_cost for r in log.records if r.t >= 1]
    total = float(np.sum(stages))
    if terminal_mode == "same_as_stage":
        total += log.records[-1].stage_cost
    return total


@dataclass(frozen=True)
class SplittingResult:
    split_total: float
    unsplit_total: float

    @property
    def ratio(self) -> float:
        return self.split_total / self.unsplit_total


def horizon_splitting_ratio(config: ScenarioConfig, workers: Optional[int] = None) -> SplittingResult:
    """Realized objective of the split plan against one solve over the whole horizon."""
    H = config.subinterval_length
    if not config.is_known:
        raise ConfigurationError("horizon splitting comparison runs on known-target scenarios")
    if H is None or H >= config.total_steps:
        raise ConfigurationError(f"subinterval_length must be below total_steps {config.total_steps}, got {H}")
    split = run_known(config, workers=workers)
    unsplit = run_known(config.model_copy(update={"subinterval_length": None}), workers=workers)
    result = SplittingResult(
        split_total=realized_cost(split, config.cost.terminal_mode),
        unsplit_total=realized_cost(unsplit, config.cost.terminal_mode),
    )
    logger.info(f"Horizon splitting H={H}: split={result.split_total:.4f}, unsplit={result.unsplit_total:.4f}")
    return result
