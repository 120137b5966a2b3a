"""Per-step scenario records and their CSV form."""
import csv
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from dynamics.carrier import CarrierState
from tma.measurement import Measurement
from utils.errors import OutputError

logger = logging.getLogger(__name__)

ESTIMATE_COLUMNS = ["wbar_x", "wbar_vx", "wbar_y", "wbar_vy"]
TAIL_COLUMNS = ["cov_trace", "bearing", "frequency", "nearest_index", "stage_cost", "C_W", "C_S", "grid_id", "status"]


@dataclass
class StepRecord:
    t: int
    carrier: CarrierState
    action: Optional[Tuple[float, float, float]]
    target_positions: List[Tuple[float, float]]
    stage_cost: float = math.nan
    c_w: float = math.nan
    c_s: float = math.nan
    truth: Optional[np.ndarray] = None  # full stacked target state, not written to CSV
    estimate: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None
    cov_trace: Optional[float] = None
    measurement: Optional[Measurement] = None
    nearest_index: Optional[int] = None
    grid_id: Optional[int] = None
    status: str = "ok"

    def __post_init__(self):
        if self.cov_trace is None and self.covariance is not None:
            self.cov_trace = float(np.trace(self.covariance))


@dataclass
class ScenarioLog:
    scenario_kind: str
    n_targets: int
    period1_end: int = 0
    records: List[StepRecord] = field(default_factory=list)
    aborted: bool = False

    def __len__(self) -> int:
        return len(self.records)

    @property
    def total_steps(self) -> int:
        return self.records[-1].t if self.records else 0

    def period(self, which: int) -> List[StepRecord]:
        """Period 1 is t <= period1_end, period 2 everything after."""
        if which == 1:
            return [r for r in self.records if r.t <= self.period1_end]
        return [r for r in self.records if r.t > self.period1_end]


def log_columns(n_targets: int) -> List[str]:
    columns = ["t", "s_x", "s_y", "s_z", "a_x", "a_y", "a_z"]
    for k in range(1, n_targets + 1):
        columns += [f"target{k}_x", f"target{k}_y"]
    return columns + ESTIMATE_COLUMNS + TAIL_COLUMNS


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return ""
    return f"{value:.6g}"


def _row(record: StepRecord, n_targets: int) -> List[str]:
    action = record.action if record.action is not None else (None, None, None)
    estimate: Sequence = record.estimate if record.estimate is not None else [None] * 4
    bearing = frequency = None
    if record.measurement is not None:
        bearing, frequency = record.measurement.bearing, record.measurement.frequency
    values = [record.t, record.carrier.x, record.carrier.y, record.carrier.depth, *action]
    for k in range(n_targets):
        values += list(record.target_positions[k])
    values += list(estimate[:4])
    values += [record.cov_trace, bearing, frequency, record.nearest_index,
               record.stage_cost, record.c_w, record.c_s, record.grid_id, record.status]
    return [_fmt(v) for v in values]


def write_log_csv(log: ScenarioLog, path: str) -> None:
    """One row per step in the fixed column order, written atomically."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(log_columns(log.n_targets))
            for record in log.records:
                writer.writerow(_row(record, log.n_targets))
        os.replace(tmp_path, path)
    except OSError as e:
        raise OutputError(f"Cannot write scenario log {path}: {e}") from e
    logger.info(f"Wrote {len(log.records)} log rows to {path}")


def _num(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def _level(text: str) -> float:
    return float(text) if text != "" else math.nan


def read_log_csv(path: str, period1_end: int = 0, scenario_kind: str = "unknown") -> ScenarioLog:
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise OutputError(f"Cannot read scenario log {path}: {e}") from e
    if not rows:
        raise OutputError(f"Scenario log {path} is empty")

    n_targets = sum(1 for name in rows[0] if name.startswith("target") and name.endswith("_x"))
    log = ScenarioLog(scenario_kind=scenario_kind, n_targets=n_targets, period1_end=period1_end)
    for row in rows:
        try:
            action = None
            if row["a_x"] != "":
                action = (float(row["a_x"]), float(row["a_y"]), float(row["a_z"]))
            estimate = None
            if row["wbar_x"] != "":
                estimate = np.array([float(row[c]) for c in ESTIMATE_COLUMNS])
            measurement = None
            if row["bearing"] != "":
                measurement = Measurement(bearing=float(row["bearing"]), frequency=float(row["frequency"]), t=int(row["t"]))
            nearest_index = row["nearest_index"]
            grid_id = row["grid_id"]
            log.records.append(StepRecord(
                t=int(row["t"]),
                carrier=CarrierState(float(row["s_x"]), float(row["s_y"]), float(row["s_z"])),
                action=action,
                target_positions=[
                    (float(row[f"target{k}_x"]), float(row[f"target{k}_y"])) for k in range(1, n_targets + 1)
                ],
                stage_cost=_level(row["stage_cost"]),
                c_w=_level(row["C_W"]),
                c_s=_level(row["C_S"]),
                estimate=estimate,
                cov_trace=_num(row["cov_trace"]),
                measurement=measurement,
                nearest_index=int(nearest_index) if nearest_index != "" else None,
                grid_id=int(grid_id) if grid_id != "" else None,
                status=row["status"],
            ))
        except (KeyError, ValueError) as e:
            raise OutputError(f"Malformed row in scenario log {path}: {e}") from e
    log.aborted = any(r.status != "ok" for r in log.records)
    return log
