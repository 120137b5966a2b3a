"""Scenario files: one JSON document per experiment.

Every section rejects unknown keys.  Builder methods turn the validated
document into the model objects the pipeline works with.
"""
import hashlib
import json
import logging
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from acoustics.propagation import PropagationField
from config.settings import settings
from dp.costs import CostModel
from dynamics.carrier import ActionSpace, CarrierState
from dynamics.target import TargetModel, join_models
from quantize.clvq import ClvqParams, default_metric_weights
from tma.measurement import MeasurementModel
from tma.ukf import UkfParams
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

KNOWN_KINDS = ("known_single", "known_double")
BOT_KINDS = ("bot_single", "bot_tradeoff")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FieldConfig(_Section):
    """Emitter loss field; the source depth comes from whoever emits."""

    water_depth: float = 1000.0
    base_offset: float = 40.0
    spreading_coeff: float = 20.0
    absorption: float = 0.3
    modulation_amp: float = 25.0
    cz_period: float = 35000.0
    loss_floor: float = 80.0
    loss_ceiling: float = 200.0

    def build(self, source_depth: float) -> PropagationField:
        return PropagationField(source_depth=source_depth, **self.model_dump())


class ActionSpaceConfig(_Section):
    deltas: Tuple[float, float, float]
    ranges: Tuple[int, int, int]
    depth_bounds: Tuple[float, float] = (0.0, 1000.0)
    horizontal_bounds: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None

    def build(self) -> ActionSpace:
        return ActionSpace(
            deltas=self.deltas,
            ranges=self.ranges,
            depth_bounds=self.depth_bounds,
            horizontal_bounds=self.horizontal_bounds,
        )


class CarrierConfig(_Section):
    initial: Tuple[float, float, float]
    actions: ActionSpaceConfig
    # displacement held between maneuvers while no control is active
    cruise: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    emitter: Optional[FieldConfig] = None


class TargetConfig(_Section):
    sigma_eps: float = Field(ge=0)
    mu0: Tuple[float, float, float, float]
    Sigma0: List[List[float]]
    depth: float = Field(ge=0)
    emitter: FieldConfig = FieldConfig()
    # true initial state (x, vx, y, vy); defaults to mu0
    initial_state: Optional[Tuple[float, float, float, float]] = None

    @field_validator("Sigma0")
    @classmethod
    def _square(cls, value):
        if len(value) != 4 or any(len(row) != 4 for row in value):
            raise ValueError("Sigma0 must be a 4x4 matrix")
        return value

    def build(self, T: float) -> TargetModel:
        return TargetModel(T=T, sigma_eps=self.sigma_eps, mu0=np.array(self.mu0),
                           Sigma0=np.array(self.Sigma0), depth=self.depth)


class ManeuverConfig(_Section):
    start: int = Field(ge=0)
    duration: int = Field(ge=1)
    displacement: Tuple[float, float, float]


class QuantizationConfig(_Section):
    M: int = Field(default=30, ge=1)
    NR: int = Field(default=2000, ge=0)
    NS: int = Field(default=20000, ge=1)
    gamma0: float = Field(default=0.1, ge=0, le=1)
    gamma_decay: Optional[float] = Field(default=None, ge=0)
    # weight of velocity components in the grid metric; None for plain Euclidean
    velocity_scale: Optional[float] = Field(default=60.0, gt=0)

    def build(self, N: int, seed: int) -> ClvqParams:
        return ClvqParams(M=self.M, NR=self.NR, N=N, gamma0=self.gamma0,
                          gamma_decay=self.gamma_decay, seed=seed)

    def metric_weights(self, dim: int) -> np.ndarray:
        if self.velocity_scale is None:
            return np.ones(dim)
        return default_metric_weights(dim, self.velocity_scale)


class CostConfig(_Section):
    mode: Literal["single_target", "multi_target", "tradeoff"] = "single_target"
    alphas: Tuple[float, ...] = ()
    epsilon: float = 0.1
    terminal_mode: Literal["zero", "same_as_stage"] = "same_as_stage"


class FilterConfig(_Section):
    f0: float = 300.0
    c_sound: float = 1500.0
    sigma_bearing_deg: float = 1.0
    sigma_freq: float = 0.05
    alpha_sp: float = 0.5
    beta_sp: float = 2.0
    kappa_sp: float = 0.0
    init_mode: Literal["prior", "bearing"] = "prior"
    assumed_range: float = Field(default=10000.0, gt=0)

    def measurement_model(self) -> MeasurementModel:
        return MeasurementModel(f0=self.f0, c_sound=self.c_sound,
                                sigma_bearing=math.radians(self.sigma_bearing_deg),
                                sigma_freq=self.sigma_freq)

    def ukf_params(self) -> UkfParams:
        return UkfParams(alpha_sp=self.alpha_sp, beta_sp=self.beta_sp, kappa_sp=self.kappa_sp)


class DiagramConfig(_Section):
    range_max: float = Field(default=100000.0, gt=0)
    n_r: int = Field(default=201, ge=2)
    n_z: int = Field(default=51, ge=2)
    saturation: Optional[float] = 120.0


class ScenarioConfig(_Section):
    scenario_kind: Literal["known_single", "known_double", "bot_single", "bot_tradeoff"]
    total_steps: int = Field(ge=1)
    step_seconds: float = Field(default=60.0, gt=0)
    carrier: CarrierConfig
    targets: List[TargetConfig] = Field(min_length=1)
    maneuver_schedule: List[ManeuverConfig] = []
    period1_end: int = Field(default=0, ge=0)
    # None plans over the whole remaining horizon at once
    subinterval_length: Optional[int] = Field(default=None, ge=1)
    quantization: QuantizationConfig = QuantizationConfig()
    cost: CostConfig = CostConfig()
    filter: FilterConfig = FilterConfig()
    diagram: DiagramConfig = DiagramConfig()
    truth_from_prior: bool = False
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _consistent(self):
        kind = self.scenario_kind
        n_targets = len(self.targets)
        if self.period1_end > self.total_steps:
            raise ValueError(f"period1_end {self.period1_end} exceeds total_steps {self.total_steps}")
        if kind == "known_double" and n_targets != 2:
            raise ValueError(f"known_double needs 2 targets, got {n_targets}")
        if kind != "known_double" and n_targets != 1:
            raise ValueError(f"{kind} needs exactly 1 target, got {n_targets}")
        if kind in KNOWN_KINDS and self.period1_end != 0:
            raise ValueError("known-target scenarios have no filtering period; set period1_end to 0")
        if kind == "known_double" and self.cost.mode != "multi_target":
            raise ValueError("known_double needs the multi_target cost")
        if kind != "known_double" and self.cost.mode == "multi_target":
            raise ValueError(f"multi_target cost needs two targets, scenario is {kind}")
        if kind == "bot_tradeoff" and self.cost.mode != "tradeoff":
            raise ValueError("bot_tradeoff needs the tradeoff cost")
        if self.cost.mode == "tradeoff" and self.carrier.emitter is None:
            raise ValueError("tradeoff cost needs carrier.emitter")
        for m in self.maneuver_schedule:
            if m.start + m.duration > self.period1_end and kind in BOT_KINDS:
                raise ValueError(
                    f"maneuver at step {m.start} lasting {m.duration} runs past period1_end {self.period1_end}"
                )
        return self

    # builders

    @property
    def is_known(self) -> bool:
        return self.scenario_kind in KNOWN_KINDS

    def carrier_state(self) -> CarrierState:
        return CarrierState(*self.carrier.initial)

    def action_space(self) -> ActionSpace:
        return self.carrier.actions.build()

    def target_models(self) -> List[TargetModel]:
        return [t.build(self.step_seconds) for t in self.targets]

    def joint_model(self):
        """The single TargetModel, or the stacked JointTargetModel for two targets."""
        models = self.target_models()
        if len(models) == 1:
            return models[0]
        return join_models(*models)

    def target_fields(self) -> List[PropagationField]:
        return [t.emitter.build(t.depth) for t in self.targets]

    def carrier_field(self) -> Optional[PropagationField]:
        if self.carrier.emitter is None:
            return None
        return self.carrier.emitter.build(self.carrier.initial[2])

    def cost_model(self) -> CostModel:
        return CostModel(
            mode=self.cost.mode,
            target_fields=tuple(self.target_fields()),
            carrier_field=self.carrier_field(),
            alphas=self.cost.alphas,
            epsilon=self.cost.epsilon,
            terminal_mode=self.cost.terminal_mode,
        )

    def scheduled_displacement(self, t: int) -> Tuple[float, float, float]:
        """Period-1 displacement at step t: a maneuver leg if one is active, else cruise."""
        for m in self.maneuver_schedule:
            if m.start <= t < m.start + m.duration:
                return m.displacement
        return self.carrier.cruise

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_lattice(config: ScenarioConfig) -> None:
    space = config.action_space()
    legs = [("cruise", config.carrier.cruise)]
    legs += [(f"maneuver at step {m.start}", m.displacement) for m in config.maneuver_schedule]
    for name, displacement in legs:
        if space.index_of(displacement) is None:
            raise ConfigurationError(f"{name} displacement {displacement} is not on the action lattice")


def build_scenario(data: dict, seed: Optional[int] = None) -> ScenarioConfig:
    """Validate a parsed scenario document, applying a seed override."""
    if seed is not None:
        data = {**data, "seed": int(seed)}
    try:
        config = ScenarioConfig.model_validate(data)
        # run the model constructors so their own checks fire at load time
        config.cost_model()
        config.target_models()
        config.filter.ukf_params()
        config.filter.measurement_model()
        _check_lattice(config)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario: {e}") from e
    return config


def load_scenario(path: str, seed: Optional[int] = None) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read scenario {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Scenario {path} must hold a JSON object")
    config = build_scenario(data, seed)
    logger.info(f"Loaded scenario {path}: kind={config.scenario_kind}, steps={config.total_steps}, seed={config.seed}")
    return config
