"""Closed-loop scenario runners.

Known-target runs quantize the target chain, solve once per planning cycle and
act on the nearest grid cell of the true state.  Bearings-only runs track the
target with the unscented filter, follow the maneuver schedule until
period1_end and then plan on chains started from the filter posterior.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.scenario import BOT_KINDS, KNOWN_KINDS, ScenarioConfig
from dp.costs import CostModel, StageCost, get_cost_function, signal_levels, target_depths
from dp.solver import PolicyTable, solve
from dynamics.carrier import CarrierState, apply_action
from dynamics.target import ChainSampler, TargetModel, TargetState, chain_sampler, step_target
from quantize.chain import QuantizedChain, quantize_chain
from tma.measurement import measure
from tma.ukf import initial_state, ukf_predict, ukf_update
from utils.errors import ConfigurationError, NumericalError, RunAborted
from utils.seeding import derive_seed

from .log import ScenarioLog, StepRecord

logger = logging.getLogger(__name__)

# seed streams under the scenario master seed
STREAM_TRUTH = 10
STREAM_MEASUREMENT = 11
STREAM_QUANTIZATION = 12

ZERO_ACTION = (0.0, 0.0, 0.0)


@dataclass
class PlanningCycle:
    """A quantized chain and its policy, valid from step `start` for `horizon` steps."""

    grid_id: int
    start: int
    s0: CarrierState
    chain: QuantizedChain
    policy: PolicyTable

    @property
    def horizon(self) -> int:
        return self.chain.horizon

    def decide(self, t: int, s: CarrierState, w_hat: np.ndarray) -> Tuple[Tuple[float, float, float], int]:
        k = t - self.start
        i = self.chain.nearest(k, w_hat)
        deltas = self.policy.grid.space.deltas
        offset = tuple(int(round((b - a) / d)) for a, b, d in zip(self.s0.vector, s.vector, deltas))
        point = self.chain.grids[k].points[i]
        gap = float(np.sqrt(((point - w_hat) ** 2 * self.chain.metric_weights).sum()))
        logger.debug(f"t={t}: estimate maps to cell {i} of grid {self.grid_id} at distance {gap:.1f}")
        return self.policy.action_at(k, offset, i), i


def plan_cycle(
    config: ScenarioConfig,
    sampler: ChainSampler,
    s: CarrierState,
    start: int,
    horizon: int,
    grid_id: int,
    cost: CostModel,
    workers: Optional[int] = None,
) -> PlanningCycle:
    """Quantize the chain started from the sampler's initial law, then solve."""
    params = config.quantization.build(N=horizon, seed=derive_seed(config.seed, STREAM_QUANTIZATION, grid_id))
    logger.info(f"Planning cycle {grid_id}: t={start}, horizon={horizon}, carrier at {tuple(s.vector)}")
    chain = quantize_chain(
        sampler,
        params,
        config.quantization.NS,
        metric_weights=config.quantization.metric_weights(sampler.dim),
        workers=workers,
    )
    _, policy = solve(chain, config.action_space(), s, cost)
    return PlanningCycle(grid_id=grid_id, start=start, s0=s, chain=chain, policy=policy)


def _initial_truths(config: ScenarioConfig, models: Sequence[TargetModel], rng: np.random.Generator) -> List[np.ndarray]:
    truths = []
    for target, model in zip(config.targets, models):
        if config.truth_from_prior:
            truths.append(rng.multivariate_normal(model.mu0, model.Sigma0, method="eigh"))
        elif target.initial_state is not None:
            truths.append(np.array(target.initial_state, dtype=float))
        else:
            truths.append(model.mu0.copy())
    return truths


def _advance_truths(models: Sequence[TargetModel], truths: Sequence[np.ndarray], rng: np.random.Generator) -> List[np.ndarray]:
    out = []
    for w, model in zip(truths, models):
        noise = rng.standard_normal(2) * model.sigma_eps
        out.append(step_target(model, TargetState(w=w, depth=model.depth), noise).w)
    return out


def _record(
    t: int,
    s: CarrierState,
    action,
    truths: Sequence[np.ndarray],
    cost: CostModel,
    cost_fn: StageCost,
    **extra,
) -> StepRecord:
    depths = target_depths(cost)
    positions = [(float(w[0]), float(w[2])) for w in truths]
    targets_xy = np.array(positions[:cost.n_targets])
    c_w, c_s = signal_levels(cost, s, positions[0], depths[0])
    return StepRecord(
        t=t,
        carrier=s,
        action=None if action is None else tuple(float(a) for a in action),
        target_positions=positions,
        stage_cost=float(cost_fn.evaluate(s.vector, targets_xy, depths)),
        c_w=c_w,
        c_s=c_s,
        truth=np.concatenate(truths),
        **extra,
    )


def run_known(config: ScenarioConfig, baseline: bool = False, workers: Optional[int] = None) -> ScenarioLog:
    """Control against targets whose true state is observed at every step."""
    if config.scenario_kind not in KNOWN_KINDS:
        raise ConfigurationError(f"run_known needs one of {KNOWN_KINDS}, got {config.scenario_kind}")
    N = config.total_steps
    H = config.subinterval_length or N
    models = config.target_models()
    model = config.joint_model()
    cost = config.cost_model()
    cost_fn = get_cost_function(cost)
    space = config.action_space()
    truth_rng = np.random.default_rng(derive_seed(config.seed, STREAM_TRUTH))

    s = config.carrier_state()
    truths = _initial_truths(config, models, truth_rng)
    log = ScenarioLog(scenario_kind=config.scenario_kind, n_targets=len(truths), period1_end=0)
    logger.info(f"Running {config.scenario_kind}: N={N}, H={H}, baseline={baseline}")

    cycle: Optional[PlanningCycle] = None
    for t in range(N + 1):
        action = index = None
        if t < N:
            if baseline:
                action = ZERO_ACTION
            else:
                if t % H == 0:
                    # first cycle starts from the prior, later ones from the observed state
                    mean0 = model.mu0 if t == 0 else np.concatenate(truths)
                    sampler = chain_sampler(model, mean0=mean0, cov0=model.Sigma0)
                    cycle = plan_cycle(config, sampler, s, t, min(H, N - t), t // H, cost, workers)
                action, index = cycle.decide(t, s, np.concatenate(truths))
        log.records.append(_record(
            t, s, action, truths, cost, cost_fn,
            nearest_index=index,
            grid_id=None if baseline else cycle.grid_id,
        ))
        if t == N:
            break
        s = apply_action(s, action, space)
        truths = _advance_truths(models, truths, truth_rng)
    return log


def run_bot(config: ScenarioConfig, baseline: bool = False, workers: Optional[int] = None) -> ScenarioLog:
    """Bearings-only run: filtering period with scheduled maneuvers, then planning cycles."""
    if config.scenario_kind not in BOT_KINDS:
        raise ConfigurationError(f"run_bot needs one of {BOT_KINDS}, got {config.scenario_kind}")
    N = config.total_steps
    t0 = config.period1_end
    H = config.subinterval_length or max(N - t0, 1)
    models = config.target_models()
    model = models[0]
    cost = config.cost_model()
    cost_fn = get_cost_function(cost)
    space = config.action_space()
    sensor = config.filter.measurement_model()
    params = config.filter.ukf_params()
    T = config.step_seconds
    truth_rng = np.random.default_rng(derive_seed(config.seed, STREAM_TRUTH))
    noise_rng = np.random.default_rng(derive_seed(config.seed, STREAM_MEASUREMENT))

    s = config.carrier_state()
    velocity = np.asarray(config.carrier.cruise, dtype=float) / T
    truths = _initial_truths(config, models, truth_rng)
    log = ScenarioLog(scenario_kind=config.scenario_kind, n_targets=1, period1_end=t0)
    logger.info(f"Running {config.scenario_kind}: N={N}, period1_end={t0}, H={H}, baseline={baseline}")

    z = measure(TargetState(truths[0], model.depth), s, velocity, sensor, noise_rng.standard_normal(2), t=0)
    state = initial_state(model.mu0, model.Sigma0, config.filter.init_mode,
                          first=z, observer=s, assumed_range=config.filter.assumed_range)
    state = ukf_update(state, z, s, velocity, sensor, params)

    cycle: Optional[PlanningCycle] = None
    for t in range(N + 1):
        action = index = None
        if t < N:
            if t < t0:
                action = config.scheduled_displacement(t)
            elif baseline:
                action = ZERO_ACTION
            else:
                if (t - t0) % H == 0:
                    sampler = chain_sampler(model, mean0=state.mean, cov0=state.cov)
                    grid_id = (t - t0) // H
                    cycle = plan_cycle(config, sampler, s, t, min(H, N - t), grid_id, cost, workers)
                action, index = cycle.decide(t, s, state.mean)
        log.records.append(_record(
            t, s, action, truths, cost, cost_fn,
            estimate=state.mean,
            covariance=state.cov,
            measurement=z,
            nearest_index=index,
            grid_id=cycle.grid_id if (cycle is not None and t >= t0 and not baseline) else None,
        ))
        if t == N:
            break

        s = apply_action(s, action, space)
        velocity = np.asarray(action, dtype=float) / T
        truths = _advance_truths(models, truths, truth_rng)
        try:
            state = ukf_predict(state, model)
            z = measure(TargetState(truths[0], model.depth), s, velocity, sensor,
                        noise_rng.standard_normal(2), t=t + 1)
            state = ukf_update(state, z, s, velocity, sensor, params)
        except NumericalError as e:
            log.records.append(_record(t + 1, s, None, truths, cost, cost_fn, status="diverged"))
            log.aborted = True
            logger.error(f"Filter failed at t={t + 1}, aborting run: {e}")
            raise RunAborted(f"filter failed at t={t + 1}: {e}", log=log) from e
    return log


def run_tma(config: ScenarioConfig, maneuvers: bool = True) -> ScenarioLog:
    """Filter-only run over the whole horizon, with or without the maneuver schedule."""
    update = {"period1_end": config.total_steps}
    if not maneuvers:
        update["maneuver_schedule"] = []
    return run_bot(config.model_copy(update=update))


def run_scenario(config: ScenarioConfig, baseline: bool = False, workers: Optional[int] = None) -> ScenarioLog:
    if config.is_known:
        return run_known(config, baseline=baseline, workers=workers)
    return run_bot(config, baseline=baseline, workers=workers)
