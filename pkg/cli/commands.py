"""Command-line entry points.

    python main.py diagram  --config scenarios/scenario1_known_single.json --out out/s1
    python main.py quantize --config ... --out ...
    python main.py solve    --config ... --out ...
    python main.py run      --config ... --out ... [--baseline] [--seed N] [--workers K]
    python main.py compare  --config ... --out ... --log-a a.csv --log-b b.csv

Every command writes its artifacts under --out and finishes with manifest.json.
"""
import argparse
import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

from acoustics.propagation import PropagationField, render_diagram
from config.scenario import ScenarioConfig, load_scenario
from config.settings import settings
from control.compare import compare_runs, horizon_splitting_ratio, summarize_log
from control.log import read_log_csv, write_log_csv
from control.loop import STREAM_QUANTIZATION, run_scenario
from dp.solver import evaluate_policy, save_tables, solve
from dynamics.target import chain_sampler
from quantize.chain import QuantizedChain, quantize_chain
from utils.errors import OutputError, RunAborted, SimulationError
from utils.log_setup import setup_logging
from utils.seeding import derive_seed

from .manifest import RunManifest, write_json

logger = logging.getLogger(__name__)

EVALUATION_RUNS = 1000
STREAM_EVALUATION = 13


def _prepare_out(out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory {out_dir}: {e}") from e
    if not os.access(out_dir, os.W_OK):
        raise OutputError(f"Output directory {out_dir} is not writable")


def emitters(config: ScenarioConfig) -> List[Tuple[str, PropagationField]]:
    named = [(f"target{k}", f) for k, f in enumerate(config.target_fields(), start=1)]
    carrier = config.carrier_field()
    if carrier is not None:
        named.append(("carrier", carrier))
    return named


def planning_horizon(config: ScenarioConfig) -> int:
    """Length of the first planning cycle."""
    start = 0 if config.is_known else config.period1_end
    remaining = config.total_steps - start or config.total_steps
    return min(config.subinterval_length or remaining, remaining)


def _prior_chain(config: ScenarioConfig, workers: Optional[int]):
    sampler = chain_sampler(config.joint_model())
    params = config.quantization.build(
        N=planning_horizon(config), seed=derive_seed(config.seed, STREAM_QUANTIZATION, 0)
    )
    chain = quantize_chain(
        sampler, params, config.quantization.NS,
        metric_weights=config.quantization.metric_weights(sampler.dim), workers=workers,
    )
    return sampler, chain


def cmd_diagram(config: ScenarioConfig, out_dir: str, manifest: RunManifest) -> List[str]:
    """One loss-diagram CSV per configured emitter."""
    d = config.diagram
    saturation = math.inf if d.saturation is None else d.saturation
    written = []
    with manifest.phase("diagram"):
        for name, field in emitters(config):
            diagram = render_diagram(field, d.range_max, d.n_r, d.n_z, saturation=saturation)
            filename = f"diagram_{name}.csv"
            diagram.to_csv(os.path.join(out_dir, filename))
            manifest.add_output(filename)
            written.append(filename)
    return written


def cmd_quantize(config: ScenarioConfig, out_dir: str, manifest: RunManifest, workers: Optional[int] = None) -> QuantizedChain:
    with manifest.phase("quantize"):
        _, chain = _prior_chain(config, workers)
    chain.save(os.path.join(out_dir, "chain.npz"))
    manifest.add_output("chain.npz")
    return chain


def cmd_solve(
    config: ScenarioConfig,
    out_dir: str,
    manifest: RunManifest,
    workers: Optional[int] = None,
    chain_path: Optional[str] = None,
) -> Dict[str, float]:
    """Solve the first planning cycle on a stored chain, or on a freshly quantized one."""
    if chain_path is not None:
        sampler, chain = chain_sampler(config.joint_model()), QuantizedChain.load(chain_path)
    else:
        with manifest.phase("quantize"):
            sampler, chain = _prior_chain(config, workers)
    cost = config.cost_model()
    with manifest.phase("solve"):
        values, policy = solve(chain, config.action_space(), config.carrier_state(), cost)
    with manifest.phase("evaluate"):
        evaluation = evaluate_policy(
            policy, chain, cost, EVALUATION_RUNS, derive_seed(config.seed, STREAM_EVALUATION), sampler=sampler
        )
    if chain_path is None:
        chain.save(os.path.join(out_dir, "chain.npz"))
        manifest.add_output("chain.npz")
    save_tables(values, policy, os.path.join(out_dir, "tables.npz"))
    metrics = {
        "expected_value_t0": float(chain.weights[0] @ values.values[0][0]),
        "evaluated_mean": evaluation.mean,
        "evaluated_std_error": evaluation.std_error,
        "evaluation_runs": evaluation.runs,
    }
    write_json(os.path.join(out_dir, "solve_metrics.json"), metrics)
    manifest.add_output("tables.npz")
    manifest.add_output("solve_metrics.json")
    return metrics


def cmd_run(
    config: ScenarioConfig,
    out_dir: str,
    manifest: RunManifest,
    baseline: bool = False,
    workers: Optional[int] = None,
) -> Dict[str, object]:
    log_path = os.path.join(out_dir, "log.csv")
    try:
        with manifest.phase("run"):
            log = run_scenario(config, baseline=baseline, workers=workers)
    except RunAborted as e:
        if e.log is not None:
            write_log_csv(e.log, log_path)
            manifest.add_output("log.csv")
        raise
    write_log_csv(log, log_path)
    manifest.add_output("log.csv")

    metrics = summarize_log(log)
    metrics["baseline"] = baseline
    if config.is_known and not baseline and config.subinterval_length and config.subinterval_length < config.total_steps:
        with manifest.phase("splitting_reference"):
            splitting = horizon_splitting_ratio(config, workers=workers)
        metrics["horizon_splitting"] = {
            "split_total": splitting.split_total,
            "unsplit_total": splitting.unsplit_total,
            "ratio": splitting.ratio,
        }
    write_json(os.path.join(out_dir, "metrics.json"), metrics)
    manifest.add_output("metrics.json")
    return metrics


def cmd_compare(config: ScenarioConfig, out_dir: str, manifest: RunManifest, log_a: str, log_b: str) -> Dict[str, object]:
    a = read_log_csv(log_a, period1_end=config.period1_end, scenario_kind=config.scenario_kind)
    b = read_log_csv(log_b, period1_end=config.period1_end, scenario_kind=config.scenario_kind)
    comparison = compare_runs(a, b).to_dict()
    write_json(os.path.join(out_dir, "comparison.json"), comparison)
    manifest.add_output("comparison.json")
    return comparison


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subtrack", description="Carrier trajectory optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help=f"output directory (default {settings.OUTPUT_DIR})")
        p.add_argument("--seed", type=int, default=None, help="override the scenario master seed")
        p.add_argument("--workers", type=int, default=None, help="worker threads for transition estimation")
        p.add_argument("--log-level", default=None, help=f"default {settings.LOG_LEVEL}")

    common(sub.add_parser("diagram", help="write signal-loss diagrams"))
    common(sub.add_parser("quantize", help="quantize the prior target chain"))
    solve_parser = sub.add_parser("solve", help="solve the first planning cycle")
    common(solve_parser)
    solve_parser.add_argument("--chain", default=None, help="stored chain archive; quantized afresh when omitted")
    run = sub.add_parser("run", help="simulate the closed loop")
    common(run)
    run.add_argument("--baseline", action="store_true", help="zero action once control would start")
    compare = sub.add_parser("compare", help="compare two scenario logs")
    common(compare)
    compare.add_argument("--log-a", required=True)
    compare.add_argument("--log-b", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or settings.LOG_LEVEL, settings.LOG_FORMAT)
    out_dir = args.out or settings.OUTPUT_DIR
    workers = args.workers or settings.WORKERS

    try:
        config = load_scenario(args.config, seed=args.seed)
        _prepare_out(out_dir)
        manifest = RunManifest(command=args.command, config_hash=config.config_hash(), seed=config.seed)
        try:
            if args.command == "diagram":
                cmd_diagram(config, out_dir, manifest)
            elif args.command == "quantize":
                cmd_quantize(config, out_dir, manifest, workers)
            elif args.command == "solve":
                cmd_solve(config, out_dir, manifest, workers, chain_path=args.chain)
            elif args.command == "run":
                cmd_run(config, out_dir, manifest, baseline=args.baseline, workers=workers)
            elif args.command == "compare":
                cmd_compare(config, out_dir, manifest, args.log_a, args.log_b)
        finally:
            manifest.write(out_dir)
    except SimulationError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return e.exit_code
    logger.info(f"{args.command} finished, outputs in {out_dir}")
    return 0
