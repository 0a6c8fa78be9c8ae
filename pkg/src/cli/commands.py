"""
Command-line entry point.

Subcommands: train, sample-prior, evaluate, generate-data, filter-ekf.
Exit codes: 0 success, 2 bad input (config, parse, validation, missing
file), 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.data import (
    LORENZ_OBS_VAR, LORENZ_PROCESS_VAR,
    export_dataset, gen_kink, gen_kink_step, gen_lorenz, load_exported_dataset, lorenz_transition,
)
from src.evaluation import ekf, observation_mse, write_reports
from src.model import Trajectory, sample_prior_exact, sample_prior_sparse, write_trajectory_csv
from src.pipeline import ExperimentPipeline, build_components, restore_components
from src.schema import MetricReport, RunConfig, dump_run_config, load_run_config, output_root, run_directory
from src.utils.errors import (
    ConfigurationError, ContractViolation, FlowDomainError, InversionError, NumericError, ParseError,
)
from src.utils.logger import get_logger, log_metric_report, setup_logger

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3

SUMMARY_NAME = "metrics_summary.json"
# Metrics where lower is better report the best seed as headline
LOWER_IS_BETTER = {"transition_mse", "forecast_rmse", "state_mse", "observation_mse"}


def _parse_overrides(pairs: Optional[Sequence[str]]) -> Dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"override '{pair}' must look like key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def _parse_seeds(text: Optional[str]) -> Optional[List[int]]:
    if not text:
        return None
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"--seeds must be comma-separated integers, got '{text}'") from exc
    if not seeds:
        raise ConfigurationError("--seeds is empty")
    return seeds


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides = _parse_overrides(args.set)
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = args.output_dir
    return load_run_config(args.config, overrides)


def _seeded(config: RunConfig, seed: int) -> RunConfig:
    """Copy of ``config`` for one seed with its own artifact directory."""
    base = run_directory(config)
    return config.model_copy(update={
        "seed": seed,
        "trainer": config.trainer.model_copy(update={"seed": seed}),
        "output_dir": str(base / f"seed{seed}"),
    })


def _run_one(payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    Worker entry: train and evaluate one resolved config.

    Failures come back as {"error": kind, "message": ...} so they cross the
    process boundary without pickling exception objects.
    """
    setup_logger(debug_mode=payload.get("debug"))
    try:
        config = RunConfig.model_validate(payload["config"])
        return ExperimentPipeline(config).run().to_dict()
    except (NumericError, FlowDomainError, InversionError) as exc:
        return {"error": "numeric", "message": str(exc)}
    except (ValidationError, ConfigurationError, ParseError, ContractViolation, FileNotFoundError) as exc:
        return {"error": "input", "message": str(exc)}


def _raise_failures(results: List[Dict[str, Any]]) -> None:
    for result in results:
        if result.get("error") == "numeric":
            raise NumericError(result["message"])
        if result.get("error") == "input":
            raise ConfigurationError(result["message"])


def _aggregate(results: List[Dict[str, Any]], fingerprint: str) -> List[MetricReport]:
    names = sorted({name for result in results for name in result["metrics"]})
    reports = []
    for name in names:
        values = [result["metrics"][name] for result in results if name in result["metrics"]]
        headline = "min" if name in LOWER_IS_BETTER else "mean"
        reports.append(MetricReport.from_values(name, values, fingerprint, headline=headline,
                                                details={"seeds": [r["metadata"]["seed"] for r in results]}))
    return reports


def cmd_train(args: argparse.Namespace) -> int:
    logger = get_logger()
    config = _load_config(args)
    seeds = _parse_seeds(args.seeds)

    if not seeds:
        result = ExperimentPipeline(config).run()
        reports = [MetricReport.from_values(name, [value], config.fingerprint())
                   for name, value in result.metrics.items()]
        write_reports(reports, run_directory(config) / SUMMARY_NAME)
        return EXIT_OK

    configs = [_seeded(config, seed) for seed in seeds]
    dump_run_config(config, run_directory(config))
    payloads = [{"config": c.model_dump(mode="json"), "debug": args.debug or None} for c in configs]
    if len(payloads) == 1 or args.workers == 1:
        results = [_run_one(p) for p in payloads]
    else:
        workers = args.workers or min(len(payloads), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, payloads))
    _raise_failures(results)

    reports = _aggregate(results, config.fingerprint())
    logger.info(f"Metrics over seeds {seeds}:")
    for report in reports:
        log_metric_report(logger, report)
    write_reports(reports, run_directory(config) / SUMMARY_NAME)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    logger = get_logger()
    if args.checkpoint:
        config, model, vs, _ = restore_components(args.checkpoint)
        output_dir = Path(args.output_dir) if args.output_dir else Path(args.checkpoint).parent / "evaluation"
    elif args.config:
        config = _load_config(args)
        model, vs = build_components(config)
        output_dir = Path(args.output_dir) if args.output_dir else run_directory(config) / "prior_evaluation"
        logger.info("Evaluating the untrained model")
    else:
        raise ConfigurationError("evaluate needs --checkpoint or --config")

    pipeline = ExperimentPipeline(config, output_dir=output_dir)
    dump_run_config(config, output_dir)
    metrics, _ = pipeline.evaluate(model, vs)
    reports = [MetricReport.from_values(name, [value], config.fingerprint()) for name, value in metrics.items()]
    write_reports(reports, output_dir / SUMMARY_NAME)
    return EXIT_OK


def cmd_sample_prior(args: argparse.Namespace) -> int:
    logger = get_logger()
    if args.checkpoint:
        config, model, _, _ = restore_components(args.checkpoint)
        output_dir = Path(args.output_dir) if args.output_dir else Path(args.checkpoint).parent / "samples"
    elif args.config:
        if args.posterior:
            raise ConfigurationError("--posterior needs a trained --checkpoint")
        config = _load_config(args)
        model, _ = build_components(config)
        output_dir = Path(args.output_dir) if args.output_dir else run_directory(config) / "samples"
    else:
        raise ConfigurationError("sample-prior needs --checkpoint or --config")

    controls = np.zeros((args.length, model.control_dim)) if model.control_dim else None
    for index in range(args.num):
        seed = args.seed + index
        if args.exact:
            trajectory = sample_prior_exact(model, args.length, seed, controls=controls)
        else:
            trajectory = sample_prior_sparse(model, args.length, seed, from_posterior=args.posterior,
                                             controls=controls)
        write_trajectory_csv(trajectory, output_dir / f"sample_{index:03d}.csv")
    logger.info(f"Wrote {args.num} {'exact' if args.exact else 'sparse'} sample(s) of length {args.length} "
                f"to {output_dir}")
    return EXIT_OK


def cmd_generate_data(args: argparse.Namespace) -> int:
    if args.lorenz:
        dataset = gen_lorenz(T=args.length or 2000, dt=args.dt, seed=args.seed)
    elif args.kink_step:
        dataset = gen_kink_step(num_seq=args.num_seq, T=args.length or 20, seed=args.seed)
    else:
        dataset = gen_kink(num_seq=args.num_seq, T=args.length or 20, seed=args.seed)
    output_dir = Path(args.output_dir) if args.output_dir else output_root() / "data" / f"{dataset.name}_seed{args.seed}"
    export_dataset(dataset, output_dir)
    return EXIT_OK


def cmd_filter_ekf(args: argparse.Namespace) -> int:
    """EKF with the true Lorenz model on generated (or exported) data."""
    logger = get_logger()
    if args.data:
        dataset = load_exported_dataset(args.data)
        dt = float(dataset.metadata.get("dt", args.dt))
    else:
        dataset = gen_lorenz(T=args.length, dt=args.dt, seed=args.seed)
        dt = args.dt
    sequence: Trajectory = dataset.sequences[0]
    if sequence.states is None or sequence.state_dim != 3:
        raise ContractViolation("filter-ekf needs a Lorenz sequence with ground-truth states")

    Q = LORENZ_PROCESS_VAR * np.eye(3)
    R = LORENZ_OBS_VAR * np.eye(3)
    result = ekf(lambda x: lorenz_transition(x, dt), Q, R, np.eye(3), sequence.observations,
                 m0=sequence.states[0], P0=Q)

    output_dir = Path(args.output_dir) if args.output_dir else output_root() / "ekf" / f"lorenz_seed{args.seed}"
    filtered = Trajectory(states=np.vstack([sequence.states[:1], result.means]), observations=sequence.observations)
    write_trajectory_csv(filtered, output_dir / "filtered_states.csv")
    reports = [
        MetricReport.from_values("state_mse", [result.state_mse(sequence.states)]),
        MetricReport.from_values("observation_mse", [observation_mse(sequence.observations, sequence.states)]),
    ]
    write_reports(reports, output_dir / "ekf_metrics.json")
    for report in reports:
        log_metric_report(logger, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tgpssm", description="Transformed GP state-space models")
    parser.add_argument("--debug", action="store_true", help="Verbose, timestamped logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p: argparse.ArgumentParser, required: bool) -> None:
        p.add_argument("--config", required=required, help="YAML file or bundled preset name")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config value (dotted key)")
        p.add_argument("--output-dir", help="Artifact directory")

    train = sub.add_parser("train", help="Train and evaluate a model")
    add_config_args(train, required=True)
    train.add_argument("--seeds", help="Comma-separated seeds run as independent processes")
    train.add_argument("--workers", type=int, default=None, help="Parallel worker processes")
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser("evaluate", help="Compute metrics for a checkpoint (or an untrained config)")
    add_config_args(evaluate, required=False)
    evaluate.add_argument("--checkpoint", help="Checkpoint written by 'train'")
    evaluate.set_defaults(handler=cmd_evaluate)

    sample = sub.add_parser("sample-prior", help="Draw trajectories from the generative model")
    add_config_args(sample, required=False)
    sample.add_argument("--checkpoint", help="Sample a trained model")
    sample.add_argument("--length", type=int, default=20)
    sample.add_argument("--num", type=int, default=5)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--exact", action="store_true", help="Exact GP conditioning instead of inducing points")
    sample.add_argument("--posterior", action="store_true", help="Draw U from q(U) (trained checkpoints)")
    sample.set_defaults(handler=cmd_sample_prior)

    generate = sub.add_parser("generate-data", help="Write a synthetic benchmark dataset")
    which = generate.add_mutually_exclusive_group(required=True)
    which.add_argument("--kink", action="store_true")
    which.add_argument("--kink-step", action="store_true")
    which.add_argument("--lorenz", action="store_true")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--num-seq", type=int, default=30)
    generate.add_argument("--length", type=int, default=None, help="T (20 for kink data, 2000 for Lorenz)")
    generate.add_argument("--dt", type=float, default=0.02)
    generate.add_argument("--output-dir")
    generate.set_defaults(handler=cmd_generate_data)

    filt = sub.add_parser("filter-ekf", help="EKF baseline on Lorenz data with the true model")
    filt.add_argument("--data", help="Directory written by generate-data --lorenz")
    filt.add_argument("--seed", type=int, default=0)
    filt.add_argument("--length", type=int, default=2000)
    filt.add_argument("--dt", type=float, default=0.02)
    filt.add_argument("--output-dir")
    filt.set_defaults(handler=cmd_filter_ekf)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_BAD_INPUT
    logger = setup_logger(debug_mode=args.debug or None)

    try:
        return args.handler(args)
    except (NumericError, FlowDomainError, InversionError) as exc:
        logger.error(f"Numeric failure: {exc}")
        log_path = getattr(exc, "log_path", None)
        if log_path:
            logger.error(f"Training log kept at {log_path}")
        return EXIT_NUMERIC
    except ValidationError as exc:
        logger.error(f"Invalid configuration:\n{exc}")
        return EXIT_BAD_INPUT
    except (ConfigurationError, ParseError, ContractViolation, FileNotFoundError) as exc:
        logger.error(str(exc))
        return EXIT_BAD_INPUT


def main() -> None:
    raise SystemExit(run())
