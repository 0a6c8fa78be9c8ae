"""Logging utilities for training, sampling and evaluation runs."""

import os
import logging
import json
from typing import Optional, Any, Mapping

# Global debug mode flag
DEBUG_MODE = os.getenv("TGPSSM_DEBUG", "false").lower() == "true"

# Logger instance
_logger: Optional[logging.Logger] = None


def setup_logger(level: int = logging.INFO, debug_mode: bool = None) -> logging.Logger:
    """
    Set up the project logger.

    Args:
        level: Logging level (default: INFO)
        debug_mode: Override debug mode (default: from TGPSSM_DEBUG env var)

    Returns:
        Configured logger instance
    """
    global _logger, DEBUG_MODE

    if debug_mode is not None:
        DEBUG_MODE = debug_mode

    if _logger is None:
        _logger = logging.getLogger("tgpssm")

        handler = logging.StreamHandler()
        _logger.addHandler(handler)

        # Prevent duplicate logs
        _logger.propagate = False

    effective = logging.DEBUG if DEBUG_MODE else level
    _logger.setLevel(effective)
    for handler in _logger.handlers:
        handler.setLevel(effective)
        if DEBUG_MODE:
            handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
        else:
            handler.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))

    return _logger


def get_logger() -> logging.Logger:
    """Get the global logger instance."""
    if _logger is None:
        return setup_logger()
    return _logger


def log_run_config(logger: logging.Logger, config: Any):
    """
    Log the resolved run configuration.

    Args:
        logger: Logger instance
        config: RunConfig (pydantic model)
    """
    logger.info("=" * 60)
    logger.info(f"RUN: {config.name}")
    logger.info("=" * 60)
    logger.info(f"Dataset: {config.dataset.generator or config.dataset.csv_path} (seed={config.dataset.seed})")
    logger.info(f"Model: d_x={config.model.state_dim}, M={config.model.num_inducing}, "
                f"flow layers={len(config.model.flow or [])}")
    logger.info(f"Trainer: mode={config.trainer.mode}, epochs={config.trainer.epochs}, "
                f"lr={config.trainer.learning_rate}")

    if DEBUG_MODE:
        logger.debug("Resolved configuration:")
        logger.debug(json.dumps(config.model_dump(mode="json"), indent=2))


def log_dataset_summary(logger: logging.Logger, dataset: Any):
    """
    Log a short summary of a dataset.

    Args:
        logger: Logger instance
        dataset: Dataset object
    """
    lengths = sorted({seq.length for seq in dataset.sequences})
    logger.info(f"Dataset '{dataset.name}': {len(dataset.sequences)} sequence(s), "
                f"lengths={lengths}, d_y={dataset.obs_dim}")
    if dataset.stats is not None:
        logger.debug(f"  standardization mean={dataset.stats.mean}, std={dataset.stats.std}")


def log_epoch(logger: logging.Logger, epoch: int, breakdown: Any, beta: float, log_every: int = 100):
    """
    Log one epoch of training.

    Args:
        logger: Logger instance
        epoch: Epoch index (0-based)
        breakdown: ElboBreakdown of the epoch
        beta: Current KL weight or Lagrange multiplier
        log_every: INFO-level logging period
    """
    message = (f"epoch {epoch:5d}  elbo={breakdown.total:12.4f}  "
               f"data={breakdown.data_recon:10.4f}  state={breakdown.state_recon:10.4f}  "
               f"ent={breakdown.entropy:9.4f}  kl_x0={breakdown.kl_x0:8.4f}  "
               f"kl_u={breakdown.kl_u:8.4f}  beta={beta:.4g}")
    if epoch % max(log_every, 1) == 0:
        logger.info(message)
    else:
        logger.debug(message)


def log_training_summary(logger: logging.Logger, mode: str, epochs: int, final: Any, seconds: float):
    """
    Log the end of a training run.

    Args:
        logger: Logger instance
        mode: "joint" or "constrained"
        epochs: Number of epochs run
        final: Final ElboBreakdown (or None when no epoch ran)
        seconds: Wall-clock time
    """
    logger.info("=" * 60)
    logger.info(f"TRAINING COMPLETE ({mode})")
    logger.info("=" * 60)
    logger.info(f"Epochs: {epochs}")
    if final is not None:
        logger.info(f"Final ELBO: {final.total:.4f}")
    logger.info(f"Training time: {seconds:.2f}s")
    logger.info("=" * 60)


def log_metric_report(logger: logging.Logger, report: Any):
    """
    Log a metric report.

    Args:
        logger: Logger instance
        report: MetricReport object
    """
    if report.per_seed_values and len(report.per_seed_values) > 1:
        logger.info(f"  {report.name:25s}: {report.mean:.6f} +/- {report.std:.6f} "
                    f"({len(report.per_seed_values)} seeds)")
    else:
        logger.info(f"  {report.name:25s}: {report.value:.6f}")


def format_parameters(values: Mapping[str, Any], limit: int = 8) -> str:
    """
    Format a few parameter arrays for debug output.

    Args:
        values: Mapping of parameter name to array
        limit: Maximum number of entries shown per array

    Returns:
        Multi-line string
    """
    lines = []
    for name, value in values.items():
        flat = list(getattr(value, "ravel", lambda: [value])())
        shown = ", ".join(f"{v:.4g}" for v in flat[:limit])
        suffix = ", ..." if len(flat) > limit else ""
        lines.append(f"    {name}: [{shown}{suffix}]")
    return "\n".join(lines)
