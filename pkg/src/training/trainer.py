"""
Joint (JO) and constrained (CO) optimisation of the ELBO.

One epoch evaluates the five terms on every length group of the data
with a single gradient tape (kl_u counted once), then takes one Adam
step on all trainable parameters of the model and the variational state.

    JO:  minimise  -(data + state + entropy - w (kl_x0 + kl_u))
    CO:  minimise  -ELBO + beta (R0 - data), beta updated from a
         moving average of the data term before each step
"""

from __future__ import annotations

import math
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.autodiff import AdamState, adam_step, evaluate_with_gradients, ops
from src.data.dataset import Dataset
from src.inference.elbo import TERM_NAMES, breakdown_from_terms, combine_terms, elbo_terms
from src.inference.network import VariationalState
from src.inference.variational import ElboNoise
from src.model.ssm import TgpssmModel
from src.schema.models import ElboBreakdown, TrainConfig
from src.utils.errors import ContractViolation, NumericError, TermEvaluationError, TrainingAbortedError
from src.utils.logger import format_parameters, get_logger, log_epoch, log_training_summary
from .lagrange import LagrangeState, moving_average, r0_from_gaussian_fit, update_beta
from .log import TrainingLog

logger = get_logger()

MODEL_PREFIX = "model."
VS_PREFIX = "vs."


class TrainingResult:
    """
    Outcome of a training run.

    Attributes:
        model: Trained TGPSSM (numpy parameters)
        vs: Trained variational state
        log: TrainingLog with one record per epoch
        lagrange: Final LagrangeState (CO runs only)
        r0: Reconstruction target used (CO runs only)
        optimizer: Final AdamState
        seconds: Wall-clock time
    """

    def __init__(
        self,
        model: TgpssmModel,
        vs: VariationalState,
        log: TrainingLog,
        mode: str,
        optimizer: AdamState,
        lagrange: Optional[LagrangeState] = None,
        r0: Optional[float] = None,
        seconds: float = 0.0
    ):
        self.model = model
        self.vs = vs
        self.log = log
        self.mode = mode
        self.optimizer = optimizer
        self.lagrange = lagrange
        self.r0 = r0
        self.seconds = seconds

    @property
    def epochs(self) -> int:
        return len(self.log)

    @property
    def final(self) -> Optional[Dict[str, Any]]:
        return self.log.records[-1] if self.log.records else None

    def beta_trace(self) -> List[float]:
        return [record["beta"] for record in self.log.records]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epochs": self.epochs,
            "final": self.final,
            "lagrange": None if self.lagrange is None else self.lagrange.to_dict(),
            "r0": self.r0,
            "optimizer": self.optimizer.to_dict(),
            "seconds": self.seconds,
            "log_path": None if self.log.path is None else str(self.log.path),
        }


def joint_parameters(model: TgpssmModel, vs: VariationalState) -> Dict[str, np.ndarray]:
    """Trainable parameters of both components, prefixed 'model.' and 'vs.'."""
    params = model.parameter_values(MODEL_PREFIX, trainable_only=True)
    params.update(vs.parameter_values(VS_PREFIX, trainable_only=True))
    return params


def bind_joint(model: TgpssmModel, vs: VariationalState, values: Dict[str, Any]) -> Tuple[TgpssmModel, VariationalState]:
    return model.bind(values, MODEL_PREFIX), vs.bind(values, VS_PREFIX)


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Independent stream per (seed, epoch)."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch]))


def draw_epoch_noise(groups: list, state_dim: int, rng: np.random.Generator, num_samples: int) -> List[ElboNoise]:
    return [ElboNoise.draw(rng, y.shape[0], y.shape[1], state_dim, num_samples) for y, _, _ in groups]


def evaluate_dataset_terms(
    model: TgpssmModel,
    vs: VariationalState,
    groups: list,
    noises: List[ElboNoise]
) -> Dict[str, Any]:
    """
    Five ELBO terms summed over all length groups, kl_u counted once.

    Works on tape variables or plain arrays alike.
    """
    try:
        factors = model.gp.prior_factors()
    except NumericError as exc:
        raise TermEvaluationError("kl_u", exc) from exc
    totals: Dict[str, Any] = {name: 0.0 for name in TERM_NAMES}
    for index, ((y, controls, _), noise) in enumerate(zip(groups, noises)):
        terms = elbo_terms(model, vs, y, noise, controls, include_kl_u=(index == 0), factors=factors)
        for name in TERM_NAMES:
            totals[name] = ops.add(totals[name], terms[name])
    return totals


def _non_finite_term(terms: Dict[str, Any]) -> Optional[str]:
    for name in TERM_NAMES:
        if not np.isfinite(float(ops.value_of(terms[name]))):
            return name
    return None


def _mean_length(dataset: Dataset) -> float:
    return float(np.mean([seq.length for seq in dataset.sequences]))


def _check_inputs(model: TgpssmModel, vs: VariationalState, dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise ContractViolation("training needs at least one sequence")
    if dataset.obs_dim != model.obs_dim:
        raise ContractViolation(f"data have d_y = {dataset.obs_dim}, model expects {model.obs_dim}")
    if dataset.control_dim != model.control_dim:
        raise ContractViolation(f"data have d_u = {dataset.control_dim}, model expects {model.control_dim}")
    if vs.state_dim != model.state_dim:
        raise ContractViolation("variational state and model disagree on d_x")


def _train(
    model: TgpssmModel,
    vs: VariationalState,
    dataset: Dataset,
    cfg: TrainConfig,
    log_path: Optional[Union[str, Path]],
    constrained: bool
) -> TrainingResult:
    _check_inputs(model, vs, dataset)
    groups = dataset.groups()
    log = TrainingLog(log_path)
    optimizer = AdamState(learning_rate=cfg.learning_rate, group_learning_rates=cfg.group_learning_rates)
    params = joint_parameters(model, vs)

    kl_weight = 1.0
    lagrange: Optional[LagrangeState] = None
    r0: Optional[float] = None
    if constrained:
        r0 = cfg.r0 if cfg.r0 is not None else r0_from_gaussian_fit([seq.observations for seq in dataset.sequences])
        lagrange = LagrangeState(beta=cfg.beta_init)
        logger.info(f"Constrained training: R0={r0:.4f}, alpha={cfg.alpha}, eta={cfg.eta}")
    else:
        kl_weight = cfg.resolved_kl_weight(round(_mean_length(dataset)))
        logger.info(f"Joint training: kl_weight={kl_weight:.4g}")

    start = time.time()
    for epoch in range(cfg.epochs):
        noises = draw_epoch_noise(groups, model.state_dim, epoch_rng(cfg.seed, epoch), cfg.num_mc_samples)
        captured: Dict[str, Any] = {}

        def objective(variables):
            m, v = bind_joint(model, vs, variables)
            terms = evaluate_dataset_terms(m, v, groups, noises)
            captured["terms"] = terms
            loss = ops.neg(combine_terms(terms, kl_weight))
            if constrained and math.isfinite(r0):
                # multiplier from the pre-step reconstruction estimate
                r_batch = float(ops.value_of(terms["data_recon"]))
                if np.isfinite(r_batch):
                    r_hat = moving_average(lagrange.r_hat, r_batch, cfg.alpha)
                    captured["lagrange"] = update_beta(lagrange, r_hat, r0, cfg.eta)
                    penalty = ops.sub(r0, terms["data_recon"])
                    loss = ops.add(loss, ops.mul(captured["lagrange"].beta, penalty))
            return loss

        try:
            value, grads = evaluate_with_gradients(objective, params)
        except TermEvaluationError as exc:
            raise TrainingAbortedError(epoch, exc.term, exc, str(log.path) if log.path else None) from exc
        except NumericError as exc:
            raise TrainingAbortedError(epoch, None, exc, str(log.path) if log.path else None) from exc

        terms = captured["terms"]
        bad_term = _non_finite_term(terms)
        bad_grads = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
        if bad_term or not np.isfinite(value) or bad_grads:
            cause = NumericError(f"non-finite objective or gradient ({', '.join(bad_grads[:3]) or 'value'})")
            raise TrainingAbortedError(epoch, bad_term, cause, str(log.path) if log.path else None)

        if constrained:
            lagrange = captured.get("lagrange", lagrange)
        beta = lagrange.beta if constrained and math.isfinite(r0) else (0.0 if constrained else kl_weight)

        breakdown: ElboBreakdown = breakdown_from_terms(terms)
        log.append(epoch, breakdown, beta)
        log_epoch(logger, epoch, breakdown, beta, cfg.log_every)

        params, optimizer = adam_step(optimizer, grads, params)

    model, vs = bind_joint(model, vs, params)
    logger.debug("Final model parameters:\n" + format_parameters(model.parameter_values()))
    seconds = time.time() - start
    final = breakdown_from_terms(captured["terms"]) if cfg.epochs else None
    log_training_summary(logger, cfg.mode, cfg.epochs, final, seconds)
    return TrainingResult(
        model=model.detached(),
        vs=vs.detached(),
        log=log,
        mode=cfg.mode,
        optimizer=optimizer,
        lagrange=lagrange,
        r0=r0,
        seconds=seconds,
    )


def train_joint(
    model: TgpssmModel,
    vs: VariationalState,
    data: Dataset,
    cfg: TrainConfig,
    log_path: Optional[Union[str, Path]] = None
) -> TrainingResult:
    """
    Maximise the ELBO directly, optionally with the KL terms scaled by
    ``cfg.kl_weight`` (e.g. 1/T).

    Args:
        model: Initial TGPSSM
        vs: Initial variational state
        data: Training sequences
        cfg: Training settings (joint mode)
        log_path: JSON-lines log file (kept in memory only if None)

    Raises:
        TrainingAbortedError: Numeric failure, with the epoch and the ELBO term
    """
    if cfg.mode != "joint":
        raise ContractViolation("train_joint needs a joint-mode TrainConfig")
    return _train(model, vs, data, cfg, log_path, constrained=False)


def train_constrained(
    model: TgpssmModel,
    vs: VariationalState,
    data: Dataset,
    cfg: TrainConfig,
    log_path: Optional[Union[str, Path]] = None
) -> TrainingResult:
    """
    Maximise the ELBO subject to a minimum data reconstruction R0.

    Each iteration estimates the data term, smooths it with a moving
    average, updates the multiplier and descends the Lagrangian. R0 = -inf
    turns the constraint off (beta logged as 0). R0 = None fits it from
    the data.
    """
    if cfg.mode != "constrained":
        raise ContractViolation("train_constrained needs a constrained-mode TrainConfig")
    return _train(model, vs, data, cfg, log_path, constrained=True)


def train(model: TgpssmModel, vs: VariationalState, data: Dataset, cfg: TrainConfig,
          log_path: Optional[Union[str, Path]] = None) -> TrainingResult:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "constrained":
        return train_constrained(model, vs, data, cfg, log_path)
    return train_joint(model, vs, data, cfg, log_path)
