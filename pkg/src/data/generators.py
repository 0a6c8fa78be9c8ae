"""
Synthetic benchmark systems.

All generators are pure functions of their arguments and the seed.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np

from src.autodiff import ops
from src.model.trajectory import Trajectory
from src.utils.errors import ContractViolation
from src.utils.logger import get_logger
from .dataset import Dataset

logger = get_logger()

KINK_PROCESS_VAR = 0.01
KINK_OBS_VAR = 0.1
LORENZ_PROCESS_VAR = 0.0015
LORENZ_OBS_VAR = 0.1
LORENZ_SIGMA, LORENZ_RHO, LORENZ_BETA = 10.0, 28.0, 8.0 / 3.0
LORENZ_TAYLOR_ORDER = 5


def kink_function(x: Any) -> np.ndarray:
    """f(x) = 0.8 + (x + 0.2) (1 - 5 / (1 + exp(-2x)))."""
    x = np.asarray(x, dtype=np.float64)
    return 0.8 + (x + 0.2) * (1.0 - 5.0 / (1.0 + np.exp(-2.0 * x)))


def kink_step_function(x: Any) -> np.ndarray:
    """x + 1 on x < 3 and 4 <= x < 5; 0 on 3 <= x < 4; 16 - 2x on x >= 5."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(
        x < 3.0, x + 1.0,
        np.where(x < 4.0, 0.0, np.where(x < 5.0, x + 1.0, 16.0 - 2.0 * x)),
    )


def lorenz_matrix(x: Any) -> np.ndarray:
    """A(x) with dx/dt = A(x) x for Lorenz-63."""
    x1 = float(np.asarray(x)[0])
    return np.array([
        [-LORENZ_SIGMA, LORENZ_SIGMA, 0.0],
        [LORENZ_RHO, -1.0, -x1],
        [0.0, x1, -LORENZ_BETA],
    ])


def _lorenz_matvec(x: Any, v: Any):
    """A(x) v, written with ops so it also runs on tape variables."""
    x1 = ops.getitem(x, 0)
    v1, v2, v3 = (ops.getitem(v, i) for i in range(3))
    return ops.stack([
        ops.mul(LORENZ_SIGMA, ops.sub(v2, v1)),
        ops.sub(ops.sub(ops.mul(LORENZ_RHO, v1), v2), ops.mul(x1, v3)),
        ops.sub(ops.mul(x1, v2), ops.mul(LORENZ_BETA, v3)),
    ])


def lorenz_transition(x: Any, dt: float = 0.02, order: int = LORENZ_TAYLOR_ORDER):
    """
    x_{t+1} = F(x_t) x_t with F = sum_{j=0}^{order} (A(x_t) dt)^j / j!.

    Accepts a numpy 3-vector or a tape variable (for EKF Jacobians).
    """
    if not ops.is_tracked(x):
        x = np.asarray(x, dtype=np.float64)
    out = x
    term = x
    for j in range(1, order + 1):
        term = ops.mul(_lorenz_matvec(x, term), dt / j)
        out = ops.add(out, term)
    return out


def _simulate(step, x0: np.ndarray, T: int, process_var: float, obs_var: float, rng: np.random.Generator) -> Trajectory:
    d = x0.shape[0]
    states = [x0]
    observations = []
    for _ in range(T):
        x = step(states[-1]) + np.sqrt(process_var) * rng.standard_normal(d)
        states.append(x)
        observations.append(x + np.sqrt(obs_var) * rng.standard_normal(d))
    return Trajectory(states=np.array(states), observations=np.array(observations))


def _check(num_seq: int, T: int) -> None:
    if num_seq < 1 or T < 1:
        raise ContractViolation("num_seq and T must be at least 1")


def gen_kink(num_seq: int = 30, T: int = 20, seed: int = 0, x0_range: tuple = (-3.0, 1.0)) -> Dataset:
    """
    Kink-function sequences: x_{t+1} = f(x_t) + N(0, 0.01), y_t = x_t + N(0, 0.1).

    Initial states are uniform over ``x0_range``.
    """
    _check(num_seq, T)
    rng = np.random.default_rng(seed)
    sequences = []
    for _ in range(num_seq):
        x0 = rng.uniform(*x0_range, size=1)
        sequences.append(_simulate(kink_function, x0, T, KINK_PROCESS_VAR, KINK_OBS_VAR, rng))
    metadata = {"generator": "kink", "seed": seed, "num_seq": num_seq, "T": T,
                "process_var": KINK_PROCESS_VAR, "obs_var": KINK_OBS_VAR, "x0_range": list(x0_range)}
    return Dataset(sequences, name="kink", metadata=metadata)


def gen_kink_step(num_seq: int = 30, T: int = 20, seed: int = 0, x0_range: tuple = (0.0, 6.0)) -> Dataset:
    """Kink-step sequences with the same noise levels as the kink data; x0 ~ U[0, 6]."""
    _check(num_seq, T)
    rng = np.random.default_rng(seed)
    sequences = []
    for _ in range(num_seq):
        x0 = rng.uniform(*x0_range, size=1)
        sequences.append(_simulate(kink_step_function, x0, T, KINK_PROCESS_VAR, KINK_OBS_VAR, rng))
    metadata = {"generator": "kink_step", "seed": seed, "num_seq": num_seq, "T": T,
                "process_var": KINK_PROCESS_VAR, "obs_var": KINK_OBS_VAR, "x0_range": list(x0_range)}
    return Dataset(sequences, name="kink_step", metadata=metadata)


def gen_lorenz(
    T: int = 2000,
    dt: float = 0.02,
    seed: int = 0,
    x0: Optional[Any] = None,
    process_var: float = LORENZ_PROCESS_VAR,
    obs_var: float = LORENZ_OBS_VAR
) -> Dataset:
    """
    One Lorenz-63 sequence: x_{t+1} = F(x_t) x_t + N(0, 0.0015 I), y_t = x_t + N(0, 0.1 I).

    Args:
        T: Number of steps
        dt: Discretisation step
        seed: Noise seed
        x0: Initial state (default [1, 1, 1])
        process_var: Process-noise variance (0 for a deterministic rollout)
        obs_var: Observation-noise variance
    """
    _check(1, T)
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    rng = np.random.default_rng(seed)
    x0 = np.ones(3) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(3)
    sequence = _simulate(lambda x: lorenz_transition(x, dt), x0, T, process_var, obs_var, rng)
    metadata = {"generator": "lorenz", "seed": seed, "T": T, "dt": dt,
                "process_var": process_var, "obs_var": obs_var, "taylor_order": LORENZ_TAYLOR_ORDER}
    return Dataset([sequence], name="lorenz", metadata=metadata)
