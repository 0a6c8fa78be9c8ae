"""State/observation trajectories and their CSV form."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from src.utils.errors import ContractViolation, EmptyDatasetError, ParseError

# 17 significant digits round-trip every float64
FLOAT_FORMAT = "{:.17g}"


def _as_matrix(values: Any, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ContractViolation(f"{name} must be a matrix, got shape {array.shape}")
    return array


class Trajectory:
    """
    One sequence: states x_{0:T}, observations y_{1:T}, optional controls u_{1:T}
    and latent function values f_{1:T}, f~_{1:T}.

    Any of states/observations may be None (e.g. observed series without
    ground truth, or a state-only variational sample), but lengths of the
    fields that are present must agree.
    """

    def __init__(
        self,
        states: Optional[Any] = None,
        observations: Optional[Any] = None,
        controls: Optional[Any] = None,
        f: Optional[Any] = None,
        f_tilde: Optional[Any] = None
    ):
        self.states = None if states is None else _as_matrix(states, "states")
        self.observations = None if observations is None else _as_matrix(observations, "observations")
        self.controls = None if controls is None else _as_matrix(controls, "controls")
        self.f = None if f is None else _as_matrix(f, "f")
        self.f_tilde = None if f_tilde is None else _as_matrix(f_tilde, "f_tilde")
        self._validate()

    def _validate(self) -> None:
        if self.states is None and self.observations is None:
            raise ContractViolation("a trajectory needs states or observations")
        T = self.length
        if T < 1:
            raise ContractViolation("a trajectory needs at least one step")
        if self.states is not None and self.states.shape[0] != T + 1:
            raise ContractViolation(f"expected {T + 1} states, got {self.states.shape[0]}")
        for name in ("observations", "controls", "f", "f_tilde"):
            value = getattr(self, name)
            if value is not None and value.shape[0] != T:
                raise ContractViolation(f"expected {T} rows of {name}, got {value.shape[0]}")

    @property
    def length(self) -> int:
        """Number of steps T."""
        if self.observations is not None:
            return int(self.observations.shape[0])
        return int(self.states.shape[0]) - 1

    @property
    def state_dim(self) -> Optional[int]:
        return None if self.states is None else int(self.states.shape[1])

    @property
    def obs_dim(self) -> Optional[int]:
        return None if self.observations is None else int(self.observations.shape[1])

    @property
    def control_dim(self) -> int:
        return 0 if self.controls is None else int(self.controls.shape[1])

    def to_dict(self) -> Dict[str, Any]:
        out = {"length": self.length}
        for name in ("states", "observations", "controls", "f", "f_tilde"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value.tolist()
        return out

    def __repr__(self) -> str:
        return f"Trajectory(T={self.length}, d_x={self.state_dim}, d_y={self.obs_dim}, d_u={self.control_dim})"


def write_trajectory_csv(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """
    Write columns t, x_1..x_dx, y_1..y_dy (and u_1..u_du if present).

    Row t = 0 carries x_0 and leaves the y/u cells empty.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    T = trajectory.length
    d_x = trajectory.state_dim or 0
    d_y = trajectory.obs_dim or 0
    d_u = trajectory.control_dim
    header = ["t"] + [f"x_{i + 1}" for i in range(d_x)] + [f"y_{i + 1}" for i in range(d_y)] + [f"u_{i + 1}" for i in range(d_u)]

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for t in range(T + 1):
            row = [str(t)]
            if d_x:
                row += [FLOAT_FORMAT.format(v) for v in trajectory.states[t]]
            for block, width in ((trajectory.observations, d_y), (trajectory.controls, d_u)):
                if width:
                    row += [""] * width if t == 0 else [FLOAT_FORMAT.format(v) for v in block[t - 1]]
            writer.writerow(row)
    return path


def read_trajectory_csv(path: Union[str, Path]) -> Trajectory:
    """Read a file written by ``write_trajectory_csv``."""
    path = Path(path)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise EmptyDatasetError(f"{path} is empty", line_number=1)
    header = rows[0]
    body = rows[1:]
    if len(body) < 2:
        raise EmptyDatasetError(f"{path} holds no trajectory steps", line_number=len(rows))

    def columns(prefix: str):
        return [i for i, name in enumerate(header) if name.startswith(prefix)]

    x_cols, y_cols, u_cols = columns("x_"), columns("y_"), columns("u_")
    states, observations, controls = [], [], []
    for offset, row in enumerate(body):
        line = offset + 2
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", line_number=line)
        try:
            if x_cols:
                states.append([float(row[i]) for i in x_cols])
            if offset > 0:
                if y_cols:
                    observations.append([float(row[i]) for i in y_cols])
                if u_cols:
                    controls.append([float(row[i]) for i in u_cols])
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", line_number=line) from exc

    return Trajectory(
        states=states or None,
        observations=observations or None,
        controls=controls or None,
    )
