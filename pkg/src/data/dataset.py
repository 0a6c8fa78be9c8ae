"""
Dataset container and preprocessing: standardisation, train/test split, chunking.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.model.trajectory import Trajectory
from src.utils.errors import ContractViolation, EmptyDatasetError


class StandardizationStats:
    """Per-channel mean and std of observations (and controls) on the training split."""

    def __init__(
        self,
        mean: Any,
        std: Any,
        control_mean: Optional[Any] = None,
        control_std: Optional[Any] = None
    ):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.control_mean = None if control_mean is None else np.asarray(control_mean, dtype=np.float64)
        self.control_std = None if control_std is None else np.asarray(control_std, dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        out = {"mean": self.mean.tolist(), "std": self.std.tolist()}
        if self.control_mean is not None:
            out["control_mean"] = self.control_mean.tolist()
            out["control_std"] = self.control_std.tolist()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StandardizationStats":
        return cls(data["mean"], data["std"], data.get("control_mean"), data.get("control_std"))


class Dataset:
    """
    An ordered collection of trajectories plus provenance.

    Attributes:
        sequences: List of Trajectory (observations always present)
        name: Short identifier used in logs and file names
        stats: StandardizationStats if the data were standardised
        metadata: Generator parameters, seed, source path, ...
    """

    def __init__(
        self,
        sequences: List[Trajectory],
        name: str = "dataset",
        stats: Optional[StandardizationStats] = None,
        metadata: Optional[Dict[str, Any]] = None
    ):
        if not sequences:
            raise EmptyDatasetError(f"dataset '{name}' has no sequences")
        if any(seq.observations is None for seq in sequences):
            raise ContractViolation("every sequence in a dataset needs observations")
        obs_dims = {seq.obs_dim for seq in sequences}
        control_dims = {seq.control_dim for seq in sequences}
        if len(obs_dims) != 1 or len(control_dims) != 1:
            raise ContractViolation("sequences disagree on observation or control dimension")
        self.sequences = list(sequences)
        self.name = name
        self.stats = stats
        self.metadata = dict(metadata or {})

    @property
    def obs_dim(self) -> int:
        return self.sequences[0].obs_dim

    @property
    def control_dim(self) -> int:
        return self.sequences[0].control_dim

    @property
    def has_states(self) -> bool:
        return all(seq.states is not None for seq in self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def groups(self) -> List[Tuple[np.ndarray, Optional[np.ndarray], List[int]]]:
        """
        Batch sequences of equal length.

        Returns:
            List of (y B x T x d_y, controls B x T x d_u or None, indices),
            ordered by first appearance
        """
        by_length: Dict[int, List[int]] = {}
        for index, seq in enumerate(self.sequences):
            by_length.setdefault(seq.length, []).append(index)
        out = []
        for indices in by_length.values():
            y = np.stack([self.sequences[i].observations for i in indices])
            controls = None
            if self.control_dim:
                controls = np.stack([self.sequences[i].controls for i in indices])
            out.append((y, controls, indices))
        return out

    def __repr__(self) -> str:
        return f"Dataset(name={self.name!r}, sequences={len(self)}, d_y={self.obs_dim})"


def _scale(values: Optional[np.ndarray], mean: np.ndarray, std: np.ndarray) -> Optional[np.ndarray]:
    return None if values is None else (values - mean) / std


def standardize(dataset: Dataset, stats: Optional[StandardizationStats] = None) -> Dataset:
    """
    Scale observations (and controls) to zero mean and unit variance.

    Statistics are computed over every observation in ``dataset`` unless
    ``stats`` is given (e.g. the training statistics applied to a test
    split). States are mapped with the observation statistics when
    d_x == d_y, since C = I then puts them in observation units.

    Raises:
        ContractViolation: A channel is constant (std = 0)
    """
    if stats is None:
        y = np.concatenate([seq.observations for seq in dataset.sequences])
        std = y.std(axis=0)
        control_mean = control_std = None
        if dataset.control_dim:
            u = np.concatenate([seq.controls for seq in dataset.sequences])
            control_mean, control_std = u.mean(axis=0), u.std(axis=0)
            if np.any(control_std == 0):
                raise ContractViolation(f"constant control channel(s) {np.flatnonzero(control_std == 0).tolist()}")
        if np.any(std == 0):
            raise ContractViolation(f"constant observation channel(s) {np.flatnonzero(std == 0).tolist()}")
        stats = StandardizationStats(y.mean(axis=0), std, control_mean, control_std)

    sequences = []
    for seq in dataset.sequences:
        states = seq.states
        if states is not None and seq.state_dim == seq.obs_dim:
            states = _scale(states, stats.mean, stats.std)
        controls = seq.controls
        if controls is not None and stats.control_mean is not None:
            controls = _scale(controls, stats.control_mean, stats.control_std)
        sequences.append(Trajectory(
            states=states,
            observations=_scale(seq.observations, stats.mean, stats.std),
            controls=controls,
        ))
    return Dataset(sequences, name=dataset.name, stats=stats, metadata=dataset.metadata)


def destandardize(values: Any, stats: Optional[StandardizationStats]) -> np.ndarray:
    """Map observation-space values back to original units."""
    values = np.asarray(values, dtype=np.float64)
    if stats is None:
        return values
    return values * stats.std + stats.mean


def split_train_test(dataset: Dataset, test_length: int) -> Tuple[Dataset, Optional[Dataset]]:
    """
    Hold out the last ``test_length`` observations of every sequence.

    The test trajectories keep the matching states (starting from the last
    training state) so forecasts can be compared with ground truth.
    """
    if test_length == 0:
        return dataset, None
    train, test = [], []
    for seq in dataset.sequences:
        T = seq.length
        if test_length >= T:
            raise ContractViolation(f"test_length {test_length} leaves no training data in a sequence of length {T}")
        cut = T - test_length
        train.append(Trajectory(
            states=None if seq.states is None else seq.states[:cut + 1],
            observations=seq.observations[:cut],
            controls=None if seq.controls is None else seq.controls[:cut],
        ))
        test.append(Trajectory(
            states=None if seq.states is None else seq.states[cut:],
            observations=seq.observations[cut:],
            controls=None if seq.controls is None else seq.controls[cut:],
        ))
    metadata = dict(dataset.metadata, test_length=test_length)
    return (
        Dataset(train, name=dataset.name, stats=dataset.stats, metadata=metadata),
        Dataset(test, name=f"{dataset.name}_test", stats=dataset.stats, metadata=metadata),
    )


def chunk_dataset(dataset: Dataset, chunk_length: int) -> Dataset:
    """Cut every sequence into consecutive chunks of ``chunk_length`` steps; a shorter tail is dropped."""
    if chunk_length < 1:
        raise ContractViolation("chunk_length must be at least 1")
    chunks = []
    for seq in dataset.sequences:
        for start in range(0, seq.length - chunk_length + 1, chunk_length):
            stop = start + chunk_length
            chunks.append(Trajectory(
                states=None if seq.states is None else seq.states[start:stop + 1],
                observations=seq.observations[start:stop],
                controls=None if seq.controls is None else seq.controls[start:stop],
            ))
    if not chunks:
        raise EmptyDatasetError(f"no sequence is at least {chunk_length} steps long")
    metadata = dict(dataset.metadata, chunk_length=chunk_length)
    return Dataset(chunks, name=dataset.name, stats=dataset.stats, metadata=metadata)
