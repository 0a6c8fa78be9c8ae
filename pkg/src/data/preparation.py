"""Turn a DatasetSpec into training (and forecasting) data."""

from __future__ import annotations

from typing import Optional

from src.schema.models import DatasetSpec
from src.utils.logger import get_logger, log_dataset_summary
from .dataset import Dataset, chunk_dataset, split_train_test, standardize
from .generators import gen_kink, gen_kink_step, gen_lorenz
from .io import ingest_csv

logger = get_logger()

# Transition-MSE grids: visited state range of each generator widened by 10%
DEFAULT_GRIDS = {
    "kink": (-3.2, 1.2),
    "kink_step": (-0.5, 6.5),
}


class PreparedData:
    """
    Result of preparing a dataset.

    Attributes:
        raw: Dataset as generated or ingested
        train: Training split (standardised and chunked if requested)
        test: Held-out tails (same scaling as train) or None
        history: Training split before chunking; forecasts start from its end
    """

    def __init__(self, raw: Dataset, train: Dataset, test: Optional[Dataset] = None,
                 history: Optional[Dataset] = None):
        self.raw = raw
        self.train = train
        self.test = test
        self.history = history if history is not None else train

    @property
    def stats(self):
        return self.train.stats


def build_dataset(spec: DatasetSpec) -> Dataset:
    """Generate or ingest the raw dataset."""
    if spec.generator == "kink":
        return gen_kink(num_seq=spec.num_sequences, T=spec.length, seed=spec.seed)
    if spec.generator == "kink_step":
        return gen_kink_step(num_seq=spec.num_sequences, T=spec.length, seed=spec.seed)
    if spec.generator == "lorenz":
        return gen_lorenz(T=spec.length, dt=spec.dt, seed=spec.seed)
    return ingest_csv(spec.csv_path, spec.columns)


def prepare_dataset(spec: DatasetSpec) -> PreparedData:
    """
    Build the dataset, hold out forecast tails, standardise with training
    statistics and chunk the training split.
    """
    raw = build_dataset(spec)
    train, test = split_train_test(raw, spec.test_length)
    if spec.standardize:
        train = standardize(train)
        if test is not None:
            test = standardize(test, stats=train.stats)
    history = train
    if spec.chunk_length is not None:
        train = chunk_dataset(train, spec.chunk_length)
    log_dataset_summary(logger, train)
    return PreparedData(raw=raw, train=train, test=test, history=history)
