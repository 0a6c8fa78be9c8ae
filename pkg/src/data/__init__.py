"""Benchmark generators, dataset preprocessing and CSV I/O."""

from .dataset import (
    Dataset, StandardizationStats, standardize, destandardize, split_train_test, chunk_dataset,
)
from .generators import (
    LORENZ_OBS_VAR, LORENZ_PROCESS_VAR, kink_function, kink_step_function, lorenz_matrix, lorenz_transition,
    gen_kink, gen_kink_step, gen_lorenz,
)
from .io import ingest_csv, export_dataset, load_exported_dataset
from .preparation import DEFAULT_GRIDS, PreparedData, build_dataset, prepare_dataset

__all__ = [
    'Dataset', 'StandardizationStats', 'standardize', 'destandardize', 'split_train_test', 'chunk_dataset',
    'LORENZ_OBS_VAR', 'LORENZ_PROCESS_VAR', 'kink_function', 'kink_step_function', 'lorenz_matrix', 'lorenz_transition',
    'gen_kink', 'gen_kink_step', 'gen_lorenz',
    'ingest_csv', 'export_dataset', 'load_exported_dataset',
    'DEFAULT_GRIDS', 'PreparedData', 'build_dataset', 'prepare_dataset',
]
