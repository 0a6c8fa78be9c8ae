"""CSV ingestion and dataset export."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Union

import numpy as np

from src.model.trajectory import Trajectory, read_trajectory_csv, write_trajectory_csv
from src.schema.models import ColumnSchema
from src.utils.errors import EmptyDatasetError, ParseError
from src.utils.logger import get_logger
from .dataset import Dataset, StandardizationStats

logger = get_logger()

SIDECAR_NAME = "dataset.json"


def _parse_cells(row: List[str], indices: List[int], line: int) -> List[float]:
    try:
        return [float(row[i]) for i in indices]
    except ValueError as exc:
        raise ParseError(f"non-numeric cell ({exc})", line_number=line) from exc


def ingest_csv(path: Union[str, Path], schema: ColumnSchema) -> Dataset:
    """
    Read an observed series with optional control inputs.

    Rows whose observation cells are all empty carry no measurement (for
    example the x_0 row of an exported trajectory) and are skipped. When
    ``schema.sequence`` is set, rows are grouped into sequences by that
    column in order of first appearance.

    Args:
        path: CSV file with a header row
        schema: Column roles

    Returns:
        Dataset of observation-only trajectories

    Raises:
        ParseError: Missing column, ragged row or non-numeric cell (with line number)
        EmptyDatasetError: No data rows
    """
    path = Path(path)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise EmptyDatasetError(f"{path} is empty", line_number=1)

    header = [name.strip() for name in rows[0]]
    wanted = list(schema.observations) + list(schema.controls)
    wanted += [name for name in (schema.time, schema.sequence) if name]
    missing = [name for name in wanted if name not in header]
    if missing:
        raise ParseError(f"missing column(s) {missing} in {path}", line_number=1)

    y_idx = [header.index(name) for name in schema.observations]
    u_idx = [header.index(name) for name in schema.controls]
    seq_idx = header.index(schema.sequence) if schema.sequence else None

    groups = {}
    for offset, row in enumerate(rows[1:]):
        line = offset + 2
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", line_number=line)
        if all(row[i].strip() == "" for i in y_idx):
            continue
        key = row[seq_idx] if seq_idx is not None else None
        y_rows, u_rows = groups.setdefault(key, ([], []))
        y_rows.append(_parse_cells(row, y_idx, line))
        if u_idx:
            u_rows.append(_parse_cells(row, u_idx, line))

    if not groups:
        raise EmptyDatasetError(f"{path} holds no observations", line_number=len(rows))

    sequences = [
        Trajectory(observations=np.array(y_rows), controls=np.array(u_rows) if u_rows else None)
        for y_rows, u_rows in groups.values()
    ]
    logger.info(f"Ingested {path}: {len(sequences)} sequence(s), {sum(s.length for s in sequences)} rows")
    return Dataset(sequences, name=path.stem, metadata={"source": str(path)})


def export_dataset(dataset: Dataset, directory: Union[str, Path]) -> List[Path]:
    """
    Write one trajectory CSV per sequence plus a JSON sidecar with the
    generator metadata and standardisation statistics.

    The output depends only on the dataset, so regenerating with the same
    seed reproduces the files byte for byte.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    width = max(3, len(str(len(dataset) - 1)))
    for index, seq in enumerate(dataset.sequences):
        paths.append(write_trajectory_csv(seq, directory / f"{dataset.name}_{index:0{width}d}.csv"))
    sidecar = {
        "name": dataset.name,
        "num_sequences": len(dataset),
        "files": [p.name for p in paths],
        "metadata": dataset.metadata,
        "stats": None if dataset.stats is None else dataset.stats.to_dict(),
    }
    with open(directory / SIDECAR_NAME, "w") as handle:
        json.dump(sidecar, handle, indent=2, sort_keys=True)
    logger.info(f"Wrote {len(paths)} sequence file(s) to {directory}")
    return paths


def load_exported_dataset(directory: Union[str, Path]) -> Dataset:
    """Read a directory written by ``export_dataset``."""
    directory = Path(directory)
    sidecar_path = directory / SIDECAR_NAME
    if not sidecar_path.is_file():
        raise FileNotFoundError(f"no {SIDECAR_NAME} in {directory}")
    with open(sidecar_path) as handle:
        sidecar = json.load(handle)
    sequences = [read_trajectory_csv(directory / name) for name in sidecar["files"]]
    stats = StandardizationStats.from_dict(sidecar["stats"]) if sidecar.get("stats") else None
    return Dataset(sequences, name=sidecar["name"], stats=stats, metadata=sidecar.get("metadata"))
