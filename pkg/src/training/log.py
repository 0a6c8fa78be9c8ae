"""JSON-lines training log."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.schema.models import ElboBreakdown


class TrainingLog:
    """
    Append-only record of per-epoch ELBO breakdowns.

    Every record is flushed as it is written so a log survives an aborted run.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = None if path is None else Path(path)
        self.records: List[Dict[str, Any]] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def append(self, epoch: int, breakdown: ElboBreakdown, beta: float) -> Dict[str, Any]:
        record = {"epoch": epoch, **breakdown.to_dict(), "beta": beta}
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a") as handle:
                handle.write(json.dumps(record) + "\n")
        return record

    def __len__(self) -> int:
        return len(self.records)

    @staticmethod
    def read(path: Union[str, Path]) -> List[Dict[str, Any]]:
        with open(path) as handle:
            return [json.loads(line) for line in handle if line.strip()]
