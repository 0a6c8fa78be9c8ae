"""Checkpoint files: every named parameter array plus a JSON metadata entry."""

import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from src.utils.errors import ConfigurationError

META_KEY = "__meta__"


def save_checkpoint(path: Union[str, Path], params: Dict[str, np.ndarray], meta: Dict[str, Any]) -> Path:
    """
    Write a single .npz file.

    Args:
        path: Target file
        params: Named parameter arrays (e.g. ``model.gp.Z``)
        meta: JSON-serialisable metadata (resolved config, RNG state, Lagrange state, ...)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if META_KEY in params:
        raise ConfigurationError(f"'{META_KEY}' is reserved in checkpoints")
    arrays = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read a checkpoint written by ``save_checkpoint``; returns (params, meta)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    with np.load(path, allow_pickle=False) as data:
        if META_KEY not in data.files:
            raise ConfigurationError(f"{path} is not a checkpoint (no metadata entry)")
        meta = json.loads(str(data[META_KEY]))
        params = {name: np.array(data[name]) for name in data.files if name != META_KEY}
    return params, meta
