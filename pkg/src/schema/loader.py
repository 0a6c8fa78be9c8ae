"""Loading, overriding and persisting run configurations."""

import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv

from src.utils.errors import ConfigurationError
from .models import RunConfig

load_dotenv()

PRESET_DIR = Path(__file__).resolve().parents[2] / "configs"
RESOLVED_CONFIG_NAME = "config.yaml"


def output_root() -> Path:
    """Default artifact root: $TGPSSM_OUTPUT_ROOT or ./runs."""
    return Path(os.getenv("TGPSSM_OUTPUT_ROOT", "runs"))


def list_presets() -> list:
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def resolve_config_path(name_or_path: Union[str, Path]) -> Path:
    """A file path as given, else a bundled preset name."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    preset = PRESET_DIR / f"{path.stem}.yaml"
    if preset.is_file():
        return preset
    raise FileNotFoundError(
        f"config '{name_or_path}' is neither a file nor a bundled preset ({', '.join(list_presets())})"
    )


def apply_overrides(raw: Dict[str, Any], overrides: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """
    Set dotted keys such as ``trainer.epochs`` in a nested dict.

    String values are parsed as YAML scalars so '10' becomes 10 and
    '-inf' becomes a float.
    """
    for dotted, value in (overrides or {}).items():
        if isinstance(value, str):
            value = yaml.safe_load(value)
        node = raw
        keys = dotted.split(".")
        for key in keys[:-1]:
            child = node.get(key)
            if child is None:
                child = node[key] = {}
            elif not isinstance(child, dict):
                raise ConfigurationError(f"cannot override '{dotted}': '{key}' is not a section")
            node = child
        node[keys[-1]] = value
    return raw


def load_run_config(
    name_or_path: Union[str, Path],
    overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Read a YAML config (file or preset name), apply overrides and validate.

    Raises:
        FileNotFoundError: Unknown file/preset
        ConfigurationError: Unreadable YAML or a bad override
        pydantic.ValidationError: Invalid values
    """
    path = resolve_config_path(name_or_path)
    try:
        with open(path) as handle:
            raw = yaml.safe_load(handle) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path} must contain a mapping at top level")
    raw.setdefault("name", path.stem)
    return RunConfig.model_validate(apply_overrides(raw, overrides))


def dump_run_config(config: RunConfig, directory: Union[str, Path]) -> Path:
    """Write the resolved config as YAML into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_CONFIG_NAME
    with open(path, "w") as handle:
        yaml.safe_dump(config.model_dump(mode="json"), handle, sort_keys=False)
    return path


def run_directory(config: RunConfig) -> Path:
    return Path(config.output_dir) if config.output_dir else output_root() / config.name
