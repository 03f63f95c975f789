import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from sdot.core.config import DEFAULT_OUTPUT_DIR, Settings
from sdot.core.exceptions import ConfigError
from sdot.schemas.experiment import SEED_LIMIT, ExperimentConfig
from sdot.services.experiment import format_config_error, load_config


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, type=Path, help="Experiment JSON (or a manifest.json)")
    parser.add_argument("--seed", type=int, default=None, help="Override the base seed (unsigned 64-bit)")
    parser.add_argument("--truth", type=Path, default=None, help="Ground-truth cache file (default SDOT_TRUTH_CACHE)")


def parse_snapshots(text: str) -> List[int]:
    """'1e2,1e3,1e4' -> [100, 1000, 10000]."""
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            number = float(token)
        except ValueError as exc:
            raise ConfigError(f"bad snapshot value {token!r}") from exc
        if number != int(number):
            raise ConfigError(f"snapshot {token!r} is not an integer")
        values.append(int(number))
    return values


def load_with_overrides(path: Path, **updates: Any) -> ExperimentConfig:
    config = load_config(path)
    overrides: Dict[str, Any] = {key: value for key, value in updates.items() if value is not None}
    if not overrides:
        return config
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **overrides})
    except ValidationError as exc:
        raise ConfigError(f"invalid override: {format_config_error(exc)}") from exc


def resolve_seed(seed: Optional[int]) -> Optional[int]:
    if seed is not None and not 0 <= seed < SEED_LIMIT:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return seed


def resolve_output_dir(flag: Optional[Path], config: ExperimentConfig, settings: Settings) -> Path:
    return flag or config.output_dir or settings.output_dir or DEFAULT_OUTPUT_DIR


def resolve_truth_cache(flag: Optional[Path], settings: Settings) -> Optional[Path]:
    return flag or settings.truth_cache


def resolve_threads(flag: Optional[int], settings: Settings) -> int:
    threads = flag if flag is not None else settings.threads
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    return threads
