"""Shared configuration for the CLI and the HTTP service.

One JSON file covers everything; environment variables prefixed with
``MIDIFILL_`` override the service keys (data_dir, checkpoint, host,
port, max_upload_bytes, max_concurrent_decodes).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["AppConfig", "load_config"]

_ENV_KEYS = {
    "MIDIFILL_DATA_DIR": ("data_dir", str),
    "MIDIFILL_CHECKPOINT": ("checkpoint", str),
    "MIDIFILL_HOST": ("host", str),
    "MIDIFILL_PORT": ("port", int),
    "MIDIFILL_MAX_UPLOAD_BYTES": ("max_upload_bytes", int),
    "MIDIFILL_MAX_CONCURRENT_DECODES": ("max_concurrent_decodes", int),
}


@dataclass
class AppConfig:
    data_dir: str = "midifill_data"
    checkpoint: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    max_upload_bytes: int = 1_048_576
    max_concurrent_decodes: int = 2
    calibration: str | None = None  # path to a calibration JSON
    with_controls: bool = True
    dataset_dir: str | None = None
    output_checkpoint: str | None = None
    model: dict = field(default_factory=dict)  # ModelConfig overrides
    train: dict = field(default_factory=dict)  # TrainConfig overrides


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Defaults, overlaid by the JSON file, overlaid by environment."""
    values: dict = {}
    if path is not None:
        values.update(json.loads(Path(path).read_text()))
    config = AppConfig(**values)
    env = os.environ if env is None else env
    for env_key, (attribute, cast) in _ENV_KEYS.items():
        if env_key in env:
            setattr(config, attribute, cast(env[env_key]))
    return config
