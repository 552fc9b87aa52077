"""Settings resolution: command-line flags, then environment, then pricescope.toml."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .inference.llm import InferenceBackendConfig

CONFIG_FILE = "pricescope.toml"
RPC_ENV = "PRICESCOPE_RPC_URL"
LLM_KEY_ENV = "PRICESCOPE_LLM_KEY"


def load_file(path: str | os.PathLike | None = None) -> dict[str, Any]:
    """Read the TOML settings file; a missing default file is an empty config."""
    if path is None:
        path = Path.cwd() / CONFIG_FILE
        if not path.exists():
            return {}
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return doc.get("pricescope", doc)


def pick(flag, env_name: str | None, file_cfg: dict, key: str, default=None):
    if flag is not None:
        return flag
    if env_name and os.environ.get(env_name):
        return os.environ[env_name]
    if key in file_cfg:
        return file_cfg[key]
    return default


@dataclass
class ScanConfig:
    source: tuple[str, str]  # ("fixture", path) | ("rpc", tx hash) | ("batch", dir)
    backend: InferenceBackendConfig = field(default_factory=InferenceBackendConfig)
    timeout_secs: float = 300
    output_path: str | None = None
    graph_dump: bool = False
    rpc_url: str | None = None
    jobs: int = 1
    models_path: str | None = None
    sources_path: str | None = None
    min_confidence: int = 6

    def __post_init__(self):
        if self.source[0] not in ("fixture", "rpc", "batch"):
            raise ValueError(f"unknown source kind {self.source[0]!r}")
        if self.timeout_secs <= 0:
            raise ValueError("timeout must be positive")
