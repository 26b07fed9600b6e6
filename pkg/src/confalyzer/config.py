"""Run configuration: config file < flag overrides < environment credential.

The config file is JSON; every field has a default so a bare store directory
plus CLI flags is enough to run. The API credential is only ever read from
the environment (variable name configurable), never from a file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfalyzerError
from .gateway import DEFAULT_API_KEY_ENV, ModelParams
from .review import DEFAULT_REVIEWERS_PER_FINDING, require_odd


class ConfigError(ConfalyzerError):
    """Unreadable or invalid configuration."""


@dataclass(frozen=True)
class BackendProfile:
    kind: str = "mock"  # mock | http
    endpoint: str = ""
    model_name: str = "mock"
    api_key_env: str = DEFAULT_API_KEY_ENV
    fixtures_path: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"unknown backend kind {self.kind!r}: expected mock or http")


@dataclass(frozen=True)
class Config:
    store_root: Path = Path("store")
    catalog_path: Path | None = None
    templates_path: Path | None = None
    backend: BackendProfile = field(default_factory=BackendProfile)
    params: ModelParams = field(default_factory=ModelParams)
    review_k: int = DEFAULT_REVIEWERS_PER_FINDING
    review_seed: int = 0
    service_port: int = 8000
    tokens_path: Path | None = None

    def __post_init__(self) -> None:
        require_odd(self.review_k)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")

    try:
        backend = BackendProfile(**document.get("backend", {}))
        params = ModelParams(**document.get("params", {}))
        review = document.get("review", {})
        service = document.get("service", {})
        return Config(
            store_root=Path(document.get("store_root", "store")),
            catalog_path=Path(document["catalog_path"]) if document.get("catalog_path") else None,
            templates_path=(
                Path(document["templates_path"]) if document.get("templates_path") else None
            ),
            backend=backend,
            params=params,
            review_k=review.get("k", DEFAULT_REVIEWERS_PER_FINDING),
            review_seed=review.get("seed", 0),
            service_port=service.get("port", 8000),
            tokens_path=Path(service["tokens_path"]) if service.get("tokens_path") else None,
        )
    except TypeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc


def override(config: Config, **updates) -> Config:
    """Apply non-None flag overrides on top of the loaded config."""
    effective = {key: value for key, value in updates.items() if value is not None}
    return replace(config, **effective) if effective else config
