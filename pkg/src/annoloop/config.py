"""Service configuration: JSON file plus UPPER_SNAKE environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

GENERATOR_SOURCES = ("squad", "adversarialqa", "combined")


def _default_generator_urls() -> dict[str, str]:
    return {source: f"mock://generator/{source}" for source in GENERATOR_SOURCES}


@dataclass
class ServiceConfig:
    generator_urls: dict[str, str] = field(default_factory=_default_generator_urls)
    qa_url: str = "mock://qa"
    candidates_url: str = "mock://candidates"
    fooling_threshold: float = 0.4
    validation_threshold: float = 0.95
    flag_mode: str = "incorrectness_above"
    bonus_amount: float = 0.50
    cache_depth: int = 10
    top_p: float = 0.75
    seed: int = 0
    storage_path: str = "data"
    corpus_path: Optional[str] = None
    backend_concurrency: int = 4

    def validate(self) -> "ServiceConfig":
        if not 0 < self.fooling_threshold < 1:
            raise ConfigError(f"fooling_threshold must be in (0, 1), got {self.fooling_threshold}")
        if not 0 < self.top_p <= 1:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")
        if not 0 < self.validation_threshold <= 1:
            raise ConfigError(
                f"validation_threshold must be in (0, 1], got {self.validation_threshold}"
            )
        if set(self.generator_urls) != set(GENERATOR_SOURCES):
            raise ConfigError(
                f"generator_urls must name exactly {sorted(GENERATOR_SOURCES)}, "
                f"got {sorted(self.generator_urls)}"
            )
        if any(not url for url in self.generator_urls.values()):
            raise ConfigError("generator_urls values must be non-empty")
        if self.cache_depth < 1:
            raise ConfigError(f"cache_depth must be >= 1, got {self.cache_depth}")
        if self.backend_concurrency < 1:
            raise ConfigError(f"backend_concurrency must be >= 1, got {self.backend_concurrency}")
        if self.bonus_amount < 0:
            raise ConfigError(f"bonus_amount must be >= 0, got {self.bonus_amount}")
        if self.flag_mode not in ("incorrectness_above", "valid_below"):
            raise ConfigError(f"unknown flag_mode {self.flag_mode!r}")
        return self

    @property
    def events_path(self) -> Path:
        return Path(self.storage_path) / "events.ndjson"

    def cache_path(self, source: str) -> Path:
        return Path(self.storage_path) / f"cache-{source}.ndjson"

    @property
    def resolved_corpus_path(self) -> Path:
        if self.corpus_path is not None:
            return Path(self.corpus_path)
        return Path(self.storage_path) / "corpus.ndjson"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, raw: str, current) -> object:
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, dict):
        parsed = json.loads(raw)
        if not isinstance(parsed, dict):
            raise ConfigError(f"{name} override must be a JSON object")
        return parsed
    return raw


def load_config(path: Optional[Path | str] = None, env: Optional[dict] = None) -> ServiceConfig:
    """Defaults, then the JSON file, then environment variables (field names
    uppercased), last writer wins."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fp:
                loaded = json.load(fp)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(ServiceConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        values.update(loaded)
    config = ServiceConfig(**values)
    for f in fields(ServiceConfig):
        raw = env.get(f.name.upper())
        if raw is None:
            continue
        current = getattr(config, f.name)
        try:
            setattr(config, f.name, _coerce(f.name, raw, current if current is not None else ""))
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad environment override {f.name.upper()}={raw!r}: {exc}") from exc
    return config.validate()
