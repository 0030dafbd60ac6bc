"""Config-file settings: a TOML file validated by pydantic, layered over the environment.

Precedence: environment defaults (``core.config``) < config file < CLI flags or
request overrides. Relative paths in ``[data]`` and ``[llm]`` resolve against
the config file's directory.
"""

import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.config import (
    BENCH_PARALLELISM,
    EMBEDDER_COARSE_URL,
    EMBEDDER_DIMENSION,
    EMBEDDER_KIND,
    EMBEDDER_RERANK_URL,
    EMBEDDER_TIMEOUT,
    LLM_BACKOFF_SECONDS,
    LLM_BASE_URL,
    LLM_FAIL_ON_TRUNCATION,
    LLM_MAX_RETRIES,
    LLM_MODEL,
    LLM_TIMEOUT,
    SERVICE_DRAIN_SECONDS,
    SERVICE_HOST,
    SERVICE_MAX_CONCURRENT,
    SERVICE_PORT,
)
from llm.gateway import GatewayMode, GenConfig
from reasoning.engine import EngineConfig


class SettingsError(Exception):
    """Raised when a config file is unreadable or does not match the schema."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GenSettings(_Strict):
    temperature: float = Field(ge=0.0, le=2.0)
    max_tokens: int = Field(default=256, gt=0)


class EngineSettings(_Strict):
    width: int = Field(default=3, ge=1)
    max_depth: int = Field(default=3, ge=1)
    top_k: int = Field(default=5, ge=1)
    top_l: int = Field(default=5, ge=1)
    alpha: float = Field(default=0.5, ge=0.0)
    coarse_keep: int = Field(default=20, ge=1)
    chunk_size: int = Field(default=100, ge=1)
    chunk_overlap: int = Field(default=20, ge=0)
    topic_prune: bool = True
    batched_relation_prune: bool = True
    clue_query: bool = True
    global_top_k: bool = False
    rank_origin: Literal[0, 1] = 0
    max_workers: int = Field(default=1, ge=1)
    exploration: GenSettings = GenSettings(temperature=0.4)
    reasoning: GenSettings = GenSettings(temperature=0.0)


class DataSettings(_Strict):
    graph: Path | None = None
    labels: Path | None = None
    corpus: Path | None = None


class LLMSettings(_Strict):
    mode: GatewayMode = GatewayMode.LIVE
    transcripts: Path | None = None
    base_url: str = LLM_BASE_URL
    model: str = LLM_MODEL
    timeout: float = Field(default=LLM_TIMEOUT, gt=0)
    max_retries: int = Field(default=LLM_MAX_RETRIES, ge=1)
    backoff_seconds: float = Field(default=LLM_BACKOFF_SECONDS, ge=0)
    fail_on_truncation: bool = LLM_FAIL_ON_TRUNCATION


class EmbedderSettings(_Strict):
    kind: Literal["http", "hashing"] = EMBEDDER_KIND
    coarse_url: str | None = EMBEDDER_COARSE_URL
    rerank_url: str | None = EMBEDDER_RERANK_URL
    timeout: float = Field(default=EMBEDDER_TIMEOUT, gt=0)
    dimension: int = Field(default=EMBEDDER_DIMENSION, ge=1)


class ServiceSettings(_Strict):
    host: str = SERVICE_HOST
    port: int = SERVICE_PORT
    max_concurrent: int = Field(default=SERVICE_MAX_CONCURRENT, ge=1)
    drain_seconds: float = Field(default=SERVICE_DRAIN_SECONDS, ge=0)


class BenchSettings(_Strict):
    parallelism: int = Field(default=BENCH_PARALLELISM, ge=1)


class Settings(_Strict):
    engine: EngineSettings = EngineSettings()
    data: DataSettings = DataSettings()
    llm: LLMSettings = LLMSettings()
    embedder: EmbedderSettings = EmbedderSettings()
    service: ServiceSettings = ServiceSettings()
    bench: BenchSettings = BenchSettings()


def _format_validation_error(e: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())


def _resolve(base: Path, path: Path | None) -> Path | None:
    if path is None or path.is_absolute():
        return path
    return base / path


def load_settings(path: str | Path | None = None) -> Settings:
    if path is None:
        return Settings()
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as e:
        raise SettingsError(f"Cannot read config {path}: {e}") from e
    try:
        settings = Settings.model_validate(raw)
    except ValidationError as e:
        raise SettingsError(f"{path}: {_format_validation_error(e)}") from e

    base = path.resolve().parent
    data = settings.data.model_copy(
        update={name: _resolve(base, getattr(settings.data, name)) for name in ("graph", "labels", "corpus")}
    )
    llm = settings.llm.model_copy(update={"transcripts": _resolve(base, settings.llm.transcripts)})
    return settings.model_copy(update={"data": data, "llm": llm})


def with_engine_overrides(settings: Settings, overrides: dict[str, Any]) -> Settings:
    """Validated copy with ``overrides`` applied to ``[engine]``; ``None`` values are ignored.

    Dict values (``exploration``, ``reasoning``) merge into the configured table
    rather than replacing it.
    """
    merged = settings.engine.model_dump()
    changed = False
    for key, value in overrides.items():
        if isinstance(value, dict):
            value = {k: v for k, v in value.items() if v is not None}
            if not value:
                continue
            value = {**merged.get(key, {}), **value}
        elif value is None:
            continue
        merged[key] = value
        changed = True
    if not changed:
        return settings
    try:
        engine = EngineSettings.model_validate(merged)
    except ValidationError as e:
        raise SettingsError(f"engine overrides: {_format_validation_error(e)}") from e
    return settings.model_copy(update={"engine": engine})


def with_llm_mode(settings: Settings, mode: GatewayMode, transcripts: str | Path) -> Settings:
    llm = settings.llm.model_copy(update={"mode": mode, "transcripts": Path(transcripts)})
    return settings.model_copy(update={"llm": llm})


def to_engine_config(settings: Settings) -> EngineConfig:
    """Raises ``reasoning.engine.ConfigError`` for combinations a single field check cannot catch (L > K)."""
    e = settings.engine
    return EngineConfig(
        width=e.width,
        max_depth=e.max_depth,
        top_k=e.top_k,
        top_l=e.top_l,
        alpha=e.alpha,
        coarse_keep=e.coarse_keep,
        chunk_size=e.chunk_size,
        chunk_overlap=e.chunk_overlap,
        topic_prune=e.topic_prune,
        batched_relation_prune=e.batched_relation_prune,
        clue_query=e.clue_query,
        global_top_k=e.global_top_k,
        rank_origin=e.rank_origin,
        max_workers=e.max_workers,
        exploration=GenConfig.exploration(e.exploration.temperature, e.exploration.max_tokens),
        reasoning=GenConfig.reasoning(e.reasoning.temperature, e.reasoning.max_tokens),
    )
