from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.config import RESPONSE_SCHEMA_VERSION
from reasoning.engine import Task


class EngineOverrides(BaseModel):
    """Per-request engine tuning; omitted fields keep the service configuration."""

    model_config = ConfigDict(extra="forbid")

    width: int | None = Field(default=None, ge=1)
    max_depth: int | None = Field(default=None, ge=1)
    top_k: int | None = Field(default=None, ge=1)
    top_l: int | None = Field(default=None, ge=1)
    alpha: float | None = Field(default=None, ge=0.0)
    coarse_keep: int | None = Field(default=None, ge=1)
    topic_prune: bool | None = None
    batched_relation_prune: bool | None = None
    clue_query: bool | None = None
    global_top_k: bool | None = None
    chunk_size: int | None = Field(default=None, ge=1)
    chunk_overlap: int | None = Field(default=None, ge=0)
    rank_origin: Literal[0, 1] | None = None
    max_workers: int | None = Field(default=None, ge=1)


class AnswerRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    question: str
    overrides: EngineOverrides = Field(default_factory=EngineOverrides)
    task: Task = Task.QA

    @field_validator("question")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("question must be non-empty")
        return value


class PathDTO(BaseModel):
    entity: str
    text: str
    triples: list[list[str]]


class EvidenceDTO(BaseModel):
    entity: str
    label: str
    index: int
    score: float
    text: str


class AnswerResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=RESPONSE_SCHEMA_VERSION, alias="schema")
    answer: str
    degraded: bool
    paths: list[PathDTO]
    evidence: list[EvidenceDTO]
    call_counts: dict[str, int]


class HealthResponse(BaseModel):
    status: str
    in_flight: int = 0
    loaded_at: str | None = None
    error: str | None = None
