"""Model gateway: renders templates, calls a chat client, records and replays.

Modes:
- ``live``: every call goes to the client.
- ``record``: like live, and each response is appended to the transcript store.
- ``replay``: responses come from the transcript store only; a miss is an error.

Calls are counted per template id, process-wide on the gateway and per run on a
``GatewaySession``.
"""

import json
import threading
from collections import Counter
from dataclasses import asdict, dataclass
from enum import StrEnum
from pathlib import Path
from typing import Protocol

import core.logging as logging
from core.utils import sha256_hex
from llm.templates import PromptTemplate, default_templates, render

EXPLORATION_TEMPERATURE = 0.4
REASONING_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 256


class GatewayError(Exception):
    """Base class for model access failures."""


class TransportError(GatewayError):
    """Raised when the endpoint stays unreachable after the configured attempts."""


class ReplayMissError(GatewayError):
    def __init__(self, key: str, template_id: str) -> None:
        self.key = key
        self.template_id = template_id
        super().__init__(f"no recorded response for {template_id} call (key={key})")


class TruncatedResponseError(GatewayError):
    """Raised for length-truncated responses when truncation is configured as fatal."""


class TranscriptConflictError(GatewayError):
    """Raised when one transcript key would map to two different responses."""


class GenMode(StrEnum):
    EXPLORATION = "exploration"
    REASONING = "reasoning"


@dataclass(frozen=True)
class GenConfig:
    temperature: float
    max_tokens: int
    mode: GenMode

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2] (got {self.temperature})")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be > 0 (got {self.max_tokens})")

    @classmethod
    def exploration(cls, temperature: float = EXPLORATION_TEMPERATURE, max_tokens: int = DEFAULT_MAX_TOKENS):
        return cls(temperature, max_tokens, GenMode.EXPLORATION)

    @classmethod
    def reasoning(cls, temperature: float = REASONING_TEMPERATURE, max_tokens: int = DEFAULT_MAX_TOKENS):
        return cls(temperature, max_tokens, GenMode.REASONING)


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str | None = "stop"

    @property
    def truncated(self) -> bool:
        return self.finish_reason == "length"


class ChatClient(Protocol):
    def complete(self, prompt: str, cfg: GenConfig, template_id: str) -> Completion: ...


class GatewayMode(StrEnum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


@dataclass(frozen=True)
class Transcript:
    key: str
    template_id: str
    prompt_sha256: str
    response: str


def transcript_key(template_id: str, prompt: str, cfg: GenConfig) -> str:
    material = json.dumps(
        [template_id, prompt, cfg.temperature, cfg.max_tokens, cfg.mode.value],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return sha256_hex(material)


class TranscriptStore:
    """Append-only JSONL store mapping transcript keys to responses."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, Transcript] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        for line_no, line in enumerate(self.path.read_text(encoding="utf-8").split("\n"), start=1):
            if not line.strip():
                continue
            try:
                entry = Transcript(**json.loads(line))
            except (json.JSONDecodeError, TypeError) as e:
                raise GatewayError(f"{self.path}:{line_no}: malformed transcript record") from e
            self._remember(entry)

    def _remember(self, entry: Transcript) -> bool:
        existing = self._entries.get(entry.key)
        if existing is None:
            self._entries[entry.key] = entry
            return True
        if existing.response != entry.response:
            raise TranscriptConflictError(f"{self.path}: key {entry.key} recorded with two different responses")
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Transcript | None:
        with self._lock:
            return self._entries.get(key)

    def append(self, entry: Transcript) -> None:
        with self._lock:
            if not self._remember(entry):
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(entry), ensure_ascii=False, sort_keys=True) + "\n")


class Gateway:
    def __init__(
        self,
        mode: GatewayMode | str = GatewayMode.LIVE,
        client: ChatClient | None = None,
        transcripts: TranscriptStore | None = None,
        templates: dict[str, PromptTemplate] | None = None,
        fail_on_truncation: bool = False,
    ) -> None:
        self.mode = GatewayMode(mode)
        if self.mode is not GatewayMode.REPLAY and client is None:
            raise ValueError(f"{self.mode} mode needs a chat client")
        if self.mode is not GatewayMode.LIVE and transcripts is None:
            raise ValueError(f"{self.mode} mode needs a transcript store")
        self.client = client
        self.transcripts = transcripts
        self.templates = templates if templates is not None else default_templates()
        self.fail_on_truncation = fail_on_truncation
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()
        self._truncations = 0

    def counts(self) -> dict[str, int]:
        with self._lock:
            return dict(sorted(self._counts.items()))

    @property
    def truncations(self) -> int:
        with self._lock:
            return self._truncations

    def _count(self, template_id: str) -> None:
        with self._lock:
            self._counts[template_id] += 1

    def complete(self, template_id: str, prompt: str, cfg: GenConfig) -> str:
        self._count(template_id)
        key = transcript_key(template_id, prompt, cfg)
        logging.debug(f"[Gateway] {template_id} call, mode={self.mode.value}, key={key[:12]}")

        if self.mode is GatewayMode.REPLAY:
            entry = self.transcripts.get(key)
            if entry is None:
                raise ReplayMissError(key, template_id)
            return entry.response

        completion = self.client.complete(prompt, cfg, template_id)
        if completion.truncated:
            with self._lock:
                self._truncations += 1
            if self.fail_on_truncation:
                raise TruncatedResponseError(f"{template_id} response hit max_tokens={cfg.max_tokens}")
            logging.warning(f"{template_id} response truncated at max_tokens={cfg.max_tokens}")

        if self.mode is GatewayMode.RECORD:
            self.transcripts.append(
                Transcript(
                    key=key,
                    template_id=template_id,
                    prompt_sha256=sha256_hex(prompt),
                    response=completion.text,
                )
            )
        return completion.text

    def render(self, template_id: str, bindings: dict[str, str]) -> str:
        return render(self.templates[template_id], bindings)

    def ask(self, template_id: str, bindings: dict[str, str], cfg: GenConfig) -> str:
        return self.complete(template_id, self.render(template_id, bindings), cfg)

    def session(self) -> "GatewaySession":
        return GatewaySession(self)


class GatewaySession:
    """Per-run view of a gateway with its own call counters."""

    def __init__(self, gateway: Gateway) -> None:
        self.gateway = gateway
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()

    def counts(self) -> dict[str, int]:
        with self._lock:
            return dict(sorted(self._counts.items()))

    def ask(self, template_id: str, bindings: dict[str, str], cfg: GenConfig) -> str:
        prompt = self.gateway.render(template_id, bindings)
        with self._lock:
            self._counts[template_id] += 1
        return self.gateway.complete(template_id, prompt, cfg)
