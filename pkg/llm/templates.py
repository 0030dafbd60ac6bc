"""Prompt templates: versioned TOML files under ``llm/prompts``.

Each file holds an ``id``, a ``version``, a ``body`` with ``{name}`` placeholders
and exactly two worked demonstrations, injected at ``{demonstrations}``.
``{{`` and ``}}`` render as literal braces.
"""

import re
import tomllib
from dataclasses import dataclass
from enum import StrEnum
from functools import cache
from pathlib import Path

PROMPTS_DIR = Path(__file__).parent / "prompts"
DEMONSTRATIONS = "demonstrations"
_PLACEHOLDER_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")


class TemplateId(StrEnum):
    ENTITY_EXTRACTION = "entity_extraction"
    TOPIC_PRUNE = "topic_prune"
    CLUE_QUERY = "clue_query"
    RELATION_PRUNE_BATCHED = "relation_prune_batched"
    RELATION_PRUNE_SINGLE = "relation_prune_single"
    EXAMINE_REASON = "examine_reason"
    FINAL_ANSWER = "final_answer"


class TemplateLoadError(Exception):
    """Raised when a template file is missing, unreadable or structurally wrong."""


class RenderError(Exception):
    """Raised when a placeholder has no binding."""

    def __init__(self, template_id: str, missing: list[str]) -> None:
        self.template_id = template_id
        self.missing = missing
        super().__init__(f"template {template_id!r}: unbound placeholder(s) {', '.join(missing)}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    version: int
    body: str
    demonstrations: tuple[str, ...]

    @property
    def placeholders(self) -> list[str]:
        names = {m.group(1) for m in _PLACEHOLDER_RE.finditer(self.body) if m.group(1)}
        return sorted(names - {DEMONSTRATIONS})


def format_demonstrations(demonstrations: tuple[str, ...]) -> str:
    return "\n\n".join(f"Example {i}:\n{demo.strip()}" for i, demo in enumerate(demonstrations, start=1))


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    values = {**bindings, DEMONSTRATIONS: format_demonstrations(template.demonstrations)}
    missing = [name for name in template.placeholders if name not in values]
    if missing:
        raise RenderError(template.id, missing)

    def _substitute(match: re.Match) -> str:
        token = match.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        return str(values[match.group(1)])

    # Single pass: braces inside bound values are never expanded again.
    return _PLACEHOLDER_RE.sub(_substitute, template.body)


def load_template(path: str | Path) -> PromptTemplate:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as e:
        raise TemplateLoadError(f"Cannot load template {path}: {e}") from e

    template_id = data.get("id")
    body = data.get("body")
    demos = data.get("demonstrations")
    if not isinstance(template_id, str) or not isinstance(body, str):
        raise TemplateLoadError(f"{path}: 'id' and 'body' must be strings")
    if not isinstance(demos, list) or len(demos) != 2:
        raise TemplateLoadError(f"{path}: exactly 2 demonstrations are required")
    texts = tuple(d.get("text", "") if isinstance(d, dict) else "" for d in demos)
    if not all(t.strip() for t in texts):
        raise TemplateLoadError(f"{path}: demonstrations must have non-empty 'text'")
    if "{" + DEMONSTRATIONS + "}" not in body:
        raise TemplateLoadError(f"{path}: body must place {{{DEMONSTRATIONS}}}")
    return PromptTemplate(id=template_id, version=int(data.get("version", 1)), body=body, demonstrations=texts)


def load_templates(directory: str | Path = PROMPTS_DIR) -> dict[str, PromptTemplate]:
    templates = {}
    for template_id in TemplateId:
        template = load_template(Path(directory) / f"{template_id}.toml")
        if template.id != template_id:
            raise TemplateLoadError(f"{template_id}.toml declares id {template.id!r}")
        templates[template_id.value] = template
    return templates


@cache
def default_templates() -> dict[str, PromptTemplate]:
    return load_templates(PROMPTS_DIR)
