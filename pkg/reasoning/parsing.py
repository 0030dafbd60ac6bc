"""Parsers for model responses. They never raise: unusable text yields None/empty."""

import json
import re
from dataclasses import dataclass, field
from enum import StrEnum

_CLUE_RE = re.compile(r"^[ \t]*CLUE\[([^\]\n]+)\][ \t]*:[ \t]*(.*?)[ \t]*$", re.MULTILINE)
_RELATIONS_RE = re.compile(r"^[ \t]*RELATIONS\[([^\]\n]+)\][ \t]*:[ \t]*(.*?)[ \t]*$", re.MULTILINE)
_ANSWER_RE = re.compile(r"^[ \t]*ANSWER[ \t]*:[ \t]*(.*?)[ \t]*$", re.MULTILINE | re.IGNORECASE)
_CONTINUE_RE = re.compile(r"^[ \t]*CONTINUE\b", re.MULTILINE | re.IGNORECASE)


class VerdictKind(StrEnum):
    ANSWER = "answer"
    CONTINUE = "continue"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    answer: str = ""
    new_clue_queries: dict[str, str] = field(default_factory=dict)
    rationale: str = ""
    # False when the response carried neither marker and CONTINUE was assumed.
    parsed: bool = True


def parse_json_list(text: str) -> list[str] | None:
    """First JSON array of strings/numbers in ``text``, tolerating surrounding prose."""
    start = text.find("[")
    while start != -1:
        end = text.find("]", start)
        while end != -1:
            try:
                value = json.loads(text[start : end + 1])
            except json.JSONDecodeError:
                end = text.find("]", end + 1)
                continue
            if isinstance(value, list) and all(isinstance(v, str | int | float) for v in value):
                return [str(v).strip() for v in value if str(v).strip()]
            break
        start = text.find("[", start + 1)
    return None


def parse_clues(text: str) -> dict[str, str]:
    clues: dict[str, str] = {}
    for entity, clue in _CLUE_RE.findall(text):
        if clue:
            clues.setdefault(entity.strip(), clue)
    return clues


def parse_relation_selections(text: str) -> dict[str, list[tuple[str, str | None]]]:
    """``{entity: [(relation, direction or None), ...]}`` from RELATIONS lines."""
    selections: dict[str, list[tuple[str, str | None]]] = {}
    for entity, items in _RELATIONS_RE.findall(text):
        picked = selections.setdefault(entity.strip(), [])
        for item in re.split(r"[;,]", items):
            item = item.strip().strip("`'\"")
            if not item:
                continue
            relation, _, direction = item.partition(":")
            picked.append((relation.strip(), direction.strip().lower() or None))
    return selections


def parse_verdict(text: str) -> Verdict:
    answer = _ANSWER_RE.search(text)
    cont = _CONTINUE_RE.search(text)
    # Whichever marker comes first decides; prose around the markers is ignored.
    if answer and answer.group(1) and (cont is None or answer.start() < cont.start()):
        return Verdict(VerdictKind.ANSWER, answer=answer.group(1), rationale=text.strip())
    if cont:
        return Verdict(VerdictKind.CONTINUE, new_clue_queries=parse_clues(text), rationale=text.strip())
    return Verdict(VerdictKind.CONTINUE, rationale=text.strip(), parsed=False)


def parse_final_answer(text: str) -> str:
    match = _ANSWER_RE.search(text)
    if match and match.group(1):
        return match.group(1)
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""
