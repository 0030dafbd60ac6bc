"""Benchmark datasets: the unified JSONL schema and converters from public layouts.

Unified record, one per line::

    {"id": "...", "question": "...", "answers": ["..."], "task": "qa" | "fact_verification"}
"""

import json
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from pathlib import Path

import core.logging as logging
from evaluation.metrics import normalize_answer
from reasoning.engine import Task

FACT_LABELS = ("supports", "refutes")


class DatasetError(Exception):
    """Raised when a dataset file cannot be read or holds invalid records."""


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    task: Task = Task.QA

    def __post_init__(self) -> None:
        if not self.id or not self.question.strip():
            raise ValueError("example id and question must be non-empty")
        if not self.gold_answers:
            raise ValueError(f"example {self.id}: at least one gold answer is required")
        if self.task is Task.FACT_VERIFICATION:
            bad = [g for g in self.gold_answers if normalize_answer(g) not in FACT_LABELS]
            if bad:
                raise ValueError(f"example {self.id}: fact verification gold must be SUPPORTS or REFUTES (got {bad})")

    def to_dict(self) -> dict:
        return {"id": self.id, "question": self.question, "answers": list(self.gold_answers), "task": self.task.value}


def parse_example(record: dict) -> QAExample:
    answers = record.get("answers")
    if isinstance(answers, str):
        answers = [answers]
    if not isinstance(answers, list):
        raise ValueError("'answers' must be a list of strings")
    return QAExample(
        id=str(record.get("id", "")),
        question=str(record.get("question", "")),
        gold_answers=tuple(str(a) for a in answers),
        task=Task(record.get("task", Task.QA)),
    )


def load_dataset(path: str | Path) -> list[QAExample]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as e:
        raise DatasetError(f"Cannot read dataset {path}: {e}") from e

    examples: list[QAExample] = []
    errors: list[str] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            example = parse_example(json.loads(line))
        except (json.JSONDecodeError, ValueError, AttributeError) as e:
            errors.append(f"line {line_no}: {e}")
            continue
        if example.id in seen:
            errors.append(f"line {line_no}: duplicate id {example.id!r}")
            continue
        seen.add(example.id)
        examples.append(example)

    if errors:
        raise DatasetError(f"{path}: " + "; ".join(errors[:10]))
    logging.info(f"Loaded {len(examples)} example(s) from {path}")
    return examples


def write_dataset(examples: Iterable[QAExample], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


# =============================================================================
# Converters from native layouts
# =============================================================================


def from_webqsp(data: dict) -> Iterable[QAExample]:
    """``{"Questions": [{"QuestionId", "ProcessedQuestion", "Parses": [{"Answers": [...]}]}]}``."""
    for q in data.get("Questions", []):
        answers: list[str] = []
        for parse in q.get("Parses", []):
            for a in parse.get("Answers", []):
                name = a.get("EntityName") or a.get("AnswerArgument")
                if name and name not in answers:
                    answers.append(name)
        if answers:
            yield QAExample(q["QuestionId"], q.get("RawQuestion") or q["ProcessedQuestion"], tuple(answers))


def from_hotpotqa(data: list) -> Iterable[QAExample]:
    """``[{"_id", "question", "answer"}, ...]``."""
    for item in data:
        yield QAExample(item["_id"], item["question"], (item["answer"],))


def from_qald10(data: dict) -> Iterable[QAExample]:
    """``{"questions": [{"id", "question": [{"language", "string"}], "answers": [...]}]}``."""
    for q in data.get("questions", []):
        text = next((s["string"] for s in q.get("question", []) if s.get("language") == "en"), None)
        answers: list[str] = []
        for a in q.get("answers", []):
            if "boolean" in a:
                answers.append("yes" if a["boolean"] else "no")
            for binding in a.get("results", {}).get("bindings", []):
                answers.extend(v["value"] for v in binding.values() if "value" in v)
        if text and answers:
            yield QAExample(str(q["id"]), text, tuple(answers))


def from_fever(data: list) -> Iterable[QAExample]:
    """``[{"id", "claim", "label"}, ...]``; NOT ENOUGH INFO claims are skipped."""
    for item in data:
        if item.get("label") not in ("SUPPORTS", "REFUTES"):
            continue
        yield QAExample(str(item["id"]), item["claim"], (item["label"],), Task.FACT_VERIFICATION)


CONVERTERS: dict[str, Callable[..., Iterable[QAExample]]] = {
    "webqsp": from_webqsp,
    "hotpotqa": from_hotpotqa,
    "qald10": from_qald10,
    "fever": from_fever,
}


def convert_file(kind: str, source: str | Path, destination: str | Path) -> int:
    if kind not in CONVERTERS:
        raise DatasetError(f"Unknown dataset kind {kind!r} (expected one of {', '.join(CONVERTERS)})")
    source = Path(source)
    try:
        text = source.read_text(encoding="utf-8")
        if kind == "fever":
            data = [json.loads(line) for line in text.split("\n") if line.strip()]
        else:
            data = json.loads(text)
        examples = list(CONVERTERS[kind](data))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"Cannot convert {source} as {kind}: {e}") from e

    count = write_dataset(examples, destination)
    logging.info(f"Converted {count} {kind} example(s) from {source} to {destination}")
    return count
