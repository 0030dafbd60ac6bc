"""Answer normalization and the Exact Match / Accuracy metrics."""

import re
import string
from collections.abc import Sequence

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCTUATION = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, drop the articles a/an/the, collapse whitespace."""
    text = text.lower().translate(_PUNCTUATION)
    text = _ARTICLES_RE.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, golds: Sequence[str]) -> bool:
    if not golds:
        raise ValueError("at least one gold answer is required")
    pred = normalize_answer(prediction)
    return any(pred == normalize_answer(gold) for gold in golds)


def ratio(hits: int, n: int) -> float | None:
    return hits / n if n else None
