"""Batch benchmark runs: one engine run per example, scored by EM or Accuracy."""

import json
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import pandas as pd

import core.logging as logging
from evaluation.datasets import QAExample
from evaluation.metrics import exact_match, ratio
from reasoning.engine import EngineConfig, Stores, Task, answer_directly, run

PER_EXAMPLE_FILE = "per_example.jsonl"
SUMMARY_FILE = "summary.json"


@dataclass(frozen=True)
class ExampleResult:
    id: str
    task: str
    question: str
    prediction: str
    gold_answers: list[str]
    hit: bool
    degraded: bool
    iterations: int
    call_counts: dict[str, int]
    error: str | None = None
    elapsed_seconds: float = 0.0  # wall clock of the whole run, model calls included


@dataclass(frozen=True)
class MetricReport:
    n: int
    em: float | None  # over qa examples
    accuracy: float | None  # over fact_verification examples
    n_qa: int
    n_fact: int
    degraded: int
    errors: int
    mean_call_counts: dict[str, float]
    mean_elapsed_seconds: float | None
    records: list[ExampleResult]

    def summary(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("records")
        return data

    def summary_line(self) -> str:
        em = f"{self.em:.3f}" if self.em is not None else "n/a"
        acc = f"{self.accuracy:.3f}" if self.accuracy is not None else "n/a"
        return f"n={self.n} em={em} accuracy={acc} degraded={self.degraded} errors={self.errors}"


def build_report(records: Sequence[ExampleResult]) -> MetricReport:
    """Aggregate from per-example verdicts only, so a report can be recomputed from its records."""
    records = sorted(records, key=lambda r: r.id)
    qa = [r for r in records if r.task == Task.QA]
    fact = [r for r in records if r.task == Task.FACT_VERIFICATION]
    finished = [r for r in records if r.error is None]
    counted = [r.call_counts for r in finished]
    means = pd.DataFrame(counted).fillna(0).mean() if counted else pd.Series(dtype=float)
    return MetricReport(
        n=len(records),
        em=ratio(sum(r.hit for r in qa), len(qa)),
        accuracy=ratio(sum(r.hit for r in fact), len(fact)),
        n_qa=len(qa),
        n_fact=len(fact),
        degraded=sum(r.degraded for r in records),
        errors=sum(r.error is not None for r in records),
        mean_call_counts={k: round(float(v), 4) for k, v in sorted(means.items())},
        mean_elapsed_seconds=round(sum(r.elapsed_seconds for r in finished) / len(finished), 4) if finished else None,
        records=records,
    )


def _run_one(example: QAExample, cfg: EngineConfig, stores: Stores, gateway: Any, vanilla: bool) -> ExampleResult:
    started = time.monotonic()
    try:
        if vanilla:
            record = answer_directly(example.question, gateway, cfg, example.task)
        else:
            record = run(example.question, stores, cfg, gateway, example.task)
    except Exception as e:
        logging.exception(f"[Bench] example {example.id} failed: {type(e).__name__}: {e}")
        return ExampleResult(
            id=example.id,
            task=example.task.value,
            question=example.question,
            prediction="",
            gold_answers=list(example.gold_answers),
            hit=False,
            degraded=False,
            iterations=0,
            call_counts={},
            error=f"{type(e).__name__}: {e}",
            elapsed_seconds=round(time.monotonic() - started, 4),
        )
    return ExampleResult(
        id=example.id,
        task=example.task.value,
        question=example.question,
        prediction=record.answer,
        gold_answers=list(example.gold_answers),
        hit=exact_match(record.answer, example.gold_answers),
        degraded=record.degraded,
        iterations=len(record.reports),
        call_counts=record.call_counts,
        elapsed_seconds=round(time.monotonic() - started, 4),
    )


def run_benchmark(
    dataset: Sequence[QAExample],
    cfg: EngineConfig,
    stores: Stores | None,
    gateway: Any,
    *,
    parallelism: int = 1,
    vanilla: bool = False,
) -> MetricReport:
    if not dataset:
        raise ValueError("empty dataset")
    if stores is None and not vanilla:
        raise ValueError("stores are required unless running the vanilla baseline")

    logging.info(f"[Bench] running {len(dataset)} example(s){' (vanilla)' if vanilla else ''}, parallelism={parallelism}")
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(lambda ex: _run_one(ex, cfg, stores, gateway, vanilla), dataset))
    else:
        records = [_run_one(ex, cfg, stores, gateway, vanilla) for ex in dataset]

    report = build_report(records)
    logging.info(f"[Bench] {report.summary_line()}")
    return report


def write_report(report: MetricReport, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_example = out_dir / PER_EXAMPLE_FILE
    summary = out_dir / SUMMARY_FILE
    with per_example.open("w", encoding="utf-8") as fh:
        for record in report.records:
            fh.write(json.dumps(asdict(record), ensure_ascii=False, sort_keys=True) + "\n")
    summary.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return per_example, summary


def report_table(report: MetricReport) -> str:
    if not report.records:
        return "(no examples)"
    df = pd.DataFrame(
        [
            {
                "id": r.id,
                "task": r.task,
                "hit": "✓" if r.hit else "✗",
                "prediction": r.prediction[:40],
                "gold": " | ".join(r.gold_answers)[:40],
                "iterations": r.iterations,
                "calls": sum(r.call_counts.values()),
                "seconds": f"{r.elapsed_seconds:.2f}",
                "note": "error" if r.error else ("degraded" if r.degraded else ""),
            }
            for r in report.records
        ]
    )
    return df.to_string(index=False)
