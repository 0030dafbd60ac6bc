"""kgnav command line: ``answer``, ``bench``, ``convert`` and ``serve``.

Exit codes: 0 success, 1 degraded answer, 2 error.
"""

import argparse
import sys
from pathlib import Path

import core.logging as logging
from core.bootstrap import build_gateway, build_resources
from core.settings import Settings, SettingsError, load_settings, to_engine_config, with_engine_overrides, with_llm_mode
from core.validation import validate_config
from evaluation.benchmark import report_table, run_benchmark, write_report
from evaluation.datasets import CONVERTERS, DatasetError, convert_file, load_dataset
from kg.store import GraphLoadError
from llm.gateway import GatewayError, GatewayMode
from llm.templates import RenderError, TemplateLoadError
from reasoning.engine import ConfigError, EngineError, Task, answer_directly, run
from retrieval.corpus import CorpusLoadError
from retrieval.embedders import EmbedderError

EXIT_OK = 0
EXIT_DEGRADED = 1
EXIT_ERROR = 2

_HANDLED_ERRORS = (
    SettingsError,
    ConfigError,
    GraphLoadError,
    CorpusLoadError,
    EmbedderError,
    GatewayError,
    TemplateLoadError,
    RenderError,
    EngineError,
    DatasetError,
    OSError,
    ValueError,
)


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--width", type=int, help="topic entities kept per iteration")
    parser.add_argument("--max-depth", type=int, help="maximum iterations")
    parser.add_argument("--top-k", type=int, help="chunks per entity entering its ranking score")
    parser.add_argument("--top-l", type=int, help="evidence chunks kept per iteration")
    parser.add_argument("--alpha", type=float, help="rank decay of chunk scores")
    parser.add_argument("--coarse-keep", type=int, help="chunks surviving the coarse stage")
    parser.add_argument("--no-topic-prune", action="store_true", help="keep every linked entity")
    parser.add_argument("--no-batched-rp", action="store_true", help="one relation-prune call per topic entity")
    parser.add_argument("--no-clue-query", action="store_true", help="do not generate clue queries")
    parser.add_argument("--global-top-k", action="store_true", help="rank entities by one global top-K chunk pool")
    parser.add_argument("--chunk-size", type=int, help="words per chunk")
    parser.add_argument("--chunk-overlap", type=int, help="words shared by consecutive chunks")
    parser.add_argument("--rank-origin", type=int, choices=(0, 1), help="rank index of the best chunk in the decay")
    parser.add_argument("--max-workers", type=int, help="threads scoring candidates")
    parser.add_argument("--exploration-temperature", type=float)
    parser.add_argument("--exploration-max-tokens", type=int)
    parser.add_argument("--reasoning-temperature", type=float)
    parser.add_argument("--reasoning-max-tokens", type=int)
    transcripts = parser.add_mutually_exclusive_group()
    transcripts.add_argument("--replay", type=Path, metavar="PATH", help="answer from recorded transcripts only")
    transcripts.add_argument("--record", type=Path, metavar="PATH", help="call the model and record transcripts")
    parser.add_argument("--vanilla", action="store_true", help="ask the model directly, without retrieval")


def _settings_from_args(args: argparse.Namespace) -> Settings:
    settings = load_settings(args.config)
    settings = with_engine_overrides(
        settings,
        {
            "width": args.width,
            "max_depth": args.max_depth,
            "top_k": args.top_k,
            "top_l": args.top_l,
            "alpha": args.alpha,
            "coarse_keep": args.coarse_keep,
            "topic_prune": False if args.no_topic_prune else None,
            "batched_relation_prune": False if args.no_batched_rp else None,
            "clue_query": False if args.no_clue_query else None,
            "global_top_k": True if args.global_top_k else None,
            "chunk_size": args.chunk_size,
            "chunk_overlap": args.chunk_overlap,
            "rank_origin": args.rank_origin,
            "max_workers": args.max_workers,
            "exploration": {"temperature": args.exploration_temperature, "max_tokens": args.exploration_max_tokens},
            "reasoning": {"temperature": args.reasoning_temperature, "max_tokens": args.reasoning_max_tokens},
        },
    )
    if args.replay:
        settings = with_llm_mode(settings, GatewayMode.REPLAY, args.replay)
    elif args.record:
        settings = with_llm_mode(settings, GatewayMode.RECORD, args.record)
    return settings


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def cmd_answer(args: argparse.Namespace) -> int:
    settings = _settings_from_args(args)
    if not validate_config(settings, needs_stores=not args.vanilla):
        return _fail("invalid configuration (see log)")

    if args.vanilla:
        record = answer_directly(args.question, build_gateway(settings), to_engine_config(settings), args.task)
    else:
        resources = build_resources(settings)
        record = run(args.question, resources.stores, resources.cfg, resources.gateway, args.task)

    if args.json:
        print(record.to_json())
    else:
        print(record.answer)
        if record.paths:
            print("\nPaths:")
            for path in record.paths:
                print(f"  {path['text']}")
        if record.evidence:
            print("\nEvidence:")
            for ev in record.evidence:
                print(f"  [{ev['entity']}#{ev['index']} {ev['score']:.3f}] {ev['text'][:160]}")
        print("\nCalls: " + ", ".join(f"{k}={v}" for k, v in record.call_counts.items()))
        if record.degraded:
            print("(degraded: exploration ended without an answer)")
    return EXIT_DEGRADED if record.degraded else EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _settings_from_args(args)
    dataset = load_dataset(args.dataset)
    if not dataset:
        return _fail("empty dataset")
    if not validate_config(settings, needs_stores=not args.vanilla):
        return _fail("invalid configuration (see log)")
    # Created before any model call.
    args.out.mkdir(parents=True, exist_ok=True)

    if args.vanilla:
        cfg, stores, gateway = to_engine_config(settings), None, build_gateway(settings)
    else:
        resources = build_resources(settings)
        cfg, stores, gateway = resources.cfg, resources.stores, resources.gateway
    parallelism = args.parallelism or settings.bench.parallelism
    report = run_benchmark(dataset, cfg, stores, gateway, parallelism=parallelism, vanilla=args.vanilla)
    per_example, summary = write_report(report, args.out)

    print(report_table(report))
    print(report.summary_line())
    logging.info(f"[Bench] wrote {per_example} and {summary}")
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    count = convert_file(args.kind, args.source, args.destination)
    print(f"{count} example(s) written to {args.destination}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from api.app import create_app

    settings = load_settings(args.config)
    uvicorn.run(
        create_app(args.config),
        host=args.host or settings.service.host,
        port=args.port or settings.service.port,
        log_config=None,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgnav", description="Knowledge-graph-guided retrieval and reasoning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_answer = sub.add_parser("answer", help="answer one question")
    p_answer.add_argument("question")
    p_answer.add_argument("--json", action="store_true", help="print the full answer record as JSON")
    p_answer.add_argument("--task", choices=[t.value for t in Task], default=Task.QA.value, help="answer format")
    _add_engine_flags(p_answer)
    p_answer.set_defaults(func=cmd_answer)

    p_bench = sub.add_parser("bench", help="run a benchmark dataset")
    p_bench.add_argument("dataset", type=Path)
    p_bench.add_argument("--out", type=Path, required=True, help="report directory")
    p_bench.add_argument("--parallelism", type=int, help="examples run at once")
    _add_engine_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_convert = sub.add_parser("convert", help="convert a public dataset to the unified format")
    p_convert.add_argument("kind", choices=sorted(CONVERTERS))
    p_convert.add_argument("source", type=Path)
    p_convert.add_argument("destination", type=Path)
    p_convert.set_defaults(func=cmd_convert)

    p_serve = sub.add_parser("serve", help="run the HTTP answer service")
    p_serve.add_argument("--config", type=Path, help="TOML config file")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _HANDLED_ERRORS as e:
        logging.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
