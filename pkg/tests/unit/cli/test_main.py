import json
import shutil

import pytest

import cli.main
from cli.main import EXIT_DEGRADED, EXIT_ERROR, EXIT_OK, main
from core.bootstrap import build_resources
from core.settings import load_settings, with_engine_overrides, with_llm_mode
from llm.clients import ScriptedClient
from llm.gateway import GatewayMode
from reasoning.engine import run

HUB_QUESTION = "Which node does the hub link to?"

HUB_CONFIG = """\
[engine]
width = 1
max_depth = 1
top_k = 2
top_l = 1
topic_prune = false
clue_query = false

[data]
graph = "hub_triples.tsv"
labels = "hub_labels.tsv"
corpus = "hub_corpus.jsonl"

[llm]
mode = "replay"

[embedder]
kind = "hashing"
dimension = 256
"""


@pytest.fixture
def hub_config(tmp_path):
    """One hub, two linked nodes, chunked 12 words at a time.

    Node A's single chunk repeats its composed query word for word; node B has
    two near-copies of its own query. Summed per entity B wins; in a global
    top-2 pool A's chunk ranks first and takes the larger weight."""
    (tmp_path / "hub_triples.tsv").write_text("hub\tlink\tnode_a\nhub\tlink\tnode_b\n", encoding="utf-8")
    (tmp_path / "hub_labels.tsv").write_text("hub\tHub\nnode_a\tNode A\nnode_b\tNode B\n", encoding="utf-8")
    node_a = f"{HUB_QUESTION}\nHub -[link]-> Node A"
    node_b = f"{HUB_QUESTION} Hub -[link]-> Node B extra " * 2
    corpus = [{"entity_id": "node_a", "text": node_a}, {"entity_id": "node_b", "text": node_b.strip()}]
    (tmp_path / "hub_corpus.jsonl").write_text("\n".join(json.dumps(d) for d in corpus), encoding="utf-8")
    path = tmp_path / "hub.toml"
    path.write_text(HUB_CONFIG, encoding="utf-8")
    return path


def _hub_scripts() -> dict:
    return {
        "entity_extraction": lambda _: '["Hub"]',
        "relation_prune_batched": lambda _: "RELATIONS[hub]: link:outgoing",
        "examine_reason": lambda _: "ANSWER: done",
    }


def _record_hub(config, path, **overrides):
    settings = with_engine_overrides(with_llm_mode(load_settings(config), GatewayMode.RECORD, path), overrides)
    resources = build_resources(settings, client=ScriptedClient(_hub_scripts()))
    run(HUB_QUESTION, resources.stores, resources.cfg, resources.gateway)
    return path


# ============================================================================
# answer
# ============================================================================


def test_answer_replay_prints_answer_first(config, record_transcripts, tencent_question, capsys) -> None:
    transcripts = record_transcripts()
    code = main(["answer", tencent_question, "--config", str(config), "--replay", str(transcripts)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.splitlines()[0] == "Pony Ma"
    assert "Paths:" in out
    assert "Calls: " in out


def test_answer_json_output(config, record_transcripts, tencent_question, capsys) -> None:
    transcripts = record_transcripts()
    code = main(["answer", tencent_question, "--json", "--config", str(config), "--replay", str(transcripts)])
    record = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert record["schema"] == 1
    assert record["answer"] == "Pony Ma"
    assert len(record["reports"]) == 2


def test_answer_degraded_exit_code(config, record_transcripts, tencent_question, capsys) -> None:
    transcripts = record_transcripts("shallow.jsonl", max_depth=1)
    code = main(["answer", tencent_question, "--config", str(config), "--max-depth", "1", "--replay", str(transcripts)])
    out = capsys.readouterr().out
    assert code == EXIT_DEGRADED
    assert out.splitlines()[0] == "Pony Ma"
    assert "(degraded" in out


def test_answer_replay_miss_is_an_error(config, record_transcripts, tencent_question, capsys) -> None:
    transcripts = record_transcripts()
    code = main(["answer", tencent_question, "--config", str(config), "--max-depth", "1", "--replay", str(transcripts)])
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_answer_missing_graph_is_an_error(fixtures_dir, tmp_path, tencent_question) -> None:
    for name in ("config.toml", "tencent_labels.tsv", "tencent_corpus.jsonl"):
        shutil.copy(fixtures_dir / name, tmp_path / name)
    (tmp_path / "transcripts.jsonl").write_text("", encoding="utf-8")
    assert main(["answer", tencent_question, "--config", str(tmp_path / "config.toml")]) == EXIT_ERROR


def test_answer_bad_override_is_an_error(config, tencent_question, tmp_path) -> None:
    code = main(["answer", tencent_question, "--config", str(config), "--top-k", "0", "--replay", str(tmp_path)])
    assert code == EXIT_ERROR


def test_answer_global_top_k_changes_the_kept_entity(hub_config, tmp_path, capsys) -> None:
    chunking = {"chunk_size": 12, "chunk_overlap": 0}
    per_entity = _record_hub(hub_config, tmp_path / "per_entity.jsonl", **chunking)
    pooled = _record_hub(hub_config, tmp_path / "pooled.jsonl", global_top_k=True, **chunking)
    base = ["answer", HUB_QUESTION, "--json", "--config", str(hub_config), "--chunk-size", "12", "--chunk-overlap", "0"]

    assert main([*base, "--replay", str(per_entity)]) == EXIT_OK
    per_entity_record = json.loads(capsys.readouterr().out)
    assert main([*base, "--global-top-k", "--replay", str(pooled)]) == EXIT_OK
    pooled_record = json.loads(capsys.readouterr().out)

    assert per_entity_record["reports"][0]["new_topics"] == ["node_b"]
    assert pooled_record["reports"][0]["new_topics"] == ["node_a"]


def test_answer_chunk_flags_reach_the_ranking(hub_config, tmp_path) -> None:
    transcripts = _record_hub(hub_config, tmp_path / "per_entity.jsonl", chunk_size=12, chunk_overlap=0)
    # Default chunking scores node B as one chunk, so the examine prompt no longer matches the recording.
    code = main(["answer", HUB_QUESTION, "--config", str(hub_config), "--replay", str(transcripts)])
    assert code == EXIT_ERROR


def test_answer_generation_flags_reach_the_model_calls(config, record_transcripts, tencent_question) -> None:
    recorded = record_transcripts("short.jsonl", reasoning={"max_tokens": 64})
    base = ["answer", tencent_question, "--config", str(config), "--replay", str(recorded)]
    assert main(base) == EXIT_ERROR
    assert main([*base, "--reasoning-max-tokens", "64"]) == EXIT_OK


def test_answer_task_flag_selects_the_instruction(config, record_transcripts, tencent_question) -> None:
    recorded = record_transcripts("fact.jsonl", task="fact_verification")
    base = ["answer", tencent_question, "--config", str(config), "--replay", str(recorded)]
    assert main(base) == EXIT_ERROR
    assert main([*base, "--task", "fact_verification"]) == EXIT_OK


@pytest.mark.parametrize("flag", [["--rank-origin", "2"], ["--task", "yes_no"]])
def test_answer_rejects_unknown_choices(flag, config, tencent_question) -> None:
    with pytest.raises(SystemExit):
        main(["answer", tencent_question, "--config", str(config), *flag])


# ============================================================================
# bench
# ============================================================================


def test_bench_replay_writes_report(config, record_transcripts, fixtures_dir, tmp_path, capsys) -> None:
    transcripts = record_transcripts()
    out_dir = tmp_path / "report"
    code = main(
        ["bench", str(fixtures_dir / "tencent_qa.jsonl"), "--out", str(out_dir), "--config", str(config)]
        + ["--replay", str(transcripts)]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "n=2 em=1.000 accuracy=n/a degraded=0 errors=0"
    assert json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))["em"] == 1.0
    assert len((out_dir / "per_example.jsonl").read_text(encoding="utf-8").splitlines()) == 2


def test_bench_empty_dataset_is_an_error(config, tmp_path) -> None:
    dataset = tmp_path / "empty.jsonl"
    dataset.write_text("", encoding="utf-8")
    assert main(["bench", str(dataset), "--out", str(tmp_path / "r"), "--config", str(config)]) == EXIT_ERROR


def test_bench_unwritable_output_fails_before_running(
    config, record_transcripts, fixtures_dir, tmp_path, monkeypatch
) -> None:
    def _never(*_args, **_kwargs):
        pytest.fail("benchmark ran although the report directory is unusable")

    monkeypatch.setattr(cli.main, "run_benchmark", _never)
    transcripts = record_transcripts()
    blocker = tmp_path / "taken"
    blocker.write_text("", encoding="utf-8")
    code = main(
        ["bench", str(fixtures_dir / "tencent_qa.jsonl"), "--out", str(blocker), "--config", str(config)]
        + ["--replay", str(transcripts)]
    )
    assert code == EXIT_ERROR


def test_bench_creates_nested_output_directory(config, record_transcripts, fixtures_dir, tmp_path) -> None:
    transcripts = record_transcripts()
    out_dir = tmp_path / "runs" / "replay" / "report"
    code = main(
        ["bench", str(fixtures_dir / "tencent_qa.jsonl"), "--out", str(out_dir), "--config", str(config)]
        + ["--replay", str(transcripts)]
    )
    assert code == EXIT_OK
    assert (out_dir / "summary.json").is_file()


# ============================================================================
# convert
# ============================================================================


def test_convert_hotpotqa(tmp_path, capsys) -> None:
    source = tmp_path / "hotpot.json"
    source.write_text(json.dumps([{"_id": "x", "question": "Which city?", "answer": "Shenzhen"}]), encoding="utf-8")
    destination = tmp_path / "unified.jsonl"
    assert main(["convert", "hotpotqa", str(source), str(destination)]) == EXIT_OK
    assert "1 example(s)" in capsys.readouterr().out
    assert json.loads(destination.read_text(encoding="utf-8"))["answers"] == ["Shenzhen"]


def test_convert_unreadable_source_is_an_error(tmp_path) -> None:
    assert main(["convert", "fever", str(tmp_path / "missing.jsonl"), str(tmp_path / "out.jsonl")]) == EXIT_ERROR
