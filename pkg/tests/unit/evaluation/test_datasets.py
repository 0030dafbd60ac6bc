import json

import pytest

from evaluation.datasets import (
    DatasetError,
    QAExample,
    Task,
    convert_file,
    from_fever,
    from_hotpotqa,
    from_qald10,
    from_webqsp,
    load_dataset,
    write_dataset,
)


# ============================================================================
# Unified schema
# ============================================================================


def test_load_fixture_dataset(fixtures_dir) -> None:
    examples = load_dataset(fixtures_dir / "tencent_qa.jsonl")
    assert [e.id for e in examples] == ["tencent-1", "tencent-2"]
    assert examples[0].gold_answers == ("Pony Ma", "Ma Huateng")
    assert examples[0].task is Task.QA


def test_load_dataset_collects_every_bad_line(tmp_path) -> None:
    path = tmp_path / "bad.jsonl"
    lines = [
        {"id": "a", "question": "q?", "answers": ["x"]},
        {"id": "a", "question": "q?", "answers": ["x"]},
        {"id": "b", "question": "", "answers": ["x"]},
        {"id": "c", "question": "q?", "answers": []},
        {"id": "d", "question": "q?", "answers": ["maybe"], "task": "fact_verification"},
    ]
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\nnot json\n", encoding="utf-8")
    with pytest.raises(DatasetError) as exc_info:
        load_dataset(path)
    message = str(exc_info.value)
    for line_no in (2, 3, 4, 5, 6):
        assert f"line {line_no}:" in message
    assert "line 1:" not in message


def test_load_dataset_missing_file(tmp_path) -> None:
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing.jsonl")


def test_write_then_load_keeps_examples(tmp_path) -> None:
    examples = [
        QAExample("q1", "Who?", ("Pony Ma",)),
        QAExample("f1", "Tencent makes WeChat.", ("SUPPORTS",), Task.FACT_VERIFICATION),
    ]
    assert write_dataset(examples, tmp_path / "out" / "d.jsonl") == 2
    assert load_dataset(tmp_path / "out" / "d.jsonl") == examples


# ============================================================================
# Converters
# ============================================================================


def test_from_webqsp_collects_answers_across_parses() -> None:
    data = {
        "Questions": [
            {
                "QuestionId": "WebQTest-1",
                "RawQuestion": "who founded tencent?",
                "ProcessedQuestion": "who founded tencent",
                "Parses": [
                    {"Answers": [{"AnswerArgument": "m.01", "EntityName": "Pony Ma"}]},
                    {"Answers": [{"AnswerArgument": "m.01", "EntityName": "Pony Ma"}, {"AnswerArgument": "1998"}]},
                ],
            },
            {"QuestionId": "WebQTest-2", "ProcessedQuestion": "no answer", "Parses": [{"Answers": []}]},
        ]
    }
    assert list(from_webqsp(data)) == [QAExample("WebQTest-1", "who founded tencent?", ("Pony Ma", "1998"))]


def test_from_hotpotqa() -> None:
    data = [{"_id": "5a8b", "question": "Which city?", "answer": "Shenzhen"}]
    assert list(from_hotpotqa(data)) == [QAExample("5a8b", "Which city?", ("Shenzhen",))]


def test_from_qald10_uses_english_and_bindings() -> None:
    data = {
        "questions": [
            {
                "id": 7,
                "question": [{"language": "de", "string": "Wer?"}, {"language": "en", "string": "Who?"}],
                "answers": [{"results": {"bindings": [{"x": {"type": "uri", "value": "Q1"}}]}}],
            },
            {"id": 8, "question": [{"language": "en", "string": "Is it?"}], "answers": [{"boolean": False}]},
        ]
    }
    assert list(from_qald10(data)) == [QAExample("7", "Who?", ("Q1",)), QAExample("8", "Is it?", ("no",))]


def test_from_fever_skips_not_enough_info() -> None:
    data = [
        {"id": 1, "claim": "Tencent makes WeChat.", "label": "SUPPORTS"},
        {"id": 2, "claim": "Unknown.", "label": "NOT ENOUGH INFO"},
    ]
    assert list(from_fever(data)) == [
        QAExample("1", "Tencent makes WeChat.", ("SUPPORTS",), Task.FACT_VERIFICATION)
    ]


def test_convert_file_fever_reads_jsonl(tmp_path) -> None:
    source = tmp_path / "fever.jsonl"
    source.write_text(json.dumps({"id": 3, "claim": "c", "label": "REFUTES"}) + "\n", encoding="utf-8")
    assert convert_file("fever", source, tmp_path / "out.jsonl") == 1
    assert load_dataset(tmp_path / "out.jsonl")[0].task is Task.FACT_VERIFICATION


@pytest.mark.parametrize(("kind", "content"), [("nope", "{}"), ("hotpotqa", "[{\"question\": \"q\"}]"), ("qald10", "{")])
def test_convert_file_errors(kind, content, tmp_path) -> None:
    source = tmp_path / "src.json"
    source.write_text(content, encoding="utf-8")
    with pytest.raises(DatasetError):
        convert_file(kind, source, tmp_path / "out.jsonl")
