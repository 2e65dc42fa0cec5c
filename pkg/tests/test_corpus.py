from __future__ import annotations

import random

import pytest

from forge.corpus import (
    SAMPLE_PRESETS,
    CorpusError,
    Passage,
    Source,
    SupervisedRecord,
    export_reverse_training,
    load_passages,
    load_supervised,
    sample_passages,
)
from forge.templates import GenerationStyle


def test_load_passages_assigns_sequential_ids(write_jsonl_file):
    path = write_jsonl_file("p.jsonl", [{"text": "One."}, {"text": "Two."}, {"text": "Three."}])
    passages, summary = load_passages(path, "c4")
    assert [p.id for p in passages] == ["c4-0", "c4-1", "c4-2"]
    assert summary.loaded == 3
    assert summary.skipped == 0
    assert all(p.source is Source.c4 for p in passages)


def test_load_passages_skips_malformed_lines(write_jsonl_file):
    path = write_jsonl_file(
        "p.jsonl",
        [{"text": "A."}, "not json {", {"text": "B."}, {"text": "C."}],
    )
    passages, summary = load_passages(path, Source.wikipedia)
    assert len(passages) == 3
    assert summary.skipped == 1
    assert summary.errors


def test_load_passages_empty_file(write_jsonl_file):
    path = write_jsonl_file("p.jsonl", [])
    passages, summary = load_passages(path, "other")
    assert passages == []
    assert summary.skipped == 0


def test_load_passages_rejects_blank_text_and_duplicate_ids(write_jsonl_file):
    path = write_jsonl_file(
        "p.jsonl",
        [{"text": "   "}, {"id": "x", "text": "ok one"}, {"id": "x", "text": "ok two"}],
    )
    passages, summary = load_passages(path, "other")
    assert [p.id for p in passages] == ["x"]
    assert summary.skipped == 2


def test_load_passages_missing_file(tmp_path):
    with pytest.raises(CorpusError):
        load_passages(tmp_path / "nope.jsonl", "c4")


def test_passage_requires_nonempty_text():
    with pytest.raises(ValueError):
        Passage(id="a", text=" \n ", source=Source.c4)


def _pool(counts: dict[Source, int]) -> list[Passage]:
    passages = []
    for source, count in counts.items():
        for i in range(count):
            passages.append(Passage(id=f"{source.value}-{i:05d}", text=f"text {i}", source=source))
    return passages


def test_sample_passages_zero_request_is_empty():
    pool = _pool({Source.c4: 5})
    assert sample_passages(pool, {Source.c4: 0}, seed=1) == []


def test_sample_passages_deterministic_and_order_invariant():
    pool = _pool({Source.wikipedia: 40, Source.c4: 30})
    counts = {Source.wikipedia: 10, Source.c4: 5}
    first = sample_passages(pool, counts, seed=9)
    second = sample_passages(pool, counts, seed=9)
    assert first == second

    shuffled = list(pool)
    random.Random(0).shuffle(shuffled)
    assert sample_passages(shuffled, counts, seed=9) == first

    wiki_block = [p.source for p in first[:10]]
    assert set(wiki_block) == {Source.wikipedia}
    assert {p.source for p in first[10:]} == {Source.c4}


def test_sample_passages_without_replacement():
    pool = _pool({Source.c4: 20})
    sampled = sample_passages(pool, {Source.c4: 20}, seed=3)
    assert len({p.id for p in sampled}) == 20


def test_sample_passages_shortfall_names_source():
    pool = _pool({Source.c4: 3})
    with pytest.raises(CorpusError) as excinfo:
        sample_passages(pool, {Source.c4: 10}, seed=0)
    message = str(excinfo.value)
    assert "c4" in message and "7" in message


def test_sample_preset_names_agree():
    assert SAMPLE_PRESETS["longform-unsup"] == SAMPLE_PRESETS["longform-13500"]
    assert SAMPLE_PRESETS["longform-unsup"] == {Source.wikipedia: 9000, Source.c4: 4500}


def test_load_supervised_maps_fields(write_jsonl_file):
    path = write_jsonl_file("s.jsonl", [{"instruction": "Classify.", "output": "A"}])
    records, summary = load_supervised(path)
    assert summary.loaded == 1
    assert records[0].instruction == "Classify."
    assert records[0].output == "A"
    assert records[0].input is None


def test_load_supervised_skips_incomplete_rows(write_jsonl_file):
    path = write_jsonl_file(
        "s.jsonl",
        [{"instruction": "Do it."}, {"instruction": "Keep.", "output": "ok", "input": "ctx"}],
    )
    records, summary = load_supervised(path)
    assert summary.skipped == 1
    assert len(records) == 1
    assert records[0].input == "ctx"


def test_load_supervised_at_scale(write_jsonl_file):
    rows = [
        {"task_id": f"t{i % 97}", "instruction": f"Task {i}.", "output": f"answer {i}"}
        for i in range(13_500)
    ]
    path = write_jsonl_file("big.jsonl", rows)
    records, summary = load_supervised(path)
    assert len(records) == 13_500
    assert summary.skipped == 0


def test_export_reverse_training_prompt_and_completion():
    record = SupervisedRecord(
        task_id="t", instruction="Summarize the text.", input=None, output="Cats sleep a lot."
    )
    examples = export_reverse_training([record], GenerationStyle.instruction_answer)
    assert len(examples) == 1
    prompt = examples[0].prompt
    assert "Output: Cats sleep a lot." in prompt
    assert "What kind of instruction could this be the answer to?" in prompt
    assert examples[0].completion == "Summarize the text."


def test_export_reverse_training_round_trip_and_cardinality():
    records = [
        SupervisedRecord(task_id=str(i), instruction=f"Instr {i}.", input=None, output=f"Out {i}.")
        for i in range(7)
    ]
    for style in GenerationStyle:
        examples = export_reverse_training(records, style)
        assert len(examples) == len(records)
        assert [ex.completion for ex in examples] == [r.instruction for r in records]


def test_export_reverse_training_empty():
    assert export_reverse_training([], "chatbot") == []
