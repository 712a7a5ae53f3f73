import json

import pytest
from hypothesis import given, settings, strategies as st

from dstforge.corpus import Dialogue, Utterance, dump_corpus, load_corpus, render_history, split_corpus
from dstforge.errors import AnnotationInvalid, EmptyCorpus, IndexOutOfRange, MalformedLine


def _dialogues(n):
    return [Dialogue(f"d{i}", [Utterance("patient", f"hello {i}")]) for i in range(n)]


def test_load_two_lines():
    raw = "\n".join(json.dumps(d.to_dict()) for d in _dialogues(2))
    assert [d.id for d in load_corpus(raw)] == ["d0", "d1"]


def test_annotation_out_of_range():
    obj = {"id": "x", "turns": [{"role": "patient", "text": "hi"}] * 4, "annotations": {"9": {"intents": []}}}
    with pytest.raises(AnnotationInvalid):
        load_corpus(json.dumps(obj))


def test_malformed_line_number():
    with pytest.raises(MalformedLine) as err:
        load_corpus(json.dumps(_dialogues(1)[0].to_dict()) + "\n{oops")
    assert err.value.line_no == 2


def test_duplicate_ids_rejected():
    line = json.dumps(_dialogues(1)[0].to_dict())
    with pytest.raises(MalformedLine):
        load_corpus(line + "\n" + line)


def test_example_annotation_parsed(example, schema_en):
    loaded = load_corpus(dump_corpus([example]), schema_en)[0]
    ann = loaded.annotations[2]
    assert ann.intents == {"describe"}
    (head,) = ann.delta.fields["symptom"]
    assert head.key == "head feels painful"
    assert head.children == {"extent": "sometimes", "if_exists": "true"}


def test_annotation_validated_against_schema(example, schema_en):
    example.annotations[2].delta.fields["symptom"][0].children["if_exists"] = "maybe"
    with pytest.raises(AnnotationInvalid):
        load_corpus(dump_corpus([example]), schema_en)


def test_meta_header_skipped(example):
    raw = dump_corpus([example], meta={"seed": 1})
    assert raw.splitlines()[0].startswith('{"_meta"')
    assert len(load_corpus(raw)) == 1


def test_render_history_worked_example(example):
    assert render_history(example, 2).text == (
        "[PATIENT] I feel uncomfortable.\n[DOCTOR] What's wrong with you?\n[PATIENT] My head sometimes feels painful."
    )
    assert render_history(example, 0).text == "[PATIENT] I feel uncomfortable."
    assert render_history(example, 2).latest_utterance.text == "My head sometimes feels painful."


def test_render_history_out_of_range(example):
    with pytest.raises(IndexOutOfRange):
        render_history(example, 3)


def test_split_sizes():
    assert [len(p) for p in split_corpus(_dialogues(10), (8, 1, 1), seed=7)] == [8, 1, 1]
    assert [len(p) for p in split_corpus(_dialogues(1))] == [1, 0, 0]


def test_split_deterministic():
    a = split_corpus(_dialogues(30), seed=5)
    b = split_corpus(_dialogues(30), seed=5)
    assert [[d.id for d in p] for p in a] == [[d.id for d in p] for p in b]


def test_split_empty():
    with pytest.raises(EmptyCorpus):
        split_corpus([])


@given(st.integers(1, 300), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_split_partitions(n, seed):
    parts = split_corpus(_dialogues(n), (8, 1, 1), seed)
    ids = [d.id for p in parts for d in p]
    assert sorted(ids) == sorted(d.id for d in _dialogues(n))
    for part, w in zip(parts, (8, 1, 1)):
        assert abs(len(part) - n * w / 10) < 1


_text = st.text(alphabet=st.characters(blacklist_characters="[]"), min_size=1).filter(str.strip)


@given(st.lists(st.tuples(st.sampled_from(["patient", "doctor"]), _text), min_size=1, max_size=8))
def test_history_role_tokens(turns):
    d = Dialogue("x", [Utterance(r, t) for r, t in turns])
    for t in range(len(turns)):
        text = render_history(d, t).text
        assert text.count("[PATIENT]") + text.count("[DOCTOR]") == t + 1


def test_round_trip(synth_zh):
    again = load_corpus(dump_corpus(synth_zh))
    assert [d.to_dict() for d in again] == [d.to_dict() for d in synth_zh]
