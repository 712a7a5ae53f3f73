import pytest
from hypothesis import given, strategies as st

from dstforge.corpus import Dialogue, Utterance
from dstforge.errors import AnnotationMissing, IndexOutOfRange, UnknownTarget, ValueContainsScaffold
from dstforge.prompt import (
    ChildSlot,
    FieldKeys,
    Intent,
    Strategy,
    build_finetune_examples,
    build_pretrain_example,
    build_query,
    render_answer,
    schema_texts,
)
from dstforge.schema import AnswerPattern
from dstforge.tracker import parse_answer

PATTERN = AnswerPattern()


def test_dialogue_style_key_query(schema_en):
    assert build_query(schema_en, FieldKeys("symptom")).text == "[DOCTOR] What symptoms do you have?"


def test_dialogue_style_child_query(schema_en):
    q = build_query(schema_en, ChildSlot("symptom", "headache", "extent"))
    assert q.text == "[DOCTOR] How is your headache?"


def test_type_name_and_question(schema_en):
    assert build_query(schema_en, FieldKeys("symptom"), Strategy.TYPE_NAME).text == "symptom"
    assert build_query(schema_en, FieldKeys("symptom"), Strategy.QUESTION).text == "What symptoms do you have?"
    child = build_query(schema_en, ChildSlot("symptom", "cough", "extent"), Strategy.TYPE_NAME)
    assert child.text == "cough extent"


def test_intent_query(schema_en):
    assert build_query(schema_en, Intent("patient")).text == "[DOCTOR] What do you want to do?"


def test_unknown_targets(schema_en):
    with pytest.raises(UnknownTarget):
        build_query(schema_en, FieldKeys("weather"))
    with pytest.raises(UnknownTarget):
        build_query(schema_en, ChildSlot("symptom", "x", "name"))


def test_render_answer_examples():
    assert render_answer(["headache"], PATTERN) == "[PATIENT] I have headache</s>"
    assert render_answer([], PATTERN) == "[PATIENT] nothing</s>"
    assert render_answer(["a", "b", "c"], PATTERN) == "[PATIENT] I have a, b, c</s>"
    assert render_answer(["bad"], PATTERN, kind="child") == "[PATIENT] I feel bad</s>"


def test_render_rejects_scaffold():
    with pytest.raises(ValueContainsScaffold):
        render_answer(["a, b"], PATTERN)


def test_finetune_examples_worked_example(example, schema_en):
    pairs = build_finetune_examples(example, schema_en)
    history = (
        "[PATIENT] I feel uncomfortable.\n[DOCTOR] What's wrong with you?\n[PATIENT] My head sometimes feels painful."
    )
    assert (history + "\n[DOCTOR] What symptoms do you have?", "[PATIENT] I have head feels painful</s>") in pairs
    assert (history + "\n[DOCTOR] How is your head feels painful?", "[PATIENT] I feel sometimes</s>") in pairs
    assert (history + "\n[DOCTOR] What diseases have you had?", "[PATIENT] nothing</s>") in pairs
    assert (history + "\n[DOCTOR] What do you want to do?", "[PATIENT] I want to describe</s>") in pairs
    # intent, two key queries, two child slots of the one symptom
    assert len(pairs) == 1 + 2 + 2


def test_finetune_needs_annotations(example, schema_en):
    with pytest.raises(AnnotationMissing):
        build_finetune_examples(example.unlabeled(), schema_en)


def test_finetune_count_formula(synth_zh, schema_zh):
    for d in synth_zh:
        expected = 0
        for ann in d.annotations.values():
            expected += 1 + len(schema_zh.fields)
            for fname, insts in ann.delta.fields.items():
                expected += len(insts) * (len(schema_zh.fields[fname]) - 1)
        assert len(build_finetune_examples(d, schema_zh)) == expected


def test_pretrain_example(example):
    inp, ans = build_pretrain_example(example, 2)
    assert inp == "[PATIENT] I feel uncomfortable.\n[DOCTOR] What's wrong with you?"
    assert ans == "[PATIENT] My head sometimes feels painful.</s>"
    with pytest.raises(IndexOutOfRange):
        build_pretrain_example(example, 0)
    two = Dialogue("x", [Utterance("patient", "hi"), Utterance("doctor", "hello")])
    assert build_pretrain_example(two, 1)[1] == "[DOCTOR] hello</s>"


def test_schema_texts_cover_candidates(schema_en):
    texts = schema_texts(schema_en)
    for needed in ("true", "false", "describe", "nothing", ", ", "It is "):
        assert needed in texts


_value = st.text(alphabet="abc ,xyz</>", min_size=1, max_size=6).filter(
    lambda v: ", " not in v and "</s>" not in v and v == v.strip()
)


@given(st.lists(_value, max_size=5))
def test_parse_render_round_trip(values):
    assert parse_answer(render_answer(values, PATTERN), PATTERN).values == values


@given(st.lists(_value, max_size=5))
def test_separator_count(values):
    text = render_answer(values, PATTERN)
    assert text.count(PATTERN.separator) == max(0, len(values) - 1)
