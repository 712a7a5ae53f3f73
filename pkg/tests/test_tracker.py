import pytest
from hypothesis import given, settings, strategies as st

from dstforge import shipped_schema
from dstforge.corpus import Dialogue, TurnAnnotation, Utterance
from dstforge.decoder import DecodeConfig
from dstforge.errors import MalformedAnswer
from dstforge.generator import ReplayGenerator
from dstforge.prompt import Strategy
from dstforge.schema import AnswerPattern, DialogueState, ValueInstance, flatten
from dstforge.synth import SynthSpec, generate
from dstforge.tracker import (
    Tracker,
    TurnResult,
    accumulate,
    expected_query_count,
    gold_results,
    lint,
    parse_answer,
    replay_generator,
)

from conftest import example_state

PATTERN = AnswerPattern()


def test_parse_answer_examples():
    assert parse_answer("[PATIENT] I have a, b, c</s>", PATTERN).values == ["a", "b", "c"]
    assert parse_answer("[PATIENT] nothing</s>", PATTERN).values == []
    with pytest.raises(MalformedAnswer):
        parse_answer("garbage", PATTERN)
    with pytest.raises(MalformedAnswer):
        parse_answer("[PATIENT] I have a", PATTERN)
    assert parse_answer("[PATIENT] I have a, b", PATTERN, partial=True).values == ["a", "b"]
    # a truncated none form with an empty value prefix is still the none answer
    assert parse_answer("not", PATTERN.bare(), prefix="", partial=True).values == []
    assert parse_answer("[PATIENT] not", PATTERN, prefix="", partial=True).values == []


def test_example_oracle_delta(example, schema_en):
    tracker = Tracker(schema_en, replay_generator([example], schema_en))
    res = tracker.track_turn(example, 2)
    assert res.intents == {"describe"}
    assert flatten(res.delta) == flatten(example_state())
    assert res.delta.fields["disease"] == []
    assert res.flags == []
    assert res.queries_run == 1 + 2 + 2


def test_all_none_turn(example, schema_en):
    gen = replay_generator([example], schema_en)
    empty = ReplayGenerator({}, gen.vocab, fallback="[PATIENT] nothing</s>")
    res = Tracker(schema_en, empty).track_turn(example, 0)
    assert flatten(res.delta) == set() and res.intents == set()
    assert res.queries_run == 1 + len(schema_en.fields)


def test_two_keys_query_count(schema_en):
    state = DialogueState({"describe"}, {"symptom": [ValueInstance("cough"), ValueInstance("fever")], "disease": []})
    d = Dialogue("two", [Utterance("patient", "I have cough and fever")], {0: TurnAnnotation({"describe"}, state)})
    res = Tracker(schema_en, replay_generator([d], schema_en)).track_turn(d, 0)
    assert res.queries_run == 1 + 2 + 2 * 2
    assert res.queries_run == expected_query_count(schema_en, res.delta)
    assert [i.key for i in res.delta.fields["symptom"]] == ["cough", "fever"]


def test_doctor_turn_rejected(example, schema_en):
    with pytest.raises(ValueError):
        Tracker(schema_en, replay_generator([example], schema_en)).track_turn(example, 1)


def test_accumulate_examples():
    def res(*insts):
        return TurnResult(0, set(), DialogueState(fields={"symptom": list(insts)}))

    out = accumulate([res(ValueInstance("a")), res(ValueInstance("b"))])
    assert {i.key for i in out[1].fields["symptom"]} == {"a", "b"}
    out = accumulate([res(ValueInstance("a", {"extent": "mild"})), res(ValueInstance("a", {"extent": "serious"}))])
    assert out[1].fields["symptom"][0].children == {"extent": "serious"}
    assert out[0].fields["symptom"][0].children == {"extent": "mild"}
    assert accumulate([]) == []


def test_trace_callback(example, schema_en):
    seen = []
    Tracker(schema_en, replay_generator([example], schema_en), trace=seen.append).track_turn(example, 2)
    assert len(seen) == 5 and all({"query", "answer", "steps"} <= set(t) for t in seen)


def test_unconstrained_flag_runs(example, schema_en):
    res = Tracker(schema_en, replay_generator([example], schema_en), unconstrained=True).track_turn(example, 2)
    assert flatten(res.delta) == flatten(example_state())


def test_lint_flags_cross_utterance_value(example, schema_en):
    assert lint([example], schema_en)["unreachable"] == 0
    example.annotations[2].delta.fields["symptom"][0].key = "stomach ache"
    report = lint([example], schema_en)
    assert report["unreachable"] == 1
    assert report["examples"][0]["reason"] == "tokens not in latest utterance"


@pytest.mark.parametrize("strategy", list(Strategy))
def test_oracle_completeness_all_strategies(strategy, synth_zh, schema_zh):
    tracker = Tracker(schema_zh, replay_generator(synth_zh, schema_zh, strategy), strategy)
    for d in synth_zh:
        gold = {g.turn: g for g in gold_results(d)}
        for res in tracker.track_dialogue(d):
            assert flatten(res.delta) == flatten(gold[res.turn].delta)
            assert res.intents == gold[res.turn].intents
            assert res.queries_run == expected_query_count(schema_zh, gold[res.turn].delta)


@given(st.integers(0, 10_000), st.sampled_from(["latin", "cjk"]))
@settings(max_examples=8, deadline=None)
def test_oracle_completeness_property(seed, template_set):
    schema = shipped_schema("en" if template_set == "latin" else "zh")
    corpus = generate(SynthSpec(dialogues=4, seed=seed, template_set=template_set), schema)
    tracker = Tracker(schema, replay_generator(corpus, schema), config=DecodeConfig(search="beam", beam_width=2))
    for d in corpus:
        gold = gold_results(d)
        pred = tracker.track_dialogue(d)
        assert [flatten(p.delta) for p in pred] == [flatten(g.delta) for g in gold]
        cum = accumulate(pred)
        for before, after in zip(cum, cum[1:]):
            two = {t for t in flatten(before) if len(t) == 2}
            assert two <= flatten(after)
