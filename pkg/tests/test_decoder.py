from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dstforge.decoder import (
    EMPTY_VALID_SET,
    LENGTH_EXCEEDED,
    DecodeConfig,
    accepted_values,
    beam_decode,
    build_trie,
    categorical_constraint,
    decode,
    extractive_constraint,
    greedy_decode,
)
from dstforge.errors import EmptyValidSet, UntokenizableCandidate
from dstforge.generator import OracleGenerator, Session, Vocab, scaffold_atoms, train_ngram
from dstforge.schema import AnswerPattern
from dstforge.tracker import parse_answer

EN = AnswerPattern()
ZH = AnswerPattern(answer_prefix="我有", child_prefix="我感觉", none_form="没有")
BARE = EN.bare()


def vocab_for(*texts, pattern=EN):
    return Vocab.build(list(texts) + [pattern.role_prefix, pattern.answer_prefix, pattern.none_form, pattern.separator],
                       atomic=scaffold_atoms(pattern))


class Scripted(Session):
    """Scores from a fixed per-token preference table (higher is better)."""

    def __init__(self, scores):
        super().__init__(len(scores))
        self.scores = np.asarray(scores, dtype=float)

    def _score(self, emitted):
        return self.scores


class Random(Session):
    def __init__(self, size, seed):
        super().__init__(size)
        self.seed = seed

    def _score(self, emitted):
        return np.random.default_rng([self.seed, len(emitted), *emitted]).standard_normal(self.vocab_size)


# -- trie ---------------------------------------------------------------------


def test_true_false_trie():
    vocab = Vocab.build(["true", "false"])
    trie = build_trie(["true", "false"], vocab)
    assert len(trie) - 1 == 9
    assert sum(trie.terminal) == 2
    assert len(trie.children[trie.root]) == 2


def test_single_candidate_trie():
    vocab = Vocab.build(["a"])
    trie = build_trie(["a"], vocab)
    assert len(trie) == 2 and trie.terminal == [False, True]


def test_prefix_candidate_trie():
    vocab = Vocab.build(["abc"])
    trie = build_trie(["ab", "abc"], vocab)
    node = trie.step(trie.step(trie.root, vocab.index["a"]), vocab.index["b"])
    assert trie.terminal[node] and trie.children[node]


def test_trie_rejects_bad_candidates():
    vocab = Vocab.build(["ab"])
    with pytest.raises(UntokenizableCandidate):
        build_trie(["az"], vocab)
    with pytest.raises(UntokenizableCandidate):
        build_trie([], vocab)


# -- valid sets -----------------------------------------------------------------


def test_extractive_valid_set_mid_value():
    utt = "我的头感到有点疼"
    vocab = vocab_for(utt, "咳嗽", pattern=ZH)
    c = extractive_constraint(vocab, ZH, ZH.answer_prefix, utt)
    state = c.initial()
    for tok in vocab.encode("[PATIENT] 我有头"):
        state = c.step(state, tok)
    valid = {vocab.tokens[t] for t in c.valid(state)}
    assert {"疼", ", ", "</s>"} <= valid
    assert "头" not in valid  # budget of one used up
    assert valid - {", ", "</s>"} <= set(utt)
    assert "咳" not in valid


def test_role_prefix_phase_is_forced():
    vocab = vocab_for("abc")
    c = extractive_constraint(vocab, EN, EN.answer_prefix, "abc")
    assert c.phase(c.initial()) == "RolePrefix"
    assert c.valid(c.initial()) == [vocab.index["[PATIENT] "]]


def test_categorical_root_bare_pattern():
    vocab = vocab_for("true", "false", pattern=BARE)
    c = categorical_constraint(vocab, BARE, "", ["true", "false"])
    state = c.initial()
    for tok in vocab.encode(BARE.role_prefix):
        state = c.step(state, tok)
    expected = {vocab.index["t"], vocab.index["f"], vocab.encode(BARE.none_form)[0]}
    assert set(c.valid(state)) == expected


def test_categorical_root_after_answer_prefix():
    vocab = vocab_for("true", "false")
    c = categorical_constraint(vocab, EN, "It is ", ["true", "false"])
    state = c.initial()
    # after the role token the none branch and the prefix branch diverge
    state = c.step(state, vocab.index["[PATIENT] "])
    assert set(c.valid(state)) == {vocab.index["n"], vocab.index["I"]}
    for tok in vocab.encode("It is "):
        state = c.step(state, tok)
    assert set(c.valid(state)) == {vocab.index["t"], vocab.index["f"]}


def test_categorical_rejects_scaffold_candidate():
    vocab = vocab_for("a, b")
    with pytest.raises(UntokenizableCandidate):
        categorical_constraint(vocab, EN, "", ["a, b", "c"])


# -- search ---------------------------------------------------------------------


def test_oracle_extractive_reproduction():
    gold = "[PATIENT] I have headache</s>"
    utt = "I have a headache today"
    vocab = vocab_for(utt, gold)
    c = extractive_constraint(vocab, EN, EN.answer_prefix, utt)
    for cfg in (DecodeConfig(), DecodeConfig(search="beam", beam_width=3)):
        assert decode(OracleGenerator(gold, vocab).start(""), c, cfg).text == gold


def test_discontinuous_value_from_trained_model():
    utt = "我的头感到有点疼"
    pairs = [(f"[PATIENT] {utt}\n[DOCTOR] 你有什么症状？", "[PATIENT] 我有头疼</s>")] * 3
    model = train_ngram(pairs, n=4, atomic=scaffold_atoms(ZH), extra_texts=[ZH.none_form, ZH.separator])
    c = extractive_constraint(model.vocab, ZH, ZH.answer_prefix, utt)
    result = decode(model.start(f"[PATIENT] {utt}\n[DOCTOR] 你有什么症状？"), c)
    assert parse_answer(result.text, ZH).values == ["头疼"]


def test_out_of_utterance_preference_is_blocked():
    utt = "abc"
    vocab = vocab_for(utt, "xyz")
    scores = np.zeros(len(vocab))
    scores[vocab.index["x"]] = 10.0
    c = extractive_constraint(vocab, EN, EN.answer_prefix, utt)
    result = greedy_decode(Scripted(scores), c)
    assert "x" not in result.text
    parse_answer(result.text, EN)


def test_forced_steps_have_single_choice():
    vocab = vocab_for("abc")
    c = extractive_constraint(vocab, EN, EN.answer_prefix, "abc")
    result = greedy_decode(Random(len(vocab), 1), c)
    # role token, then either the none branch or the prefix; both forced after their first token
    assert result.trace[0]["valid"] == 1


def test_length_exceeded_flag():
    vocab = vocab_for("aaaaaaaaaa")
    scores = np.zeros(len(vocab))
    scores[vocab.index["a"]] = 5.0
    c = extractive_constraint(vocab, EN, EN.answer_prefix, "aaaaaaaaaa")
    result = greedy_decode(Scripted(scores), c, DecodeConfig(max_answer_tokens=12))
    assert LENGTH_EXCEEDED in result.flags
    assert parse_answer(result.text, EN, partial=True).values


def test_empty_valid_set_policy():
    vocab = vocab_for("abc")
    c = extractive_constraint(vocab, EN, EN.answer_prefix, "abc")
    # a state with no threads has no valid continuation
    c.initial = lambda: frozenset()
    result = greedy_decode(Random(len(vocab), 0), c)
    assert EMPTY_VALID_SET in result.flags and result.text == "[PATIENT] nothing</s>"
    with pytest.raises(EmptyValidSet):
        greedy_decode(Random(len(vocab), 0), c, DecodeConfig(on_empty_valid_set="error"))


def test_beam_prefers_better_full_answer():
    # the none answer is cheap to start but a value answer scores higher overall
    vocab = vocab_for("ab")
    gold = "[PATIENT] I have ab</s>"
    c = extractive_constraint(vocab, EN, EN.answer_prefix, "ab")
    result = beam_decode(OracleGenerator(gold, vocab, noise=0.5, seed=2).start(""), c,
                         DecodeConfig(search="beam", beam_width=4))
    assert result.text == gold


# -- properties ---------------------------------------------------------------

_utt = st.text(alphabet="abcde f", min_size=1, max_size=12)


@given(_utt, st.integers(0, 10_000), st.integers(1, 5))
@settings(max_examples=150, deadline=None)
def test_safety_extractive(utt, seed, width):
    vocab = vocab_for(utt, "xyz q")
    c = extractive_constraint(vocab, EN, EN.answer_prefix, utt, max_values=3)
    cfg = DecodeConfig(search="beam", beam_width=width, max_answer_tokens=40)
    result = decode(Random(len(vocab), seed), c, cfg)
    values = parse_answer(result.text, EN, partial=LENGTH_EXCEEDED in result.flags).values
    budget = Counter(vocab.tokenize(utt))
    for v in values:
        assert not Counter(vocab.tokenize(v)) - budget


@given(st.lists(st.text(alphabet="abc", min_size=1, max_size=4), min_size=1, max_size=6, unique=True),
       st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_safety_categorical(cands, seed):
    vocab = vocab_for(*cands, "xyz")
    c = categorical_constraint(vocab, EN, EN.answer_prefix, cands, max_values=3)
    result = decode(Random(len(vocab), seed), c, DecodeConfig(max_answer_tokens=60))
    values = parse_answer(result.text, EN, partial=LENGTH_EXCEEDED in result.flags).values
    if LENGTH_EXCEEDED not in result.flags:
        assert set(values) <= set(cands)


@given(_utt, st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_width_one_beam_equals_greedy(utt, seed):
    vocab = vocab_for(utt)
    c = extractive_constraint(vocab, EN, EN.answer_prefix, utt)
    g = greedy_decode(Random(len(vocab), seed), c)
    b = beam_decode(Random(len(vocab), seed), c, DecodeConfig(search="beam", beam_width=1))
    assert g.token_ids == b.token_ids


@given(st.lists(st.text(alphabet="abc", min_size=1, max_size=4), min_size=1, max_size=12, unique=True))
@settings(max_examples=100, deadline=None)
def test_trie_accepts_exactly_candidates(cands):
    vocab = vocab_for("abc")
    c = categorical_constraint(vocab, EN, EN.answer_prefix, cands)
    assert accepted_values(c) == {tuple(vocab.encode(x)) for x in cands}


def test_value_never_spells_the_separator():
    # "," and " " are both in the utterance, but together they would read as the separator
    utt = "a,b c"
    vocab = vocab_for(utt)
    scores = np.zeros(len(vocab))
    scores[vocab.index[","]] = 9.0
    scores[vocab.index[" "]] = 8.0
    c = extractive_constraint(vocab, EN, EN.answer_prefix, utt)
    result = greedy_decode(Scripted(scores), c)
    values = parse_answer(result.text, EN).values
    assert all(", " not in v for v in values)
    for v in values:
        assert not Counter(vocab.tokenize(v)) - Counter(vocab.tokenize(utt))
