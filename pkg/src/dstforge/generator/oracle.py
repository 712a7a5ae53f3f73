"""Gold-replay generators used to isolate the constraint and parsing path."""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from dstforge.errors import UntokenizableGold
from dstforge.generator.base import NEG_INF, Session
from dstforge.generator.vocab import Vocab


def _encode_gold(vocab: Vocab, gold: str) -> list[int]:
    try:
        return vocab.encode_strict(gold)
    except KeyError as exc:
        raise UntokenizableGold(f"gold answer {gold!r} has out-of-vocabulary token {exc.args[0]!r}") from None


class OracleSession(Session):
    def __init__(self, vocab: Vocab, gold_ids: list[int], noise: float = 0.0, seed: int = 0):
        super().__init__(len(vocab))
        self.gold_ids = gold_ids
        self.terminator_id = vocab.terminator_id
        self.noise = noise
        self.seed = seed

    def _score(self, emitted):
        pos = len(emitted)
        target = self.gold_ids[pos] if pos < len(self.gold_ids) else self.terminator_id
        scores = np.full(self.vocab_size, NEG_INF)
        scores[target] = 0.0
        if self.noise:
            rng = np.random.default_rng([self.seed, pos, *emitted])
            scores = scores + self.noise * rng.standard_normal(self.vocab_size)
        return scores


class OracleGenerator:
    """Always prefers the next token of one fixed gold answer."""

    def __init__(self, gold_answer: str, vocab: Vocab, noise: float = 0.0, seed: int = 0):
        self.vocab = vocab
        self.gold_ids = _encode_gold(vocab, gold_answer)
        self.noise = noise
        self.seed = seed

    def start(self, input_text: str) -> OracleSession:
        return OracleSession(self.vocab, self.gold_ids, self.noise, self.seed)


def oracle_generator(gold_answer: str, vocab: Vocab, noise: float = 0.0, seed: int = 0) -> OracleGenerator:
    return OracleGenerator(gold_answer, vocab, noise, seed)


class ReplayGenerator:
    """Replays the gold answer registered for each exact input text.

    Inputs without a registered answer replay ``fallback`` (typically the
    empty answer), or raise ``KeyError`` when no fallback is set.
    """

    def __init__(self, answers: Mapping[str, str], vocab: Vocab, fallback: Optional[str] = None):
        self.vocab = vocab
        self._answers = {k: _encode_gold(vocab, v) for k, v in answers.items()}
        self._fallback = None if fallback is None else _encode_gold(vocab, fallback)

    def start(self, input_text: str) -> OracleSession:
        gold = self._answers.get(input_text, self._fallback)
        if gold is None:
            raise KeyError(f"no gold answer registered for input ending {input_text[-40:]!r}")
        return OracleSession(self.vocab, gold)
