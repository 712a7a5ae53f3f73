"""Add-k smoothed token n-gram model with backoff and two-stage training."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from typing import Iterable, Optional, Sequence

import numpy as np

from dstforge.errors import EmptyTrainingSet
from dstforge.generator.base import Session
from dstforge.generator.vocab import CHARACTER, Vocab

FORMAT = "dstforge-ngram/1"
_CACHE_LIMIT = 200_000


SMOOTHING = ("backoff", "interpolated")


class NGramModel:
    """Counts of every order ``1..n``.

    ``counts[m][ctx]`` maps next-token id to a (possibly weighted) count, with
    ``ctx`` the ``m`` preceding token ids.

    With ``smoothing="backoff"`` scoring uses add-k on the longest seen
    context. With ``"interpolated"`` the ``k * |V|`` pseudo-counts of each
    seen context are spread by the next-lower order's distribution instead of
    uniformly, which is plain add-k again at order 1.

    ``copy_boost`` (default off) makes sessions a cache model: the probability
    of every non-scaffold token occurring in the last ``copy_window`` input
    tokens is multiplied by ``1 + copy_boost`` and the result renormalised.
    """

    def __init__(
        self,
        order: int,
        k: float,
        vocab: Vocab,
        counts: Optional[list[dict]] = None,
        smoothing: str = "backoff",
        copy_boost: float = 0.0,
        copy_window: int = 48,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not k > 0:
            raise ValueError("smoothing constant k must be positive")
        if smoothing not in SMOOTHING:
            raise ValueError(f"unknown smoothing {smoothing!r}")
        self.order = order
        self.k = float(k)
        self.smoothing = smoothing
        if copy_boost < 0 or copy_window < 1:
            raise ValueError("copy_boost must be >= 0 and copy_window >= 1")
        self.copy_boost = float(copy_boost)
        self.copy_window = int(copy_window)
        self.vocab = vocab
        self.counts: list[dict[tuple, dict[int, float]]] = counts if counts is not None else [{} for _ in range(order)]
        self._totals = [{ctx: sum(nxt.values()) for ctx, nxt in table.items()} for table in self.counts]
        self._cache: dict[tuple, np.ndarray] = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def log_probs(self, history: Sequence[int]) -> np.ndarray:
        """Log-distribution over the vocab given the token history."""
        history = tuple(history[-(self.order - 1):]) if self.order > 1 else ()
        cached = self._cache.get(history)
        if cached is not None:
            return cached
        size = len(self.vocab)
        top = min(self.order - 1, len(history))
        if self.smoothing == "interpolated":
            probs = np.full(size, 1.0 / size)
            for m in range(top + 1):
                ctx = history[len(history) - m:]
                total = self._totals[m].get(ctx, 0.0)
                if total > 0:
                    probs = probs * (self.k * size)
                    for tok, c in self.counts[m][ctx].items():
                        probs[tok] += c
                    probs /= total + self.k * size
        else:
            probs = None
            for m in range(top, -1, -1):
                ctx = history[len(history) - m:]
                total = self._totals[m].get(ctx, 0.0)
                if total > 0:
                    probs = np.full(size, self.k)
                    for tok, c in self.counts[m][ctx].items():
                        probs[tok] += c
                    probs /= total + self.k * size
                    break
            if probs is None:
                probs = np.full(size, 1.0 / size)
        out = np.log(probs)
        out.setflags(write=False)
        if len(self._cache) > _CACHE_LIMIT:
            self._cache.clear()
        self._cache[history] = out
        return out

    def start(self, input_text: str) -> "NGramSession":
        return NGramSession(self, self.vocab.encode(input_text))

    def copy_mask(self, context: Sequence[int]) -> Optional[np.ndarray]:
        if not self.copy_boost:
            return None
        special = {self.vocab.terminator_id, self.vocab.unknown_id}
        special.update(self.vocab.index[a] for a in self.vocab.atomic if a in self.vocab.index)
        mask = np.zeros(len(self.vocab), dtype=bool)
        for tok in context[-self.copy_window:]:
            if tok not in special:
                mask[tok] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "order": self.order,
            "k": self.k,
            "smoothing": self.smoothing,
            "copy_boost": self.copy_boost,
            "copy_window": self.copy_window,
            "vocab": self.vocab.to_dict(),
            "counts": [
                [[list(ctx), [[tok, c] for tok, c in sorted(nxt.items())]] for ctx, nxt in sorted(table.items())]
                for table in self.counts
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NGramModel":
        if data.get("format") != FORMAT:
            raise ValueError(f"not an n-gram model file (format={data.get('format')!r})")
        counts = [
            {tuple(ctx): {int(tok): float(c) for tok, c in nxt} for ctx, nxt in table} for table in data["counts"]
        ]
        return cls(
            data["order"],
            data["k"],
            Vocab.from_dict(data["vocab"]),
            counts,
            data.get("smoothing", "backoff"),
            data.get("copy_boost", 0.0),
            data.get("copy_window", 48),
        )

    def dumps(self, meta: Optional[dict] = None) -> str:
        d = self.to_dict()
        if meta is not None:
            d["_meta"] = meta
        return json.dumps(d, ensure_ascii=False)

    @classmethod
    def loads(cls, text: str) -> "NGramModel":
        return cls.from_dict(json.loads(text))


class NGramSession(Session):
    def __init__(self, model: NGramModel, context: list[int]):
        super().__init__(len(model.vocab))
        self.model = model
        self.context = context
        mask = model.copy_mask(context)
        self._boost = None if mask is None else np.where(mask, math.log1p(model.copy_boost), 0.0)

    def _score(self, emitted):
        n = self.model.order - 1
        if n == 0:
            out = self.model.log_probs(())
        else:
            tail = tuple(self.context[-n:]) + emitted if len(emitted) < n else emitted
            out = self.model.log_probs(tail)
        if self._boost is None:
            return out
        out = out + self._boost
        top = out.max()
        return out - (top + math.log(np.exp(out - top).sum()))


def count_answer_transitions(vocab: Vocab, examples: Iterable[tuple[str, str]], order: int) -> list[dict]:
    """Counts over ``input + answer`` token streams, only where the predicted token is in the answer."""
    counts: list[dict] = [defaultdict(lambda: defaultdict(float)) for _ in range(order)]
    for input_text, answer_text in examples:
        prefix = vocab.encode(input_text)
        stream = prefix + vocab.encode(answer_text)
        for i in range(len(prefix), len(stream)):
            tok = stream[i]
            for m in range(order):
                if i - m < 0:
                    break
                counts[m][tuple(stream[i - m:i])][tok] += 1.0
    return [{ctx: dict(nxt) for ctx, nxt in table.items()} for table in counts]


def train_ngram(
    examples: Sequence[tuple[str, str]],
    n: int = 4,
    k: float = 0.01,
    stage: str = "pretrain",
    base: Optional[NGramModel] = None,
    weight: float = 1.0,
    vocab: Optional[Vocab] = None,
    extra_texts: Iterable[str] = (),
    mode: str = CHARACTER,
    atomic: Iterable[str] = (),
    smoothing: Optional[str] = None,
    copy_boost: Optional[float] = None,
    copy_window: Optional[int] = None,
) -> NGramModel:
    """Train (or fine-tune onto ``base``) an n-gram model on (input, answer) pairs.

    Fine-tuning starts from ``weight`` times the base counts; the vocab is the
    base vocab extended with any new tokens. ``smoothing`` defaults to the
    base model's, else ``"backoff"``; likewise ``copy_boost`` (else 0) and
    ``copy_window``.
    """
    if stage not in ("pretrain", "finetune"):
        raise ValueError(f"unknown stage {stage!r}")
    if stage == "finetune" and base is None:
        raise ValueError("finetune stage requires a base model")
    examples = list(examples)
    if not examples:
        raise EmptyTrainingSet("no training examples")
    texts = [t for ex in examples for t in ex] + list(extra_texts)
    if base is not None:
        if n != base.order:
            raise ValueError(f"order {n} does not match base model order {base.order}")
        vocab = base.vocab.extend(texts)
    elif vocab is None:
        vocab = Vocab.build(texts, mode=mode, atomic=atomic)
    else:
        vocab = vocab.extend(texts)
    counts = count_answer_transitions(vocab, examples, n)
    if base is not None and weight != 0:
        for m in range(n):
            table = counts[m]
            for ctx, nxt in base.counts[m].items():
                row = table.setdefault(ctx, {})
                for tok, c in nxt.items():
                    row[tok] = row.get(tok, 0.0) + weight * c
    if smoothing is None:
        smoothing = base.smoothing if base is not None else "backoff"
    if copy_boost is None:
        copy_boost = base.copy_boost if base is not None else 0.0
    if copy_window is None:
        copy_window = base.copy_window if base is not None else 48
    return NGramModel(n, k, vocab, counts, smoothing, copy_boost, copy_window)


def distribution_sum(model: NGramModel, history: Sequence[int]) -> float:
    return float(math.fsum(np.exp(model.log_probs(history))))
