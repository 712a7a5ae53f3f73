"""Stage-one corpus: descriptive-utterance filtering and descriptive/random mixing."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from dstforge._util import largest_remainder, stream_rng
from dstforge.corpus import Dialogue
from dstforge.errors import NoDescriptiveFound, SingleClassCorpus
from dstforge.prompt import build_pretrain_example

POS, NEG = "descriptive", "other"


def char_ngrams(text: str, orders: Sequence[int] = (1, 2)) -> Counter:
    feats: Counter = Counter()
    for n in orders:
        for i in range(len(text) - n + 1):
            feats[text[i : i + n]] += 1
    return feats


@dataclass
class DescriptiveClassifier:
    """Multinomial naive Bayes over character uni/bigrams with add-one smoothing."""

    log_priors: dict[str, float]
    log_likelihoods: dict[str, dict[str, float]]
    threshold: float = 0.5
    orders: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")

    def score(self, text: str) -> float:
        """Posterior probability that ``text`` is descriptive."""
        feats = char_ngrams(text, self.orders)
        logit = {}
        for cls in (POS, NEG):
            table = self.log_likelihoods[cls]
            logit[cls] = self.log_priors[cls] + sum(c * table[f] for f, c in feats.items() if f in table)
        diff = logit[NEG] - logit[POS]
        if diff > 700:
            return 0.0
        return 1.0 / (1.0 + math.exp(diff))

    def is_descriptive(self, text: str) -> bool:
        return self.score(text) >= self.threshold

    def to_dict(self) -> dict:
        return {
            "log_priors": self.log_priors,
            "log_likelihoods": self.log_likelihoods,
            "threshold": self.threshold,
            "orders": list(self.orders),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DescriptiveClassifier":
        return cls(data["log_priors"], data["log_likelihoods"], data["threshold"], tuple(data["orders"]))

    def dumps(self, meta: Optional[dict] = None) -> str:
        d = self.to_dict()
        if meta is not None:
            d["_meta"] = meta
        return json.dumps(d, ensure_ascii=False)


def train_classifier(
    labeled: Iterable[tuple[str, bool]], threshold: float = 0.5, orders: Sequence[int] = (1, 2)
) -> DescriptiveClassifier:
    docs = {POS: Counter(), NEG: Counter()}
    n_docs = Counter()
    for text, positive in labeled:
        cls = POS if positive else NEG
        n_docs[cls] += 1
        docs[cls].update(char_ngrams(text, orders))
    if not n_docs[POS] or not n_docs[NEG]:
        raise SingleClassCorpus("classifier needs both descriptive and other utterances")
    features = set(docs[POS]) | set(docs[NEG])
    total_docs = n_docs[POS] + n_docs[NEG]
    log_priors = {cls: math.log(n_docs[cls] / total_docs) for cls in (POS, NEG)}
    log_lik = {}
    for cls in (POS, NEG):
        denom = sum(docs[cls].values()) + len(features)
        log_lik[cls] = {f: math.log((docs[cls][f] + 1) / denom) for f in sorted(features)}
    return DescriptiveClassifier(log_priors, log_lik, threshold, tuple(orders))


def labeled_from_corpus(dialogues: Iterable[Dialogue], intent: str = "describe") -> list[tuple[str, bool]]:
    """Annotated patient turns labeled by whether their gold intents include ``intent``."""
    out = []
    for d in dialogues:
        for t, ann in sorted((d.annotations or {}).items()):
            if d.turns[t].role == "patient":
                out.append((d.turns[t].text, intent in ann.intents))
    return out


def mix_sizes(n_desc: int, n_rand: int, ratio: tuple[int, int] = (4, 1), size: Optional[int] = None) -> tuple[int, int]:
    """Descriptive/random counts for the mixed corpus.

    With ``size`` the counts are its largest-remainder apportionment by
    ``ratio``; otherwise the largest total whose apportionment fits both pools.
    """
    if size is not None:
        a, b = largest_remainder(size, ratio)
        if a > n_desc or b > n_rand:
            raise ValueError(f"size {size} needs {a} descriptive and {b} random turns; have {n_desc} and {n_rand}")
        return a, b
    for total in range(n_desc + n_rand, -1, -1):
        a, b = largest_remainder(total, ratio)
        if a <= n_desc and b <= n_rand:
            return a, b
    return 0, 0


def select_pretrain_turns(
    unlabeled: Sequence[Dialogue],
    clf: DescriptiveClassifier,
    ratio: tuple[int, int] = (4, 1),
    seed: int = 42,
    size: Optional[int] = None,
) -> list[tuple[Dialogue, int, str]]:
    """Pick (dialogue, turn, source) triples in output order; source is descriptive/random."""
    if any(r <= 0 for r in ratio):
        raise ValueError("ratio components must be positive")
    pool_a, pool_b = [], []
    for d in unlabeled:
        for t in range(1, len(d.turns)):
            if d.turns[t].role == "patient" and clf.is_descriptive(d.turns[t].text):
                pool_a.append((d, t))
            else:
                pool_b.append((d, t))
    if not pool_a:
        raise NoDescriptiveFound("classifier accepted no utterance")
    a, b = mix_sizes(len(pool_a), len(pool_b), ratio, size)
    rng = stream_rng(seed, "pretrain")
    chosen = [(d, t, POS) for d, t in rng.sample(pool_a, a)]
    chosen += [(d, t, "random") for d, t in rng.sample(pool_b, b)]
    rng.shuffle(chosen)
    return chosen


def build_pretrain_corpus(
    unlabeled: Sequence[Dialogue],
    clf: DescriptiveClassifier,
    ratio: tuple[int, int] = (4, 1),
    seed: int = 42,
    size: Optional[int] = None,
    terminator: str = "</s>",
) -> list[tuple[str, str]]:
    return [
        build_pretrain_example(d, t, terminator)
        for d, t, _ in select_pretrain_turns(unlabeled, clf, ratio, seed, size)
    ]
