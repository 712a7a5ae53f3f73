"""Exact-match scoring of intents and flattened slot tuples."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Optional, Sequence

from dstforge.errors import EmptyLabelSet, LengthMismatch
from dstforge.schema import DialogueState, flatten


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


@dataclass(frozen=True)
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> Fraction:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Fraction:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> Fraction:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else Fraction(0)

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {
            "precision": float(self.precision),
            "recall": float(self.recall),
            "f1": float(self.f1),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def _check_aligned(pred: Sequence, gold: Sequence) -> None:
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gold)} gold turns")


def set_prf(pred: Sequence[Iterable[Hashable]], gold: Sequence[Iterable[Hashable]]) -> PRF:
    """Micro tp/fp/fn over per-turn set comparisons."""
    _check_aligned(pred, gold)
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        p, g = set(p), set(g)
        hit = len(p & g)
        tp += hit
        fp += len(p) - hit
        fn += len(g) - hit
    return PRF(tp, fp, fn)


def slot_prf(pred: Sequence[DialogueState], gold: Sequence[DialogueState]) -> PRF:
    _check_aligned(pred, gold)
    return set_prf([flatten(s) for s in pred], [flatten(s) for s in gold])


def intent_prf(pred: Sequence[Iterable[str]], gold: Sequence[Iterable[str]]) -> PRF:
    return set_prf(pred, gold)


def per_label_prf(
    pred: Sequence[Iterable[Hashable]],
    gold: Sequence[Iterable[Hashable]],
    labels: Sequence[Hashable],
    label_of: Callable[[Hashable], Hashable] = lambda x: x,
) -> dict:
    _check_aligned(pred, gold)
    out = {}
    for label in labels:
        out[label] = set_prf(
            [{x for x in p if label_of(x) == label} for p in pred],
            [{x for x in g if label_of(x) == label} for g in gold],
        )
    return out


def macro_f1(
    pred: Sequence[Iterable[Hashable]],
    gold: Sequence[Iterable[Hashable]],
    labels: Sequence[Hashable],
    label_of: Callable[[Hashable], Hashable] = lambda x: x,
    exclude_absent: bool = False,
) -> Fraction:
    """Unweighted mean of per-label F1.

    Labels that never occur in either side score 0 unless ``exclude_absent``.
    """
    if not labels:
        raise EmptyLabelSet("macro F1 needs at least one label")
    table = per_label_prf(pred, gold, labels, label_of)
    scores = [prf.f1 for prf in table.values() if not (exclude_absent and prf.tp + prf.fp + prf.fn == 0)]
    if not scores:
        return Fraction(0)
    return sum(scores, Fraction(0)) / len(scores)


def turn_accuracy(pred: Sequence[Iterable[Hashable]], gold: Sequence[Iterable[Hashable]]) -> Fraction:
    _check_aligned(pred, gold)
    if not gold:
        return Fraction(0)
    return Fraction(sum(set(p) == set(g) for p, g in zip(pred, gold)), len(gold))


def evaluate(
    pred_states: Sequence[DialogueState],
    gold_states: Sequence[DialogueState],
    field_names: Optional[Sequence[str]] = None,
    intent_labels: Optional[Sequence[str]] = None,
) -> dict:
    """Full report: micro/macro PRF for intents and slots plus turn accuracy."""
    _check_aligned(pred_states, gold_states)
    p_tuples = [flatten(s) for s in pred_states]
    g_tuples = [flatten(s) for s in gold_states]
    p_int = [s.intents for s in pred_states]
    g_int = [s.intents for s in gold_states]
    if field_names is None:
        field_names = sorted({t[0] for ts in p_tuples + g_tuples for t in ts})
    if intent_labels is None:
        intent_labels = sorted({i for s in p_int + g_int for i in s})
    per_field = per_label_prf(p_tuples, g_tuples, field_names, label_of=lambda t: t[0])
    report = {
        "turns": len(gold_states),
        "intent": intent_prf(p_int, g_int).to_dict(),
        "slot": slot_prf(pred_states, gold_states).to_dict(),
        "macro_f1": float(macro_f1(p_tuples, g_tuples, field_names, lambda t: t[0])) if field_names else 0.0,
        "turn_accuracy": float(turn_accuracy(p_tuples, g_tuples)),
        "per_field": {f: prf.to_dict() for f, prf in per_field.items()},
    }
    report["intent"]["macro_f1"] = float(macro_f1(p_int, g_int, intent_labels)) if intent_labels else 0.0
    report["intent"]["turn_accuracy"] = float(turn_accuracy(p_int, g_int))
    return report
