"""Query construction and answer rendering for the question/answer decomposition."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

from dstforge.corpus import Dialogue, render_history, role_prefix
from dstforge.errors import AnnotationMissing, IndexOutOfRange, UnknownTarget, ValueContainsScaffold
from dstforge.schema import AnswerPattern, SchemaDef

__all__ = [
    "AnswerPattern",
    "ChildSlot",
    "FieldKeys",
    "Intent",
    "Query",
    "Strategy",
    "answer_format",
    "build_finetune_examples",
    "build_pretrain_example",
    "build_query",
    "query_input",
    "render_answer",
]


class Strategy(str, Enum):
    TYPE_NAME = "type_name"
    QUESTION = "question"
    DIALOGUE_STYLE = "dialogue_style"


@dataclass(frozen=True)
class Intent:
    role: str = "patient"


@dataclass(frozen=True)
class FieldKeys:
    field: str


@dataclass(frozen=True)
class ChildSlot:
    field: str
    key_value: str
    slot: str


QueryTarget = Union[Intent, FieldKeys, ChildSlot]


@dataclass(frozen=True)
class Query:
    target: QueryTarget
    text: str
    strategy: Strategy


def _check_target(schema: SchemaDef, target: QueryTarget) -> None:
    if isinstance(target, Intent):
        if target.role not in schema.intents or target.role not in schema.intent_question:
            raise UnknownTarget(f"no intents for role {target.role!r}")
        return
    if not isinstance(target, (FieldKeys, ChildSlot)):
        raise UnknownTarget(f"unsupported target {target!r}")
    if target.field not in schema.fields:
        raise UnknownTarget(f"unknown field {target.field!r}")
    if isinstance(target, ChildSlot):
        names = {s.name for s in schema.child_slots(target.field)}
        if target.slot not in names:
            raise UnknownTarget(f"{target.field}.{target.slot} is not a child slot")


def build_query(schema: SchemaDef, target: QueryTarget, strategy: Strategy = Strategy.DIALOGUE_STYLE) -> Query:
    strategy = Strategy(strategy)
    _check_target(schema, target)
    if isinstance(target, Intent):
        name, template = "intent", schema.intent_question[target.role]
    elif isinstance(target, FieldKeys):
        name, template = target.field, schema.key_slot(target.field).question_template
    else:
        # bare slot names would collide across keys of one turn
        name = f"{target.key_value} {target.slot}"
        template = schema.slot(target.field, target.slot).question_template.replace("{value}", target.key_value)
    if strategy is Strategy.TYPE_NAME:
        text = name
    elif strategy is Strategy.QUESTION:
        text = template
    else:
        text = role_prefix("doctor") + template
    return Query(target=target, text=text, strategy=strategy)


def answer_format(schema: SchemaDef, target: QueryTarget, strategy: Strategy) -> tuple[AnswerPattern, str]:
    """Pattern and value prefix that answers to ``target`` use under ``strategy``."""
    pattern = schema.answer_pattern
    if Strategy(strategy) is not Strategy.DIALOGUE_STYLE:
        return pattern.bare(), ""
    if isinstance(target, Intent):
        return pattern, pattern.prefix_for("intent")
    if isinstance(target, FieldKeys):
        override = schema.key_slot(target.field).answer_prefix
        return pattern, pattern.answer_prefix if override is None else override
    override = schema.slot(target.field, target.slot).answer_prefix
    return pattern, pattern.child_prefix if override is None else override


def render_answer(
    values: Sequence[str], pattern: AnswerPattern, kind: str = "keys", prefix: Union[str, None] = None
) -> str:
    for v in values:
        if pattern.separator in v or pattern.terminator in v:
            raise ValueContainsScaffold(f"value {v!r} contains separator or terminator")
    if not values:
        return pattern.role_prefix + pattern.none_form + pattern.terminator
    if prefix is None:
        prefix = pattern.prefix_for(kind)
    return pattern.role_prefix + prefix + pattern.separator.join(values) + pattern.terminator


def query_input(history_text: str, query: Query) -> str:
    return history_text + "\n" + query.text


def build_finetune_examples(
    dialogue: Dialogue, schema: SchemaDef, strategy: Strategy = Strategy.DIALOGUE_STYLE
) -> list[tuple[str, str]]:
    """Turn every annotated patient turn into (input, answer) pairs in traversal order."""
    if not dialogue.annotations:
        raise AnnotationMissing(f"dialogue {dialogue.id!r} has no annotations")
    out = []
    for t in sorted(dialogue.annotations):
        if dialogue.turns[t].role != "patient":
            continue
        ann = dialogue.annotations[t]
        history = render_history(dialogue, t).text

        def emit(target, values):
            q = build_query(schema, target, strategy)
            pattern, prefix = answer_format(schema, target, strategy)
            out.append((query_input(history, q), render_answer(values, pattern, prefix=prefix)))

        order = schema.intents["patient"]
        emit(Intent("patient"), [i for i in order if i in ann.intents])
        for fname in schema.fields:
            insts = ann.delta.fields.get(fname, [])
            emit(FieldKeys(fname), [i.key for i in insts])
            for inst in insts:
                for slot in schema.child_slots(fname):
                    value = inst.children.get(slot.name)
                    emit(ChildSlot(fname, inst.key, slot.name), [] if value is None else [value])
    return out


def build_pretrain_example(dialogue: Dialogue, t: int, terminator: str = "</s>") -> tuple[str, str]:
    """Response-generation pair: history up to ``t-1`` predicts turn ``t``."""
    if not 1 <= t < len(dialogue.turns):
        raise IndexOutOfRange(f"pretrain example needs 1 <= t < {len(dialogue.turns)}, got {t}")
    utt = dialogue.turns[t]
    return render_history(dialogue, t - 1).text, utt.rendered() + terminator


def schema_texts(schema: SchemaDef) -> list[str]:
    """Every string a tracker may need to encode: candidates, intents and scaffold."""
    p = schema.answer_pattern
    out = [p.role_prefix, p.answer_prefix, p.child_prefix, p.separator, p.none_form, p.intent_prefix or ""]
    out += [i for names in schema.intents.values() for i in names]
    for slots in schema.fields.values():
        for s in slots:
            out += list(s.candidates) + [s.answer_prefix or ""]
    return [t for t in out if t]
