"""Dialogue data model, JSONL corpus IO, history rendering and splitting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from dstforge._util import dumps_line, largest_remainder, stream_rng
from dstforge.errors import AnnotationInvalid, EmptyCorpus, IndexOutOfRange, MalformedLine
from dstforge.schema import DialogueState, SchemaDef, validate_state

ROLE_TOKENS = {"patient": "[PATIENT]", "doctor": "[DOCTOR]"}


def role_prefix(role: str) -> str:
    return ROLE_TOKENS[role] + " "


@dataclass(frozen=True)
class Utterance:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in ROLE_TOKENS:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.text.strip():
            raise ValueError("utterance text must be nonempty")

    def rendered(self) -> str:
        return role_prefix(self.role) + self.text


@dataclass
class TurnAnnotation:
    intents: set[str] = field(default_factory=set)
    delta: DialogueState = field(default_factory=DialogueState)

    def to_dict(self) -> dict:
        return {"intents": sorted(self.intents), "state": self.delta.slot_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "TurnAnnotation":
        state = DialogueState.from_dict({"intents": data.get("intents") or [], "state": data.get("state") or {}})
        return cls(intents=set(state.intents), delta=DialogueState(intents=set(state.intents), fields=state.fields))


@dataclass
class Dialogue:
    id: str
    turns: list[Utterance]
    annotations: Optional[dict[int, TurnAnnotation]] = None

    @property
    def annotated(self) -> bool:
        return bool(self.annotations)

    def patient_turns(self) -> list[int]:
        return [i for i, u in enumerate(self.turns) if u.role == "patient"]

    def to_dict(self) -> dict:
        d = {"id": self.id, "turns": [{"role": u.role, "text": u.text} for u in self.turns]}
        if self.annotations is not None:
            d["annotations"] = {str(t): a.to_dict() for t, a in sorted(self.annotations.items())}
        return d

    def unlabeled(self) -> "Dialogue":
        return Dialogue(self.id, list(self.turns), None)


@dataclass(frozen=True)
class History:
    text: str
    latest_utterance: Utterance


def _parse_dialogue(obj: dict, line_no: int, schema: Optional[SchemaDef]) -> Dialogue:
    if not isinstance(obj, dict) or "id" not in obj or "turns" not in obj:
        raise MalformedLine(line_no, "expected object with 'id' and 'turns'")
    try:
        turns = [Utterance(t["role"], t["text"]) for t in obj["turns"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(line_no, f"bad turn: {exc}") from exc
    did = str(obj["id"])
    annotations = None
    if obj.get("annotations") is not None:
        annotations = {}
        for raw_t, raw_ann in obj["annotations"].items():
            try:
                t = int(raw_t)
                ann = TurnAnnotation.from_dict(raw_ann)
            except (ValueError, TypeError, KeyError, AttributeError) as exc:
                raise MalformedLine(line_no, f"bad annotation {raw_t!r}: {exc}") from exc
            if not 0 <= t < len(turns):
                raise AnnotationInvalid(did, t, [f"turn index {t} out of range for {len(turns)} turns"])
            if schema is not None:
                problems = validate_state(ann.delta, schema, turns[t].role)
                if problems:
                    raise AnnotationInvalid(did, t, problems)
            annotations[t] = ann
    return Dialogue(did, turns, annotations)


def _is_meta(obj) -> bool:
    return isinstance(obj, dict) and "_meta" in obj


def load_corpus(raw: Union[bytes, str], schema: Optional[SchemaDef] = None) -> list[Dialogue]:
    """Parse a JSONL corpus, validating annotations against ``schema`` when given.

    A leading ``{"_meta": ...}`` header line is skipped.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    out: list[Dialogue] = []
    seen = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
        if _is_meta(obj):
            continue
        d = _parse_dialogue(obj, line_no, schema)
        if d.id in seen:
            raise MalformedLine(line_no, f"duplicate dialogue id {d.id!r}")
        seen.add(d.id)
        out.append(d)
    return out


def dump_corpus(dialogues: Iterable[Dialogue], meta: Optional[dict] = None) -> str:
    lines = [dumps_line({"_meta": meta})] if meta is not None else []
    lines.extend(dumps_line(d.to_dict()) for d in dialogues)
    return "".join(lines)


def render_history(dialogue: Dialogue, t: int) -> History:
    """Role-tagged turns ``0..t`` joined by newlines."""
    if not 0 <= t < len(dialogue.turns):
        raise IndexOutOfRange(f"turn {t} out of range for dialogue {dialogue.id!r} with {len(dialogue.turns)} turns")
    text = "\n".join(u.rendered() for u in dialogue.turns[: t + 1])
    return History(text=text, latest_utterance=dialogue.turns[t])


def split_corpus(
    dialogues: Sequence[Dialogue], ratios: Sequence[int] = (8, 1, 1), seed: int = 42
) -> tuple[list[Dialogue], ...]:
    if not dialogues:
        raise EmptyCorpus("cannot split an empty corpus")
    if any(int(r) != r or r <= 0 for r in ratios):
        raise ValueError("ratios must be positive integers")
    order = list(dialogues)
    stream_rng(seed, "split").shuffle(order)
    sizes = largest_remainder(len(order), ratios)
    parts, start = [], 0
    for n in sizes:
        parts.append(order[start : start + n])
        start += n
    return tuple(parts)
