"""Hierarchical state schema: definitions, JSON loading, state validation and flattening."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Union

from dstforge.errors import MalformedJson, SchemaInvalid

ROLES = ("patient", "doctor")
EXTRACTIVE = "extractive"
CATEGORICAL = "categorical"

FlatTuple = tuple  # (field, key) or (field, key, slot, value)


@dataclass(frozen=True)
class AnswerPattern:
    """Scaffold wrapped around every generated answer.

    ``intent_prefix`` is optional and falls back to ``answer_prefix``.
    """

    role_prefix: str = "[PATIENT] "
    answer_prefix: str = "I have "
    separator: str = ", "
    terminator: str = "</s>"
    none_form: str = "nothing"
    child_prefix: str = "I feel "
    intent_prefix: Optional[str] = None

    def violations(self) -> list[str]:
        out = []
        if not self.separator:
            out.append("answer_pattern: separator must be nonempty")
        if not self.terminator:
            out.append("answer_pattern: terminator must be nonempty")
        if self.separator and self.separator == self.terminator:
            out.append("answer_pattern: separator equals terminator")
        if not self.none_form:
            out.append("answer_pattern: none_form must be nonempty")
        elif self.separator and self.separator in self.none_form:
            out.append("answer_pattern: none_form contains separator")
        if self.terminator and self.terminator in self.none_form:
            out.append("answer_pattern: none_form contains terminator")
        return out

    def prefix_for(self, kind: str) -> str:
        if kind == "child":
            return self.child_prefix
        if kind == "intent":
            return self.answer_prefix if self.intent_prefix is None else self.intent_prefix
        return self.answer_prefix

    def bare(self) -> "AnswerPattern":
        """Pattern with role and answer prompts stripped (QA-style baselines)."""
        return AnswerPattern(
            role_prefix="",
            answer_prefix="",
            separator=self.separator,
            terminator=self.terminator,
            none_form=self.none_form,
            child_prefix="",
            intent_prefix="",
        )

    def to_dict(self) -> dict:
        d = {
            "role_prefix": self.role_prefix,
            "answer_prefix": self.answer_prefix,
            "child_prefix": self.child_prefix,
            "separator": self.separator,
            "terminator": self.terminator,
            "none_form": self.none_form,
        }
        if self.intent_prefix is not None:
            d["intent_prefix"] = self.intent_prefix
        return d


@dataclass(frozen=True)
class SlotDef:
    name: str
    kind: Literal["extractive", "categorical"] = EXTRACTIVE
    candidates: tuple[str, ...] = ()
    is_key: bool = False
    question_template: str = ""
    required: bool = False
    # overrides the pattern's answer/child prefix for this slot's answers
    answer_prefix: Optional[str] = None

    @property
    def categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def to_dict(self) -> dict:
        d = {
            "slot": self.name,
            "kind": self.kind,
            "candidates": list(self.candidates),
            "is_key": self.is_key,
            "question": self.question_template,
            "required": self.required,
        }
        if self.answer_prefix is not None:
            d["answer_prefix"] = self.answer_prefix
        return d


@dataclass(frozen=True)
class SchemaDef:
    intents: dict[str, tuple[str, ...]]
    fields: dict[str, tuple[SlotDef, ...]]
    answer_pattern: AnswerPattern
    intent_question: dict[str, str]

    def key_slot(self, field_name: str) -> SlotDef:
        return next(s for s in self.fields[field_name] if s.is_key)

    def child_slots(self, field_name: str) -> list[SlotDef]:
        return [s for s in self.fields[field_name] if not s.is_key]

    def slot(self, field_name: str, slot_name: str) -> SlotDef:
        for s in self.fields[field_name]:
            if s.name == slot_name:
                return s
        raise KeyError(f"{field_name}.{slot_name}")

    def to_dict(self) -> dict:
        return {
            "intents": {r: list(v) for r, v in self.intents.items()},
            "intent_question": dict(self.intent_question),
            "fields": {f: [s.to_dict() for s in slots] for f, slots in self.fields.items()},
            "answer_pattern": self.answer_pattern.to_dict(),
        }


@dataclass
class ValueInstance:
    key: str
    children: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"key": self.key, "children": dict(self.children)}


@dataclass
class DialogueState:
    intents: set[str] = field(default_factory=set)
    fields: dict[str, list[ValueInstance]] = field(default_factory=dict)

    def slot_dict(self) -> dict:
        return {f: [v.to_dict() for v in vs] for f, vs in self.fields.items()}

    def to_dict(self) -> dict:
        return {"intents": sorted(self.intents), "state": self.slot_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueState":
        fields: dict[str, list[ValueInstance]] = {}
        for fname, insts in (data.get("state") or {}).items():
            if not isinstance(insts, list):
                raise ValueError(f"field {fname!r} must hold a list")
            fields[fname] = [
                ValueInstance(key=str(i["key"]), children={str(k): str(v) for k, v in (i.get("children") or {}).items()})
                for i in insts
            ]
        return cls(intents=set(data.get("intents") or ()), fields=fields)


def _parse_slot(field_name: str, raw: dict, errors: list[str]) -> Optional[SlotDef]:
    if not isinstance(raw, dict) or "slot" not in raw:
        errors.append(f"field {field_name}: slot entry missing 'slot' name")
        return None
    kind = raw.get("kind", EXTRACTIVE)
    if kind not in (EXTRACTIVE, CATEGORICAL):
        errors.append(f"slot {field_name}.{raw['slot']}: unknown kind {kind!r}")
    return SlotDef(
        name=str(raw["slot"]),
        kind=kind,
        candidates=tuple(str(c) for c in raw.get("candidates") or ()),
        is_key=bool(raw.get("is_key", False)),
        question_template=str(raw.get("question", "")),
        required=bool(raw.get("required", False)),
        answer_prefix=raw.get("answer_prefix"),
    )


def schema_violations(schema: SchemaDef) -> list[str]:
    errors = list(schema.answer_pattern.violations())
    for role in ROLES:
        if role not in schema.intents:
            errors.append(f"intents: missing role {role}")
        if role not in schema.intent_question:
            errors.append(f"intent_question: missing role {role}")
    for role, names in schema.intents.items():
        if role not in ROLES:
            errors.append(f"intents: unknown role {role}")
        if len(set(names)) != len(names):
            errors.append(f"intents: duplicate intent names for role {role}")
    for fname, slots in schema.fields.items():
        names = [s.name for s in slots]
        if len(set(names)) != len(names):
            errors.append(f"field {fname} has duplicate slot names")
        keys = [s for s in slots if s.is_key]
        if not keys:
            errors.append(f"field {fname} has no key slot")
        elif len(keys) > 1:
            errors.append(f"field {fname} has {len(keys)} key slots")
        for s in slots:
            where = f"slot {fname}.{s.name}"
            if s.categorical:
                if len(s.candidates) < 2:
                    errors.append(f"{where}: categorical slot needs at least 2 candidates")
                if len(set(s.candidates)) != len(s.candidates):
                    errors.append(f"{where}: duplicate candidates")
                if any(not c for c in s.candidates):
                    errors.append(f"{where}: empty candidate")
            elif s.candidates:
                errors.append(f"{where}: extractive slot must not list candidates")
            if s.is_key:
                if s.kind != EXTRACTIVE:
                    errors.append(f"{where}: key slot must be extractive")
                if not s.required:
                    errors.append(f"{where}: key slot must be required")
                if "{value}" in s.question_template:
                    errors.append(f"{where}: key question must not contain {{value}}")
            elif "{value}" not in s.question_template:
                errors.append(f"{where}: question must contain {{value}}")
    return errors


def parse_schema(data: dict) -> SchemaDef:
    if not isinstance(data, dict):
        raise SchemaInvalid(["schema must be a JSON object"])
    errors: list[str] = []
    intents = {str(r): tuple(str(i) for i in v) for r, v in (data.get("intents") or {}).items()}
    fields: dict[str, tuple[SlotDef, ...]] = {}
    raw_fields = data.get("fields") or {}
    if not isinstance(raw_fields, dict):
        raise SchemaInvalid(["fields must be an object"])
    for fname, raw_slots in raw_fields.items():
        slots = [_parse_slot(fname, r, errors) for r in (raw_slots or [])]
        fields[str(fname)] = tuple(s for s in slots if s is not None)
    if "answer_pattern" not in data:
        errors.append("missing answer_pattern")
        pattern = AnswerPattern()
    else:
        known = set(AnswerPattern.__dataclass_fields__)
        raw = data["answer_pattern"] or {}
        extra = set(raw) - known
        if extra:
            errors.append(f"answer_pattern: unknown keys {sorted(extra)}")
        pattern = AnswerPattern(**{k: v for k, v in raw.items() if k in known})
    schema = SchemaDef(
        intents=intents,
        fields=fields,
        answer_pattern=pattern,
        intent_question={str(k): str(v) for k, v in (data.get("intent_question") or {}).items()},
    )
    errors.extend(schema_violations(schema))
    if errors:
        raise SchemaInvalid(errors)
    return schema


def load_schema(raw: Union[bytes, str]) -> SchemaDef:
    """Parse UTF-8 schema JSON into a validated :class:`SchemaDef`."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(str(exc)) from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    return parse_schema(data)


def render_schema(schema: SchemaDef) -> str:
    return json.dumps(schema.to_dict(), ensure_ascii=False, indent=2)


def validate_state(state: DialogueState, schema: SchemaDef, role: str = "patient") -> list[str]:
    """Return every invariant the state breaks against ``schema``; empty means valid."""
    out = []
    allowed = set(schema.intents.get(role, ()))
    for intent in sorted(state.intents):
        if intent not in allowed:
            out.append(f"unknown intent: {intent}")
    for fname, insts in state.fields.items():
        if fname not in schema.fields:
            out.append(f"unknown field: {fname}")
            continue
        slots = {s.name: s for s in schema.fields[fname]}
        seen = set()
        for inst in insts:
            if not inst.key:
                out.append(f"empty key in field {fname}")
            if inst.key in seen:
                out.append(f"duplicate key in field {fname}: {inst.key}")
            seen.add(inst.key)
            for sname, value in inst.children.items():
                s = slots.get(sname)
                if s is None:
                    out.append(f"unknown slot: {fname}.{sname}")
                elif s.is_key:
                    out.append(f"key slot used as child: {fname}.{sname}")
                elif s.categorical and value not in s.candidates:
                    out.append(f"value not in candidates: {fname}.{sname}={value!r}")
                elif not value:
                    out.append(f"empty value: {fname}.{sname}")
    return out


def flatten(state: DialogueState) -> set[FlatTuple]:
    """Flatten a hierarchical state into exact-match tuples; intents are excluded."""
    out = set()
    for fname, insts in state.fields.items():
        for inst in insts:
            out.add((fname, inst.key))
            for sname, value in inst.children.items():
                out.add((fname, inst.key, sname, value))
    return out


def merge_instances(insts: Iterable[ValueInstance]) -> list[ValueInstance]:
    """Collapse duplicate keys, keeping first position; later children win."""
    merged: dict[str, ValueInstance] = {}
    for inst in insts:
        cur = merged.get(inst.key)
        if cur is None:
            merged[inst.key] = ValueInstance(inst.key, dict(inst.children))
        else:
            cur.children.update(inst.children)
    return list(merged.values())
