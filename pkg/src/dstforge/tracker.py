"""Per-turn state tracking: top-down query traversal, answer parsing, accumulation, lint."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from dstforge.corpus import Dialogue, render_history
from dstforge.decoder import (
    Constraint,
    DecodeConfig,
    LENGTH_EXCEEDED,
    TokenTrie,
    build_trie,
    categorical_constraint,
    decode,
    extractive_constraint,
    free_constraint,
)
from dstforge.errors import DstError, MalformedAnswer, ProtocolError
from dstforge.generator.oracle import ReplayGenerator
from dstforge.generator.vocab import CHARACTER, Tokenizer, Vocab, scaffold_atoms
from dstforge.prompt import (
    ChildSlot,
    FieldKeys,
    Intent,
    Strategy,
    answer_format,
    build_finetune_examples,
    build_query,
    query_input,
    render_answer,
    schema_texts,
)
from dstforge.schema import AnswerPattern, DialogueState, SchemaDef, ValueInstance, merge_instances


@dataclass
class ParsedAnswer:
    values: list[str]


def parse_answer(
    text: str,
    pattern: AnswerPattern,
    prefix_kind: str = "keys",
    prefix: Optional[str] = None,
    partial: bool = False,
) -> ParsedAnswer:
    """Invert :func:`dstforge.prompt.render_answer`.

    With ``partial`` the terminator may be missing and empty segments are
    dropped instead of rejected (truncated decodes).
    """
    if prefix is None:
        prefix = pattern.prefix_for(prefix_kind)
    if not text.startswith(pattern.role_prefix):
        raise MalformedAnswer(f"missing role prefix in {text!r}")
    body = text[len(pattern.role_prefix):]
    if body.endswith(pattern.terminator):
        body = body[: -len(pattern.terminator)]
    elif not partial:
        raise MalformedAnswer(f"missing terminator in {text!r}")
    if body == pattern.none_form:
        return ParsedAnswer([])
    if partial and not prefix and pattern.none_form.startswith(body):
        # with an empty value prefix a cut-off none form reads like a value
        return ParsedAnswer([])
    if not body.startswith(prefix):
        if partial and (prefix.startswith(body) or pattern.none_form.startswith(body)):
            return ParsedAnswer([])
        raise MalformedAnswer(f"missing answer prefix {prefix!r} in {text!r}")
    values = [v.strip() for v in body[len(prefix):].split(pattern.separator)]
    if partial:
        values = [v for v in values if v]
    elif any(not v for v in values):
        raise MalformedAnswer(f"empty value segment in {text!r}")
    return ParsedAnswer(values)


@dataclass
class TurnResult:
    turn: int
    intents: set[str]
    delta: DialogueState
    queries_run: int = 0
    flags: list[str] = field(default_factory=list)
    dialogue_id: str = ""

    def to_dict(self, cumulative: Optional[DialogueState] = None) -> dict:
        d = {
            "dialogue_id": self.dialogue_id,
            "turn": self.turn,
            "intents": sorted(self.intents),
            "delta": self.delta.slot_dict(),
            "queries_run": self.queries_run,
            "flags": list(self.flags),
        }
        if cumulative is not None:
            d["cumulative"] = cumulative.slot_dict()
        return d


class Tracker:
    """Runs the intent -> field keys -> child slots traversal for one configuration.

    ``unconstrained`` swaps every constraint for the full vocabulary (ablation).
    """

    def __init__(
        self,
        schema: SchemaDef,
        generator,
        strategy: Strategy = Strategy.DIALOGUE_STYLE,
        config: DecodeConfig = DecodeConfig(),
        unconstrained: bool = False,
        trace: Optional[Callable[[dict], None]] = None,
    ):
        self.schema = schema
        self.generator = generator
        self.vocab = generator.vocab
        self.strategy = Strategy(strategy)
        self.config = config
        self.unconstrained = unconstrained
        self.trace = trace
        self._tries: dict[tuple, TokenTrie] = {}

    def _trie(self, candidates: Sequence[str]) -> TokenTrie:
        key = tuple(candidates)
        if key not in self._tries:
            self._tries[key] = build_trie(candidates, self.vocab)
        return self._tries[key]

    def _ask(self, history, target, candidates, max_values, flags, where) -> list[str]:
        query = build_query(self.schema, target, self.strategy)
        pattern, prefix = answer_format(self.schema, target, self.strategy)
        if self.unconstrained:
            constraint: Constraint = free_constraint(self.vocab)
        elif candidates is None:
            constraint = extractive_constraint(
                self.vocab, pattern, prefix, history.latest_utterance.text, max_values
            )
        else:
            constraint = categorical_constraint(self.vocab, pattern, prefix, self._trie(candidates), max_values)
        session = self.generator.start(query_input(history.text, query))
        try:
            result = decode(session, constraint, self.config)
        except ProtocolError:
            raise
        except DstError as exc:
            flags.append(f"{type(exc).__name__}@{where}")
            return []
        finally:
            session.close()
        if self.trace is not None:
            self.trace({"query": query.text, "answer": result.text, "steps": result.trace})
        for flag in result.flags:
            flags.append(f"{flag}@{where}")
        try:
            values = parse_answer(result.text, pattern, prefix=prefix, partial=LENGTH_EXCEEDED in result.flags).values
        except MalformedAnswer:
            flags.append(f"MalformedAnswer@{where}")
            return []
        if candidates is not None:
            bad = [v for v in values if v not in candidates]
            if bad:
                flags.append(f"InvalidValue@{where}")
                values = [v for v in values if v in candidates]
        return list(dict.fromkeys(values))[:max_values]

    def track_turn(self, dialogue: Dialogue, t: int) -> TurnResult:
        history = render_history(dialogue, t)
        role = history.latest_utterance.role
        if role != "patient":
            raise ValueError(f"turn {t} of {dialogue.id!r} is a {role} turn")
        flags: list[str] = []
        queries = 0
        many = self.config.max_values
        intent_names = list(self.schema.intents[role])
        intents: set[str] = set()
        if intent_names:
            intents = set(self._ask(history, Intent(role), intent_names, many, flags, "intent"))
            queries += 1
        delta = DialogueState(intents=set(intents))
        for fname in self.schema.fields:
            keys = self._ask(history, FieldKeys(fname), None, many, flags, fname)
            queries += 1
            insts = []
            for key in keys:
                inst = ValueInstance(key)
                for slot in self.schema.child_slots(fname):
                    cands = list(slot.candidates) if slot.categorical else None
                    got = self._ask(history, ChildSlot(fname, key, slot.name), cands, 1, flags, f"{fname}.{slot.name}")
                    queries += 1
                    if got:
                        inst.children[slot.name] = got[0]
                insts.append(inst)
            delta.fields[fname] = merge_instances(insts)
        return TurnResult(turn=t, intents=intents, delta=delta, queries_run=queries, flags=flags, dialogue_id=dialogue.id)

    def track_dialogue(self, dialogue: Dialogue) -> list[TurnResult]:
        return [self.track_turn(dialogue, t) for t in dialogue.patient_turns()]


def track_turn(
    dialogue: Dialogue,
    t: int,
    schema: SchemaDef,
    generator,
    strategy: Strategy = Strategy.DIALOGUE_STYLE,
    config: DecodeConfig = DecodeConfig(),
) -> TurnResult:
    return Tracker(schema, generator, strategy, config).track_turn(dialogue, t)


def expected_query_count(schema: SchemaDef, delta: DialogueState) -> int:
    """Closed-form number of queries the traversal runs for a turn whose keys are ``delta``'s."""
    n = 1 + len(schema.fields)
    for fname, insts in delta.fields.items():
        n += len(insts) * len(schema.child_slots(fname))
    return n


def accumulate(results: Sequence[TurnResult]) -> list[DialogueState]:
    """Cumulative state after each turn; intents stay per-turn."""
    out = []
    running: dict[str, dict[str, ValueInstance]] = {}
    for res in results:
        for fname, insts in res.delta.fields.items():
            table = running.setdefault(fname, {})
            for inst in insts:
                cur = table.get(inst.key)
                if cur is None:
                    table[inst.key] = ValueInstance(inst.key, dict(inst.children))
                else:
                    cur.children.update(inst.children)
        out.append(
            DialogueState(
                intents=set(res.intents),
                fields={f: [ValueInstance(v.key, dict(v.children)) for v in tab.values()] for f, tab in running.items()},
            )
        )
    return out


def gold_results(dialogue: Dialogue) -> list[TurnResult]:
    """Annotated patient turns as :class:`TurnResult` objects (for scoring and accumulation)."""
    out = []
    for t in dialogue.patient_turns():
        ann = (dialogue.annotations or {}).get(t)
        if ann is None:
            continue
        out.append(TurnResult(turn=t, intents=set(ann.intents), delta=ann.delta, dialogue_id=dialogue.id))
    return out


def gold_answers(dialogues: Sequence[Dialogue], schema: SchemaDef, strategy: Strategy = Strategy.DIALOGUE_STYLE) -> dict:
    answers = {}
    for d in dialogues:
        if d.annotations:
            answers.update(build_finetune_examples(d, schema, strategy))
    return answers


def replay_generator(
    dialogues: Sequence[Dialogue],
    schema: SchemaDef,
    strategy: Strategy = Strategy.DIALOGUE_STYLE,
    mode: str = CHARACTER,
) -> ReplayGenerator:
    """Gold-replay oracle whose vocab covers every input, answer and schema string.

    Queries with no registered answer (keys the gold never mentions) replay
    the none answer.
    """
    answers = gold_answers(dialogues, schema, strategy)
    pattern, _ = answer_format(schema, Intent(), strategy)
    fallback = render_answer([], pattern)
    texts = list(answers) + list(answers.values()) + schema_texts(schema) + [fallback]
    vocab = Vocab.build(texts, mode=mode, atomic=scaffold_atoms(schema.answer_pattern))
    return ReplayGenerator(answers, vocab, fallback=fallback)


def lint(dialogues: Sequence[Dialogue], schema: SchemaDef, tokenizer: Optional[Tokenizer] = None, vocab=None) -> dict:
    """Count gold values the latest-utterance constraint can never produce.

    A value is unreachable when its tokens are not a sub-multiset of the
    utterance's value-eligible tokens, when it starts or ends with
    whitespace, contains scaffold text, or (given ``vocab``) has unknown
    tokens. Returns ``{"slots": {"field.slot": {"total", "unreachable"}},
    "unreachable": n, "examples": [...]}``.
    """
    pattern = schema.answer_pattern
    atoms = scaffold_atoms(pattern)
    tokenizer = tokenizer or (vocab.tokenizer if vocab is not None else Tokenizer("character", atoms))
    banned = set(atoms)
    slots: dict[str, dict[str, int]] = {}
    examples = []
    for d in dialogues:
        for t, ann in sorted((d.annotations or {}).items()):
            if d.turns[t].role != "patient":
                continue
            budget = Counter(tok for tok in tokenizer.tokenize(d.turns[t].text) if tok not in banned)
            for fname, insts in ann.delta.fields.items():
                for inst in insts:
                    items = [(schema.key_slot(fname), inst.key)] + [
                        (schema.slot(fname, s), v) for s, v in inst.children.items()
                    ]
                    for slot, value in items:
                        tally = slots.setdefault(f"{fname}.{slot.name}", {"total": 0, "unreachable": 0})
                        tally["total"] += 1
                        if slot.categorical:
                            reason = None if value in slot.candidates else "not a candidate"
                        else:
                            reason = _extractive_reason(value, budget, tokenizer, pattern, vocab)
                        if reason:
                            tally["unreachable"] += 1
                            examples.append(
                                {"dialogue_id": d.id, "turn": t, "slot": f"{fname}.{slot.name}", "value": value, "reason": reason}
                            )
    return {"slots": slots, "unreachable": sum(s["unreachable"] for s in slots.values()), "examples": examples}


def _extractive_reason(value, budget, tokenizer, pattern, vocab) -> Optional[str]:
    if not value or value != value.strip():
        return "empty or padded with whitespace"
    if pattern.separator in value or pattern.terminator in value:
        return "contains scaffold text"
    toks = tokenizer.tokenize(value)
    if vocab is not None and any(tok not in vocab for tok in toks):
        return "out-of-vocabulary token"
    need = Counter(toks)
    if any(budget[tok] < c for tok, c in need.items()):
        return "tokens not in latest utterance"
    return None
