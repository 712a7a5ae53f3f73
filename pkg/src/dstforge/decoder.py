"""Constrained autoregressive decoding.

Each step's valid token set comes from a small scaffold automaton that walks
the answer shape ``role_prefix (prefix value (separator value)* | none_form)
terminator``. Value tokens are limited either by a multiset budget taken from
the latest utterance (extractive) or by a candidate trie (categorical).

The automaton is kept nondeterministic: a state is a frozenset of threads, so
the none-form and the value branch can share leading tokens.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from dstforge.errors import EmptyValidSet, UntokenizableCandidate
from dstforge.generator.base import Session
from dstforge.generator.vocab import Vocab, single_token
from dstforge.schema import AnswerPattern

EXTRACTIVE = "extractive"
CATEGORICAL = "categorical"
FREE = "free"

LENGTH_EXCEEDED = "LengthExceeded"
EMPTY_VALID_SET = "EmptyValidSet"


class TokenTrie:
    def __init__(self):
        self.children: list[dict[int, int]] = [{}]
        self.terminal: list[bool] = [False]

    root = 0

    def insert(self, ids: Sequence[int]) -> None:
        node = self.root
        for tok in ids:
            nxt = self.children[node].get(tok)
            if nxt is None:
                nxt = len(self.children)
                self.children.append({})
                self.terminal.append(False)
                self.children[node][tok] = nxt
            node = nxt
        self.terminal[node] = True

    def step(self, node: int, tok: int) -> Optional[int]:
        return self.children[node].get(tok)

    def accepts(self, ids: Sequence[int]) -> bool:
        node = self.root
        for tok in ids:
            node = self.step(node, tok)
            if node is None:
                return False
        return self.terminal[node]

    def __len__(self) -> int:
        return len(self.children)


def build_trie(candidates: Iterable[str], vocab: Vocab) -> TokenTrie:
    candidates = list(candidates)
    if not candidates:
        raise UntokenizableCandidate("no candidates")
    trie = TokenTrie()
    for cand in candidates:
        if not cand:
            raise UntokenizableCandidate("empty candidate")
        try:
            ids = vocab.encode_strict(cand)
        except KeyError as exc:
            raise UntokenizableCandidate(f"candidate {cand!r} has out-of-vocabulary token {exc.args[0]!r}") from None
        trie.insert(ids)
    return trie


@dataclass(frozen=True)
class DecodeConfig:
    search: str = "greedy"
    beam_width: int = 1
    max_answer_tokens: int = 64
    max_values: int = 8
    on_empty_valid_set: str = "emit_none"
    length_penalty: float = 0.0

    def __post_init__(self):
        if self.search not in ("greedy", "beam"):
            raise ValueError(f"unknown search {self.search!r}")
        if self.beam_width < 1 or self.max_answer_tokens < 1 or self.max_values < 1:
            raise ValueError("beam_width, max_answer_tokens and max_values must be positive")
        if self.on_empty_valid_set not in ("emit_none", "error"):
            raise ValueError(f"unknown on_empty_valid_set {self.on_empty_valid_set!r}")


class Constraint:
    """Scaffold automaton plus value restriction for one answer.

    Threads (tuples) inside a state:
      ``("N", i)``   i tokens into role + none_form; terminator once complete
      ``("P", i)``   i tokens into role + value prefix
      ``("V", n, cur, store, tail)``  n finished values, ``cur`` tokens in the
                     current value, ``store`` = remaining budget counts or trie
                     node, ``tail`` = last characters of an extractive value
      ``("F",)``     unconstrained
      ``("D",)``     done
    """

    def __init__(
        self,
        vocab: Vocab,
        mode: str,
        pattern: Optional[AnswerPattern] = None,
        prefix: str = "",
        budget: Optional[Counter] = None,
        trie: Optional[TokenTrie] = None,
        max_values: int = 8,
    ):
        self.vocab = vocab
        self.mode = mode
        self.terminator_id = vocab.terminator_id
        self.max_values = max_values
        self.trie = trie
        if mode == FREE:
            self.all_ids = tuple(range(len(vocab)))
            return
        if pattern is None:
            raise ValueError("constrained modes need an answer pattern")
        self.separator_id = single_token(vocab, pattern.separator)
        if self.separator_id is None:
            raise ValueError(f"separator {pattern.separator!r} is not a single vocab token")
        if single_token(vocab, pattern.terminator) != self.terminator_id:
            raise ValueError("pattern terminator differs from the vocab terminator")
        role = _encode_scaffold(vocab, pattern.role_prefix)
        self.none_seq = role + _encode_scaffold(vocab, pattern.none_form)
        self.pre_seq = role + _encode_scaffold(vocab, prefix)
        self.role_len = len(role)
        if mode == EXTRACTIVE:
            budget = budget or Counter()
            self.budget_tokens = tuple(sorted(budget))
            self.budget_init = tuple(budget[t] for t in self.budget_tokens)
            self.budget_pos = {t: i for i, t in enumerate(self.budget_tokens)}
            self.blank = frozenset(i for i in self.budget_tokens if not vocab.tokens[i].strip())
            self.starts = tuple(t for t in self.budget_tokens if t not in self.blank)
            # value text must never spell a scaffold string, or the answer would
            # parse (and re-tokenize) differently from how it was decoded
            self.guards = tuple(sorted(set(vocab.atomic) | {pattern.separator, pattern.terminator}))
            self.tail_len = max(len(g) for g in self.guards) - 1
            self.separator = pattern.separator
            self._clean_cache: dict = {}
        elif mode == CATEGORICAL:
            if trie is None:
                raise ValueError("categorical mode needs a trie")
            self.starts = tuple(sorted(trie.children[trie.root]))
        else:
            raise ValueError(f"unknown mode {mode!r}")

    # -- automaton -----------------------------------------------------------

    def initial(self) -> frozenset:
        if self.mode == FREE:
            return frozenset({("F",)})
        threads = {("N", 0)}
        if self.starts:
            threads.add(self._norm_pre(0))
        return frozenset(threads)

    def _fresh_value(self, n: int) -> tuple:
        store = self.budget_init if self.mode == EXTRACTIVE else self.trie.root
        return ("V", n, 0, store, "")

    def _norm_pre(self, i: int) -> tuple:
        return self._fresh_value(0) if i >= len(self.pre_seq) else ("P", i)

    def _thread_valid(self, th: tuple) -> set:
        kind = th[0]
        if kind == "N":
            i = th[1]
            return {self.none_seq[i]} if i < len(self.none_seq) else {self.terminator_id}
        if kind == "P":
            return {self.pre_seq[th[1]]}
        if kind == "F":
            return set(self.all_ids)
        if kind == "D":
            return set()
        _, n, cur, store, tail = th
        out = set()
        can_close = False
        can_split = True
        if self.mode == EXTRACTIVE:
            for tok, left in zip(self.budget_tokens, store):
                if left > 0 and (cur > 0 or tok not in self.blank) and self._clean(tail, tok):
                    out.add(tok)
            can_close = cur > 0
            can_split = self._splits_here(tail)
        else:
            out.update(self.trie.children[store])
            can_close = self.trie.terminal[store]
        if can_close:
            out.add(self.terminator_id)
            if n + 1 < self.max_values and can_split:
                out.add(self.separator_id)
        return out

    def _clean(self, tail: str, tok: int) -> bool:
        """Whether appending ``tok`` keeps the value free of scaffold strings."""
        key = (tail, tok)
        hit = self._clean_cache.get(key)
        if hit is None:
            text = tail + self.vocab.tokens[tok]
            hit = self._clean_cache[key] = not any(g in text for g in self.guards)
        return hit

    def _splits_here(self, tail: str) -> bool:
        # the separator's first occurrence must start right after the value
        return (tail + self.separator).find(self.separator) == len(tail)

    def valid(self, state: frozenset) -> list[int]:
        out = set()
        for th in state:
            out |= self._thread_valid(th)
        return sorted(out)

    def _advance(self, th: tuple, tok: int) -> Optional[tuple]:
        kind = th[0]
        if kind == "F":
            return ("D",) if tok == self.terminator_id else th
        if kind == "N":
            i = th[1]
            if i < len(self.none_seq):
                return ("N", i + 1) if tok == self.none_seq[i] else None
            return ("D",) if tok == self.terminator_id else None
        if kind == "P":
            return self._norm_pre(th[1] + 1) if tok == self.pre_seq[th[1]] else None
        if kind == "D":
            return None
        _, n, cur, store, tail = th
        closable = cur > 0 if self.mode == EXTRACTIVE else self.trie.terminal[store]
        if closable and tok == self.terminator_id:
            return ("D",)
        if closable and tok == self.separator_id and n + 1 < self.max_values:
            if self.mode == EXTRACTIVE and not self._splits_here(tail):
                return None
            return self._fresh_value(n + 1)
        if self.mode == EXTRACTIVE:
            pos = self.budget_pos.get(tok)
            if pos is None or store[pos] <= 0 or (cur == 0 and tok in self.blank) or not self._clean(tail, tok):
                return None
            text = tail + self.vocab.tokens[tok]
            tail = text[-self.tail_len:] if self.tail_len else ""
            return ("V", n, cur + 1, store[:pos] + (store[pos] - 1,) + store[pos + 1:], tail)
        nxt = self.trie.step(store, tok)
        return None if nxt is None else ("V", n, cur + 1, nxt, "")

    def step(self, state: frozenset, tok: int) -> frozenset:
        nxt = set()
        for th in state:
            adv = self._advance(th, tok)
            if adv is not None:
                nxt.add(adv)
        if not nxt:
            raise ValueError(f"token {tok} is not valid in this state")
        return frozenset(nxt)

    @staticmethod
    def done(state: frozenset) -> bool:
        return ("D",) in state

    def phase(self, state: frozenset) -> str:
        """Coarse phase name of a state, for inspection."""
        if self.done(state):
            return "Done"
        kinds = {th[0] for th in state}
        if kinds == {"F"}:
            return "Free"
        if any(th[0] in "NP" and th[1] < self.role_len for th in state):
            return "RolePrefix"
        values = [th for th in state if th[0] == "V"]
        if "P" in kinds:
            return "AnswerPrefix"
        if not values:
            return "NoneForm"
        if any(th[2] == 0 for th in values):
            return "FirstToken"
        return "InValue"

    def none_answer_ids(self) -> list[int]:
        return list(self.none_seq) + [self.terminator_id]


def _encode_scaffold(vocab: Vocab, text: str) -> tuple[int, ...]:
    try:
        return tuple(vocab.encode_strict(text))
    except KeyError as exc:
        raise ValueError(f"scaffold text {text!r} has out-of-vocabulary token {exc.args[0]!r}") from None


def utterance_budget(vocab: Vocab, text: str) -> Counter:
    """Multiset of value-eligible token ids in ``text`` (scaffold and unknown tokens dropped)."""
    banned = {vocab.unknown_id, vocab.terminator_id} | {vocab.index[a] for a in vocab.atomic if a in vocab.index}
    return Counter(t for t in vocab.encode(text) if t not in banned)


def extractive_constraint(
    vocab: Vocab, pattern: AnswerPattern, prefix: str, utterance: str, max_values: int = 8
) -> Constraint:
    return Constraint(vocab, EXTRACTIVE, pattern, prefix, budget=utterance_budget(vocab, utterance), max_values=max_values)


def categorical_constraint(
    vocab: Vocab, pattern: AnswerPattern, prefix: str, candidates, max_values: int = 8
) -> Constraint:
    trie = candidates if isinstance(candidates, TokenTrie) else build_trie(candidates, vocab)
    for scaffold in (pattern.separator, pattern.terminator):
        sid = single_token(vocab, scaffold)
        if any(sid in kids for kids in trie.children):
            raise UntokenizableCandidate(f"a candidate contains the scaffold token {scaffold!r}")
    return Constraint(vocab, CATEGORICAL, pattern, prefix, trie=trie, max_values=max_values)


def free_constraint(vocab: Vocab) -> Constraint:
    return Constraint(vocab, FREE)


# -- search -------------------------------------------------------------------


@dataclass
class DecodeResult:
    text: str
    token_ids: list[int]
    step_scores: list[float]
    flags: list[str] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return LENGTH_EXCEEDED not in self.flags

    @property
    def total_score(self) -> float:
        return float(sum(self.step_scores))


def _empty_result(constraint: Constraint, config: DecodeConfig, trace: list) -> DecodeResult:
    if config.on_empty_valid_set == "error" or constraint.mode == FREE:
        raise EmptyValidSet("no valid continuation")
    ids = constraint.none_answer_ids()
    return DecodeResult(constraint.vocab.decode(ids), ids, [], [EMPTY_VALID_SET], trace)


def greedy_decode(session: Session, constraint: Constraint, config: DecodeConfig = DecodeConfig()) -> DecodeResult:
    state = constraint.initial()
    emitted: list[int] = []
    scores: list[float] = []
    trace: list[dict] = []
    flags: list[str] = []
    while not constraint.done(state):
        if len(emitted) >= config.max_answer_tokens:
            flags.append(LENGTH_EXCEEDED)
            break
        valid = constraint.valid(state)
        if not valid:
            return _empty_result(constraint, config, trace)
        sub = np.asarray(session.score_next(emitted), dtype=np.float64)[valid]
        # valid is sorted, so argmax's first-hit rule breaks ties toward the lowest id
        j = int(np.argmax(sub))
        best = valid[j]
        emitted.append(best)
        scores.append(float(sub[j]))
        trace.append({"token": constraint.vocab.tokens[best], "valid": len(valid), "score": float(sub[j])})
        state = constraint.step(state, best)
    return DecodeResult(constraint.vocab.decode(emitted), emitted, scores, flags, trace)


@dataclass
class _Hyp:
    score: float
    emitted: tuple
    state: frozenset
    scores: tuple
    valid_sizes: tuple


def beam_decode(session: Session, constraint: Constraint, config: DecodeConfig = DecodeConfig()) -> DecodeResult:
    width = config.beam_width

    def rank(h: _Hyp) -> float:
        if config.length_penalty:
            return h.score / max(len(h.emitted), 1) ** config.length_penalty
        return h.score

    live = [_Hyp(0.0, (), constraint.initial(), (), ())]
    finished: list[_Hyp] = []
    for _ in range(config.max_answer_tokens):
        cands = []
        for hi, h in enumerate(live):
            valid = constraint.valid(h.state)
            if not valid:
                res = _empty_result(constraint, config, [])
                finished.append(_Hyp(h.score, tuple(res.token_ids), frozenset({("D",)}), (), ()))
                continue
            sub = np.asarray(session.score_next(h.emitted), dtype=np.float64)[valid]
            for tok, sc in zip(valid, sub.tolist()):
                # ties on the running total fall back to the step score, then token id
                cands.append((-(h.score + sc), hi, -sc, tok, len(valid)))
        if not cands:
            break
        cands.sort()
        nxt = []
        for neg_total, hi, neg_step, tok, nvalid in cands[:width]:
            h = live[hi]
            state = constraint.step(h.state, tok)
            nh = _Hyp(-neg_total, h.emitted + (tok,), state, h.scores + (-neg_step,), h.valid_sizes + (nvalid,))
            (finished if constraint.done(state) else nxt).append(nh)
        live = nxt
        if not live:
            break
        # log-scores only fall, so a finished total at least as good as the
        # best live one cannot be overtaken (no such bound under a length penalty)
        if finished and not config.length_penalty and max(f.score for f in finished) >= live[0].score:
            break

    flags = []
    if finished:
        best = max(finished, key=rank)  # max keeps the earliest on ties
        if not best.scores and best.emitted:
            flags.append(EMPTY_VALID_SET)
    else:
        best = live[0]
        flags.append(LENGTH_EXCEEDED)
    trace = [
        {"token": constraint.vocab.tokens[t], "valid": v, "score": sc}
        for t, v, sc in zip(best.emitted, best.valid_sizes, best.scores)
    ]
    return DecodeResult(constraint.vocab.decode(best.emitted), list(best.emitted), list(best.scores), flags, trace)


def decode(session: Session, constraint: Constraint, config: DecodeConfig = DecodeConfig()) -> DecodeResult:
    """Decode one answer; the session must already hold the query input."""
    if config.search == "beam":
        return beam_decode(session, constraint, config)
    return greedy_decode(session, constraint, config)


def accepted_values(constraint: Constraint, limit: int = 100_000) -> set[tuple[int, ...]]:
    """Every token sequence the automaton can close as the first value.

    Walks the forced role and value prefix from the initial state, then
    enumerates depth-first; meant for exhaustive checks on small tries.
    """
    state = constraint.initial()
    for tok in constraint.pre_seq:
        state = constraint.step(state, tok)
    state = frozenset(th for th in state if th[0] == "V")
    if not state:
        return set()
    out: set[tuple[int, ...]] = set()
    stack = [(state, ())]
    visited = 0
    while stack:
        state, value = stack.pop()
        visited += 1
        if visited > limit:
            raise RuntimeError("enumeration limit reached")
        for tok in constraint.valid(state):
            if tok == constraint.terminator_id:
                out.add(value)
            elif tok != constraint.separator_id:
                stack.append((constraint.step(state, tok), value + (tok,)))
    return out
