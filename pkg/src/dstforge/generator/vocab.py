"""Tokenization and token-id vocabularies."""

from __future__ import annotations

import hashlib
import json
import re
from typing import Iterable, Optional, Sequence

from dstforge.corpus import ROLE_TOKENS

CHARACTER = "character"
WHITESPACE = "whitespace"
TERMINATOR = "</s>"
UNKNOWN = "<unk>"

_FALLBACK = {
    CHARACTER: r".",
    WHITESPACE: r"\s+|\w+|[^\w\s]",
}


class Tokenizer:
    """Splits text into tokens; ``atomic`` strings always become one token.

    In character mode every other code point is a token. In whitespace mode
    word runs, whitespace runs and single punctuation marks are tokens, so
    joining the tokens always reproduces the text.
    """

    def __init__(self, mode: str = CHARACTER, atomic: Iterable[str] = ()):
        if mode not in _FALLBACK:
            raise ValueError(f"unknown tokenization mode {mode!r}")
        self.mode = mode
        self.atomic = tuple(sorted({a for a in atomic if a}, key=lambda a: (-len(a), a)))
        alts = [re.escape(a) for a in self.atomic] + [_FALLBACK[mode]]
        self._re = re.compile("|".join(alts), re.DOTALL)

    def tokenize(self, text: str) -> list[str]:
        return self._re.findall(text)

    def __eq__(self, other):
        return isinstance(other, Tokenizer) and (self.mode, self.atomic) == (other.mode, other.atomic)

    def __hash__(self):
        return hash((self.mode, self.atomic))


def scaffold_atoms(pattern=None) -> list[str]:
    """Role tokens (bare and with their trailing space) plus the pattern's
    role prefix, separator and terminator."""
    atoms = list(ROLE_TOKENS.values()) + [r + " " for r in ROLE_TOKENS.values()]
    if pattern is not None:
        atoms += [pattern.role_prefix, pattern.separator, pattern.terminator]
    return list(dict.fromkeys(a for a in atoms if a))


class Vocab:
    def __init__(
        self,
        tokens: Sequence[str],
        mode: str = CHARACTER,
        atomic: Iterable[str] = (),
        terminator: str = TERMINATOR,
        unknown: str = UNKNOWN,
    ):
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab tokens must be distinct")
        for special in (terminator, unknown):
            if tokens.count(special) != 1:
                raise ValueError(f"special token {special!r} must appear exactly once")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        self.terminator = terminator
        self.unknown = unknown
        self.tokenizer = Tokenizer(mode, set(atomic) | {terminator})

    @property
    def mode(self) -> str:
        return self.tokenizer.mode

    @property
    def terminator_id(self) -> int:
        return self.index[self.terminator]

    @property
    def unknown_id(self) -> int:
        return self.index[self.unknown]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def tokenize(self, text: str) -> list[str]:
        return self.tokenizer.tokenize(text)

    def encode(self, text: str) -> list[int]:
        unk = self.unknown_id
        return [self.index.get(t, unk) for t in self.tokenize(text)]

    def encode_strict(self, text: str) -> list[int]:
        """Encode, raising ``KeyError`` naming the first out-of-vocabulary token."""
        out = []
        for t in self.tokenize(text):
            if t not in self.index:
                raise KeyError(t)
            out.append(self.index[t])
        return out

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.tokens[i] for i in ids)

    def hash(self) -> str:
        blob = json.dumps([self.mode, self.tokens], ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def build(
        cls,
        texts: Iterable[str],
        mode: str = CHARACTER,
        atomic: Iterable[str] = (),
        terminator: str = TERMINATOR,
        unknown: str = UNKNOWN,
    ) -> "Vocab":
        atomic = [a for a in dict.fromkeys(atomic) if a not in (terminator, unknown)]
        tok = Tokenizer(mode, set(atomic) | {terminator})
        seen = set()
        for text in texts:
            seen.update(tok.tokenize(text))
        head = [terminator, unknown] + atomic
        return cls(head + sorted(seen - set(head)), mode, atomic, terminator, unknown)

    def extend(self, texts: Iterable[str]) -> "Vocab":
        """New vocab with unseen tokens appended; existing ids are unchanged."""
        new = set()
        for text in texts:
            new.update(t for t in self.tokenize(text) if t not in self.index)
        if not new:
            return self
        return Vocab(self.tokens + sorted(new), self.mode, self.atomic, self.terminator, self.unknown)

    @property
    def atomic(self) -> tuple[str, ...]:
        return tuple(a for a in self.tokenizer.atomic if a != self.terminator)

    def to_dict(self) -> dict:
        return {
            "tokens": self.tokens,
            "mode": self.mode,
            "atomic": list(self.atomic),
            "terminator": self.terminator,
            "unknown": self.unknown,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        return cls(data["tokens"], data["mode"], data.get("atomic", ()), data["terminator"], data["unknown"])

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.to_dict() == other.to_dict()


def single_token(vocab: Vocab, text: str) -> Optional[int]:
    ids = vocab.tokenize(text)
    if len(ids) == 1 and ids[0] in vocab:
        return vocab.index[ids[0]]
    return None
