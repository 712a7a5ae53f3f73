"""Scoring contract shared by every generator."""

from __future__ import annotations

from typing import TYPE_CHECKING, Protocol, Sequence

import numpy as np

from dstforge.errors import SessionClosed

if TYPE_CHECKING:
    from dstforge.generator.vocab import Vocab

# finite stand-in for log(0)
NEG_INF = -1e9


class Session:
    """One decode's view of a model: scores the next token after ``emitted``.

    ``emitted`` is the full list of answer token ids produced so far, so a
    single session can score several beam hypotheses.
    """

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size
        self.closed = False

    def score_next(self, emitted: Sequence[int]) -> np.ndarray:
        if self.closed:
            raise SessionClosed("session already closed")
        return self._score(tuple(int(i) for i in emitted))

    def _score(self, emitted: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Generator(Protocol):
    vocab: Vocab

    def start(self, input_text: str) -> Session: ...
