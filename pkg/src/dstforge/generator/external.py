"""Adapter for generators living in another process.

Line-delimited JSON over the child's stdin/stdout. The engine sends
``{"op": "vocab", "tokens": [...]}`` once, then per session
``{"op": "start", "input": ..., "vocab_hash": ...}``, any number of
``{"op": "step", "emitted": [ids]}`` (each answered by ``{"scores": [...]}``)
and finally ``{"op": "end"}``. Only ``step`` messages get a reply.
"""

from __future__ import annotations

import itertools
import json
import math
import shlex
import subprocess
import threading
from typing import Sequence, Union

import numpy as np

from dstforge.errors import ProtocolError
from dstforge.generator.base import Session
from dstforge.generator.vocab import Vocab


class ExternalGenerator:
    def __init__(self, command: Union[str, Sequence[str]], vocab: Vocab):
        self.vocab = vocab
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._lock = threading.Lock()
        self._ids = itertools.count()
        self._active = None
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot launch external generator {self.command!r}: {exc}") from exc
        self._send({"op": "vocab", "tokens": vocab.tokens})

    def _send(self, msg: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(msg, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"external generator closed its input: {exc}") from exc

    def _recv(self) -> dict:
        line = self._proc.stdout.readline()
        if not line:
            try:
                code = self._proc.wait(timeout=1)
            except subprocess.TimeoutExpired:
                code = None
            raise ProtocolError(f"external generator closed its output (exit code {code})")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad reply line {line[:80]!r}") from exc

    def start(self, input_text: str) -> "ExternalSession":
        return ExternalSession(self, next(self._ids), input_text)

    def _step(self, session: "ExternalSession", emitted: tuple) -> np.ndarray:
        with self._lock:
            if self._active != session.sid:
                self._send({"op": "start", "input": session.input_text, "vocab_hash": self.vocab.hash()})
                self._active = session.sid
            self._send({"op": "step", "emitted": list(emitted)})
            reply = self._recv()
        scores = reply.get("scores") if isinstance(reply, dict) else None
        if not isinstance(scores, list) or len(scores) != len(self.vocab):
            raise ProtocolError(f"expected {len(self.vocab)} scores, got {reply!r:.80}")
        if not all(isinstance(s, (int, float)) and math.isfinite(s) for s in scores):
            raise ProtocolError("scores must be finite numbers")
        return np.asarray(scores, dtype=float)

    def _end(self, session: "ExternalSession") -> None:
        with self._lock:
            if self._active == session.sid:
                self._send({"op": "end"})
                self._active = None

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ExternalSession(Session):
    def __init__(self, owner: ExternalGenerator, sid: int, input_text: str):
        super().__init__(len(owner.vocab))
        self.owner = owner
        self.sid = sid
        self.input_text = input_text

    def _score(self, emitted):
        return self.owner._step(self, emitted)

    def close(self) -> None:
        if not self.closed:
            self.owner._end(self)
        super().close()
