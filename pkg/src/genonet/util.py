"""Small shared helpers: canonical JSON, digests, tokenization, clocks."""

from __future__ import annotations

import hashlib
import json
import re
import time
from typing import Iterator


def canonical_json(obj) -> str:
    """Key-sorted, separator-normalized JSON used for hashing and persistence.

    Floats rely on Python's shortest-roundtrip repr, which is stable across
    platforms for IEEE-754 doubles.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest_of(obj) -> str:
    """256-bit digest of an object's canonical JSON form."""
    return sha256_hex(canonical_json(obj))


_TOKEN_RE = re.compile(r"\S+")
_WORD_RE = re.compile(r"[a-z0-9]+")


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of whitespace-delimited tokens, in order."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def count_tokens(text: str) -> int:
    """Token count used for all context/chunk budgets (whitespace tokens)."""
    return len(_TOKEN_RE.findall(text))


def word_tokens(text: str) -> list[str]:
    """Lower-cased alphanumeric tokens; the retrieval tokenizer."""
    return _WORD_RE.findall(text.lower())


# Numeric tokens for summary/numeric-preservation checks.  Dotted quads
# (IP addresses) must not shed spurious "numbers", hence the guards.
_NUMBER_RE = re.compile(r"(?<![\d.])-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?(?![\d.])")


def extract_numbers(text: str) -> list[str]:
    """All standalone numeric literals in text, as written."""
    return _NUMBER_RE.findall(text)


def collapse_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return re.sub(r"\s+", " ", text).strip()


class SystemClock:
    """Wall-clock time source."""

    def now(self) -> float:
        return time.time()


class LogicalClock:
    """Deterministic counter clock for replay runs and tests."""

    def __init__(self, start: float = 0.0, step: float = 1.0):
        self._next = start
        self._step = step

    def now(self) -> float:
        value = self._next
        self._next += self._step
        return value


def iter_sse_events(lines: Iterator[str]) -> Iterator[tuple[str, str]]:
    """Parse server-sent-event (event, data) pairs from an iterator of lines."""
    event = "message"
    data: list[str] = []
    for line in lines:
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            if data:
                yield event, "\n".join(data)
            event, data = "message", []
            continue
        if line.startswith("event:"):
            event = line[len("event:"):].strip()
        elif line.startswith("data:"):
            data.append(line[len("data:"):].strip())
    if data:
        yield event, "\n".join(data)
