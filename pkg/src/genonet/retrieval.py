"""Lexical retrieval over a local corpus of standards/reference snippets.

Chunks are scored with BM25 (k1=1.2, b=0.75) over lower-cased
alphanumeric tokens.  Two deliberate departures from textbook BM25 keep
scores insensitive to unrelated corpus growth (adding a document that
shares no terms with a query leaves that query's scores exactly
unchanged):

* idf(t) = ln(1 + 1/(df(t) + 0.5)) depends only on the term's document
  frequency, not on the corpus size;
* document length is normalized against the fixed chunk budget
  (``chunk_size``) instead of the corpus average length.

Everything else is standard: tf saturation via k1, length penalty via b,
scores are sums over unique query terms and always non-negative.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyDocument, EmptyIndex
from .util import count_tokens, token_spans, word_tokens

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 512
DEFAULT_OVERLAP = 64
DEFAULT_CONTEXT_BUDGET = 2048

BM25_K1 = 1.2
BM25_B = 0.75

_HEADING_RE = re.compile(r"^\s{0,3}(#{1,6}\s+\S.*|[A-Z][^a-z\n]{3,80})$")
_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")


@dataclass(frozen=True)
class KnowledgeChunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    heading: str = ""


@dataclass(frozen=True)
class RankedHit:
    chunk_id: str
    score: float
    rank: int


def chunk_document(doc: str, doc_id: str, chunk_size: int = DEFAULT_CHUNK_SIZE,
                   overlap: int = DEFAULT_OVERLAP) -> list[KnowledgeChunk]:
    """Split a document into chunks of at most chunk_size tokens.

    Paragraphs (blank-line delimited) are packed greedily into chunks;
    a paragraph longer than chunk_size is split into fixed token windows
    with the configured overlap.  Chunk text is always a verbatim
    substring (or paragraph join) of the original document.
    """
    if not doc.strip():
        raise EmptyDocument(f"document {doc_id!r} is empty")

    paragraphs = [p for p in _PARAGRAPH_SPLIT_RE.split(doc) if p.strip()]
    pieces: list[str] = []  # paragraph-or-window units, each <= chunk_size
    for paragraph in paragraphs:
        spans = token_spans(paragraph)
        if len(spans) <= chunk_size:
            pieces.append(paragraph)
            continue
        stride = max(1, chunk_size - overlap)
        start = 0
        while start < len(spans):
            window = spans[start:start + chunk_size]
            pieces.append(paragraph[window[0][0]:window[-1][1]])
            if start + chunk_size >= len(spans):
                break
            start += stride

    chunks: list[KnowledgeChunk] = []
    heading = ""
    buffer: list[str] = []
    buffer_tokens = 0

    def flush() -> None:
        nonlocal buffer, buffer_tokens
        if buffer:
            ordinal = len(chunks)
            chunks.append(KnowledgeChunk(
                chunk_id=f"{doc_id}#{ordinal:04d}", doc_id=doc_id,
                ordinal=ordinal, text="\n\n".join(buffer), heading=heading))
            buffer, buffer_tokens = [], 0

    for piece in pieces:
        piece_tokens = count_tokens(piece)
        first_line = piece.lstrip().splitlines()[0] if piece.strip() else ""
        if buffer and buffer_tokens + piece_tokens > chunk_size:
            flush()
        if _HEADING_RE.match(first_line):
            heading = first_line.lstrip("# ").strip()
        buffer.append(piece)
        buffer_tokens += piece_tokens
        if buffer_tokens >= chunk_size:
            flush()
    flush()
    return chunks


class _IndexState:
    """Immutable snapshot: chunk table plus posting lists."""

    def __init__(self, docs: dict[str, list[KnowledgeChunk]]):
        self.docs = docs
        self.chunks: dict[str, KnowledgeChunk] = {}
        self.lengths: dict[str, int] = {}
        self.postings: dict[str, dict[str, int]] = {}  # term -> chunk_id -> tf
        for doc_chunks in docs.values():
            for chunk in doc_chunks:
                self.chunks[chunk.chunk_id] = chunk
                tokens = word_tokens(chunk.text)
                self.lengths[chunk.chunk_id] = len(tokens)
                for token in tokens:
                    self.postings.setdefault(token, {})
                    self.postings[token][chunk.chunk_id] = (
                        self.postings[token].get(chunk.chunk_id, 0) + 1)


class KnowledgeIndex:
    """Chunked corpus with deterministic BM25 ranking.

    Queries are lock-free over an immutable snapshot; ingest rebuilds and
    atomically swaps the snapshot, so concurrent readers see either the
    old or the new document set, never a mix.
    """

    def __init__(self, chunk_size: int = DEFAULT_CHUNK_SIZE,
                 overlap: int = DEFAULT_OVERLAP):
        self.chunk_size = chunk_size
        self.overlap = overlap
        self._raw_docs: dict[str, str] = {}
        self._state = _IndexState({})
        self._write_lock = threading.Lock()

    # -- ingestion -----------------------------------------------------------

    def ingest(self, doc: str, doc_id: str) -> int:
        """Chunk and index a document; re-ingesting a doc-id replaces it."""
        new_chunks = chunk_document(doc, doc_id, self.chunk_size, self.overlap)
        with self._write_lock:
            self._raw_docs[doc_id] = doc
            docs = {did: chunks for did, chunks in self._state.docs.items()
                    if did != doc_id}
            docs[doc_id] = new_chunks
            self._state = _IndexState(docs)
        logger.debug("ingested %s: %d chunks", doc_id, len(new_chunks))
        return len(new_chunks)

    def ingest_directory(self, directory: str | Path) -> dict[str, int]:
        """Ingest every ``<doc-id>.txt`` file in a corpus directory."""
        counts = {}
        for path in sorted(Path(directory).glob("*.txt")):
            counts[path.stem] = self.ingest(path.read_text("utf-8"), path.stem)
        return counts

    # -- querying ------------------------------------------------------------

    def chunk_count(self) -> int:
        return len(self._state.chunks)

    def get_chunk(self, chunk_id: str) -> KnowledgeChunk:
        return self._state.chunks[chunk_id]

    def query(self, text: str, k: int) -> list[RankedHit]:
        """Top-k chunks by BM25; ties broken by chunk-id ascending."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        state = self._state
        if not state.chunks:
            raise EmptyIndex("query on empty index")
        terms = sorted(set(word_tokens(text)))
        scores: dict[str, float] = {}
        for term in terms:
            posting = state.postings.get(term)
            if not posting:
                continue
            idf = math.log(1.0 + 1.0 / (len(posting) + 0.5))
            for chunk_id, tf in posting.items():
                norm = BM25_K1 * (1.0 - BM25_B
                                  + BM25_B * state.lengths[chunk_id] / self.chunk_size)
                contribution = idf * (tf * (BM25_K1 + 1.0)) / (tf + norm)
                scores[chunk_id] = scores.get(chunk_id, 0.0) + contribution
        ranked = sorted(((cid, s) for cid, s in scores.items() if s > 0.0),
                        key=lambda item: (-item[1], item[0]))
        return [RankedHit(chunk_id=cid, score=score, rank=i + 1)
                for i, (cid, score) in enumerate(ranked[:k])]

    def augment_prompt(self, base: str, hits: list[RankedHit],
                       context_budget: int = DEFAULT_CONTEXT_BUDGET) -> str:
        """Append a delimited context block listing hits in rank order.

        The total rendering is capped at context_budget tokens by dropping
        whole chunks from the lowest rank upward; chunks are never cut
        mid-text.  With no hits the base prompt is returned unchanged.
        """
        if not hits:
            return base
        kept = list(hits)
        while kept:
            lines = [base, "", "=== Context ==="]
            for hit in kept:
                chunk = self.get_chunk(hit.chunk_id)
                lines.append(f"[{hit.rank}] {chunk.chunk_id}: {chunk.text}")
            rendered = "\n".join(lines)
            if count_tokens(rendered) <= context_budget:
                return rendered
            kept.pop()
        return base

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Persist the raw corpus; chunking is deterministic, so the index
        is rebuilt on load."""
        payload = {
            "version": 1,
            "chunk_size": self.chunk_size,
            "overlap": self.overlap,
            "docs": self._raw_docs,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeIndex":
        payload = json.loads(Path(path).read_text("utf-8"))
        if payload.get("version") != 1:
            raise ValueError(f"unsupported index version {payload.get('version')}")
        index = cls(chunk_size=payload["chunk_size"], overlap=payload["overlap"])
        for doc_id in sorted(payload["docs"]):
            index.ingest(payload["docs"][doc_id], doc_id)
        return index


__all__ = [
    "BM25_B", "BM25_K1", "DEFAULT_CHUNK_SIZE", "DEFAULT_CONTEXT_BUDGET",
    "DEFAULT_OVERLAP", "KnowledgeChunk", "KnowledgeIndex", "RankedHit",
    "chunk_document",
]
