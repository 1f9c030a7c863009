"""Lexical tf-idf retrieval over a markdown corpus split at heading lines."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from autonoc.errors import IngestError, InputError
from autonoc.optical.metro import DATA_DIR

CORPUS_DIR = DATA_DIR / "corpus"
_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    position: int
    heading: str
    body: str
    tokens: Mapping[str, int]

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "position": self.position, "heading": self.heading, "body": self.body}


@dataclass(frozen=True)
class Index:
    chunks: tuple[Chunk, ...]
    df: Mapping[str, int]

    @property
    def n(self) -> int:
        return len(self.chunks)


@dataclass(frozen=True)
class Hit:
    chunk: Chunk
    score: float

    def to_dict(self) -> dict:
        return {**self.chunk.to_dict(), "score": round(self.score, 6)}


def split_chunks(doc_id: str, text: str) -> list[Chunk]:
    """One chunk per heading; text before the first heading forms an untitled chunk."""
    chunks = []
    heading, body = "", []

    def flush():
        content = "\n".join(body).strip()
        if content:
            tokens = Counter(tokenize(heading) + tokenize(content))
            chunks.append(Chunk(doc_id, len(chunks), heading, content, dict(tokens)))

    for line in text.splitlines():
        if line.startswith("#"):
            flush()
            heading, body = line.lstrip("#").strip(), []
        else:
            body.append(line)
    flush()
    return chunks


def ingest_corpus(docs: Iterable[Mapping[str, str]]) -> Index:
    seen: set[str] = set()
    chunks: list[Chunk] = []
    for doc in docs:
        doc_id = doc["id"]
        if doc_id in seen:
            raise IngestError(f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
        chunks.extend(split_chunks(doc_id, doc["text"]))
    df: Counter = Counter()
    for c in chunks:
        df.update(c.tokens.keys())
    return Index(tuple(chunks), dict(df))


def load_corpus(directory: str | Path = CORPUS_DIR) -> Index:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix in (".md", ".txt"))
    return ingest_corpus({"id": p.stem, "text": p.read_text(encoding="utf-8")} for p in paths)


def score(index: Index, chunk: Chunk, query_tokens: Iterable[str]) -> float:
    total = 0.0
    for t in set(query_tokens):
        tf = chunk.tokens.get(t, 0)
        if tf:
            total += tf * math.log(1 + index.n / index.df[t])
    return total


def retrieve(index: Index, query: str, k: int = 3) -> list[Hit]:
    if k < 1:
        raise InputError("k must be >= 1")
    q = tokenize(query)
    hits = [Hit(c, s) for c in index.chunks if (s := score(index, c, q)) > 0]
    hits.sort(key=lambda h: (-h.score, h.chunk.doc_id, h.chunk.position))
    return hits[:k]


_DEFAULT: Index | None = None


def default_index() -> Index:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_corpus()
    return _DEFAULT
