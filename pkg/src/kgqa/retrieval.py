"""Passage indexing and top-k retrieval.

The default scorer is a deterministic TF-IDF cosine; an embedding scorer is
available through the LLM gateway's embed interface. External text documents
can be chunked and merged into the corpus before the index is built; after
build the index is immutable.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .verbalize import EXTERNAL_DOCUMENT, Passage


class DuplicatePassageId(ValueError):
    pass


class EmptyDocument(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPassage:
    passage: Passage
    score: float


@dataclass
class RetrievalConfig:
    k: int = 5
    scorer: str = "lexical"  # "lexical" | "embedding"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Index:
    passages: list[Passage]
    config: RetrievalConfig
    # lexical statistics, frozen at build time
    _idf: dict[str, float] = field(default_factory=dict)
    _doc_vectors: list[dict[str, float]] = field(default_factory=list)
    _embeddings: list[list[float]] = field(default_factory=list)
    _embedder: object = None

    def search(self, query: str, k: int | None = None) -> list[ScoredPassage]:
        k = k if k is not None else self.config.k
        if not self.passages or not query.strip():
            return []
        if self.config.scorer == "embedding":
            scores = self._embedding_scores(query)
        else:
            scores = self._lexical_scores(query)
        ranked = sorted(
            zip(self.passages, scores),
            key=lambda pair: (-pair[1], pair[0].id),
        )
        return [ScoredPassage(p, s) for p, s in ranked[:k]]

    def _lexical_scores(self, query: str) -> list[float]:
        counts: dict[str, int] = {}
        for token in _tokenize(query):
            counts[token] = counts.get(token, 0) + 1
        qvec = {
            t: (1.0 + math.log(c)) * self._idf[t]
            for t, c in counts.items()
            if t in self._idf
        }
        qnorm = math.sqrt(sum(w * w for w in qvec.values()))
        scores = []
        for dvec in self._doc_vectors:
            if not qvec or not dvec:
                scores.append(0.0)
                continue
            dot = sum(w * dvec.get(t, 0.0) for t, w in qvec.items())
            dnorm = math.sqrt(sum(w * w for w in dvec.values()))
            scores.append(dot / (qnorm * dnorm) if dot else 0.0)
        return scores

    def _embedding_scores(self, query: str) -> list[float]:
        qvec = self._embedder([query])[0]
        qnorm = math.sqrt(sum(x * x for x in qvec)) or 1.0
        scores = []
        for dvec in self._embeddings:
            dnorm = math.sqrt(sum(x * x for x in dvec)) or 1.0
            dot = sum(a * b for a, b in zip(qvec, dvec))
            scores.append(dot / (qnorm * dnorm))
        return scores


def build_index(
    passages: list[Passage],
    config: RetrievalConfig | None = None,
    embedder=None,
) -> Index:
    """Build an immutable index. embedder: callable texts -> vectors, required
    for the embedding scorer (the gateway's embed interface)."""
    config = config or RetrievalConfig()
    seen: set[str] = set()
    for p in passages:
        if p.id in seen:
            raise DuplicatePassageId(p.id)
        seen.add(p.id)
    index = Index(passages=list(passages), config=config)
    if config.scorer == "embedding":
        if embedder is None:
            raise ValueError("embedding scorer requires an embedder")
        index._embedder = embedder
        index._embeddings = embedder([p.text for p in passages]) if passages else []
        return index
    # document frequencies over the frozen corpus
    doc_tokens = [_tokenize(p.text) for p in passages]
    df: dict[str, int] = {}
    for tokens in doc_tokens:
        for t in set(tokens):
            df[t] = df.get(t, 0) + 1
    n = len(passages)
    index._idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}
    for tokens in doc_tokens:
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        index._doc_vectors.append(
            {t: (1.0 + math.log(c)) * index._idf[t] for t, c in counts.items()}
        )
    return index


def chunk_document(text: str, max_chars: int = 1200) -> list[str]:
    """Split on blank lines; paragraphs longer than max_chars are hard-split."""
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]
    chunks: list[str] = []
    for para in paragraphs:
        while len(para) > max_chars:
            chunks.append(para[:max_chars])
            para = para[max_chars:]
        if para:
            chunks.append(para)
    return chunks


def ingest_documents(
    kg_passages: list[Passage],
    documents: list[tuple[str, str]],
    max_chars: int = 1200,
    warn=None,
) -> list[Passage]:
    """Merge external (doc_id, text) documents into the passage set.

    Empty documents are skipped with a warning. Must run before build_index;
    the corpus is assembled, then frozen.
    """
    merged = list(kg_passages)
    for doc_id, text in documents:
        chunks = chunk_document(text, max_chars)
        if not chunks:
            if warn:
                warn(f"skipping empty document {doc_id!r}")
            continue
        for i, chunk in enumerate(chunks):
            merged.append(
                Passage(
                    id=f"{doc_id}#{i}",
                    text=chunk,
                    source_kind=EXTERNAL_DOCUMENT,
                )
            )
    return merged


def save_passages(passages: list[Passage], path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def load_passages(path: str | Path) -> list[Passage]:
    passages = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                passages.append(Passage.from_dict(json.loads(line)))
    return passages


def save_index(index: Index, path: str | Path):
    """Persist the lexical index as JSON (embedding indexes are rebuilt)."""
    payload = {
        "config": {"k": index.config.k, "scorer": index.config.scorer},
        "passages": [p.to_dict() for p in index.passages],
        "idf": index._idf,
        "docVectors": index._doc_vectors,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path) -> Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    config = RetrievalConfig(**payload["config"])
    index = Index(
        passages=[Passage.from_dict(d) for d in payload["passages"]],
        config=config,
    )
    index._idf = payload["idf"]
    index._doc_vectors = payload["docVectors"]
    return index
