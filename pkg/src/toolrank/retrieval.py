"""Coarse-grained retrieval: Okapi BM25 over an inverted index, cosine over dense vectors.

Embedding file format: header line "dim=<D>", then one line per vector
"<id>\\t<f1> <f2> ... <fD>". JSON Lines ({"id": ..., "vec": [...]}) is also
accepted on read.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FormatError, ToolrankError
from .library import ToolLibrary

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Candidate:
    """One coarse retrieval result: API id, score, and 1-based rank in C."""

    api_id: str
    retrieval_score: float
    coarse_rank: int


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int


def build_index(
    library: ToolLibrary, tokenizer: Callable[[str], list[str]] = tokenize
) -> InvertedIndex:
    """Index every API's rendered document. Postings are sorted by api_id."""
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for api_id in sorted(library.apis):
        tokens = tokenizer(library.apis[api_id].document_text)
        doc_lengths[api_id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((api_id, tf))
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count if doc_count else 0.0
    return InvertedIndex(
        postings=postings, doc_lengths=doc_lengths, avg_doc_length=avg, doc_count=doc_count
    )


def bm25_idf(index: InvertedIndex, term: str) -> float:
    n = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.doc_count - n + 0.5) / (n + 0.5))


def _ranked_candidates(scored: dict[str, float], m: int) -> list[Candidate]:
    order = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[:m]
    return [
        Candidate(api_id=a, retrieval_score=float(s), coarse_rank=i)
        for i, (a, s) in enumerate(order, 1)
    ]


def bm25_retrieve(
    index: InvertedIndex, query_text: str, m: int, strict_empty: bool = False
) -> list[Candidate]:
    """Top-min(m, doc_count) documents by Okapi BM25 (k1=1.2, b=0.75).

    A query sharing no indexed term yields all-zero scores; with
    strict_empty=True that case returns an empty list instead of the
    tie-break ordering.
    """
    if m < 1:
        raise ToolrankError(f"m must be >= 1, got {m}")
    scores: dict[str, float] = {a: 0.0 for a in index.doc_lengths}
    matched = False
    for term in tokenize(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        matched = True
        idf = bm25_idf(index, term)
        for api_id, tf in plist:
            dl = index.doc_lengths[api_id]
            denom = tf + BM25_K1 * (1 - BM25_B + BM25_B * dl / index.avg_doc_length)
            scores[api_id] += idf * tf * (BM25_K1 + 1) / denom
    if not matched and strict_empty:
        return []
    return _ranked_candidates(scores, m)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two dense vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ToolrankError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ToolrankError("cosine similarity undefined for zero-norm vectors")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class EmbeddingStore:
    """Dense vectors keyed by api_id (documents) or query_id (queries)."""

    dimension: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, vec_id: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise ToolrankError(
                f"vector {vec_id!r} has dimension {vec.shape}, expected ({self.dimension},)"
            )
        if not np.linalg.norm(vec) > 0.0:
            raise ToolrankError(f"vector {vec_id!r} has zero norm")
        if vec_id in self.vectors:
            raise ToolrankError(f"duplicate vector id {vec_id!r}")
        self.vectors[vec_id] = vec

    def get(self, vec_id: str) -> np.ndarray:
        try:
            return self.vectors[vec_id]
        except KeyError:
            raise ToolrankError(f"no vector stored for id {vec_id!r}") from None


def load_embeddings(path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first.startswith("dim="):
            try:
                store = EmbeddingStore(dimension=int(first[4:]))
            except ValueError:
                raise FormatError(path, 1, f"bad header {first!r}") from None
            for line_no, line in enumerate(fh, 2):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    vec_id, rest = line.split("\t", 1)
                    vec = np.array([float(x) for x in rest.split()], dtype=np.float64)
                except ValueError as err:
                    raise FormatError(path, line_no, f"bad vector line: {err}") from err
                try:
                    store.add(vec_id, vec)
                except ToolrankError as err:
                    raise FormatError(path, line_no, str(err)) from err
            return store
    # JSON Lines fallback
    store = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                vec_id, vec = obj["id"], np.array(obj["vec"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise FormatError(path, line_no, f"bad embedding record: {err}") from err
            if store is None:
                store = EmbeddingStore(dimension=len(vec))
            try:
                store.add(vec_id, vec)
            except ToolrankError as err:
                raise FormatError(path, line_no, str(err)) from err
    if store is None:
        raise FormatError(path, 1, "empty embedding file")
    return store


def save_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={store.dimension}\n")
        for vec_id, vec in store.vectors.items():
            fh.write(vec_id + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


def dense_retrieve(
    store: EmbeddingStore, query_id: str, library: ToolLibrary, m: int
) -> list[Candidate]:
    """Exact full scan: top-min(m, |apis|) APIs by cosine similarity to the query."""
    if m < 1:
        raise ToolrankError(f"m must be >= 1, got {m}")
    q = store.get(query_id)
    scores: dict[str, float] = {}
    for api_id in library.apis:
        scores[api_id] = cosine_sim(q, store.get(api_id))
    return _ranked_candidates(scores, m)


class Bm25Retriever:
    """Coarse retriever over a BM25 index; works from query text alone."""

    def __init__(self, index: InvertedIndex, strict_empty: bool = False):
        self.index = index
        self.strict_empty = strict_empty

    def retrieve(self, query, m: int) -> list[Candidate]:
        text = query if isinstance(query, str) else query.query_text
        return bm25_retrieve(self.index, text, m, strict_empty=self.strict_empty)


class DenseRetriever:
    """Coarse retriever over an embedding store; needs a stored query vector."""

    def __init__(self, store: EmbeddingStore, library: ToolLibrary):
        self.store = store
        self.library = library

    def retrieve(self, query, m: int) -> list[Candidate]:
        if isinstance(query, str):
            raise ToolrankError(
                "dense retrieval needs a query with a stored vector, not raw text"
            )
        return dense_retrieve(self.store, query.query_id, self.library, m)
