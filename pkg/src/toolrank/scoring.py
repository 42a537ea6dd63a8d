"""Pluggable relevance scorers and document-document similarity sources.

Every scorer maps a (query, api) pair into [0, 1] and is deterministic for
fixed inputs. Score-cache file format: TSV lines "query_id\\tapi_id\\tscore".
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .errors import FormatError, ToolrankError
from .library import ApiDoc, EvalRecord
from .retrieval import EmbeddingStore, cosine_sim, tokenize

LEXICAL_WEIGHT = 8.0
LEXICAL_BIAS = -4.0


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def lexical_overlap_score(query_text: str, document_text: str) -> float:
    """Logistic squashing of the query-token coverage of the document.

    sigma(w * |Q & D| / max(1, |Q|) + b) with w=8, b=-4; token sets come from
    the retrieval tokenizer.
    """
    q = set(tokenize(query_text))
    d = set(tokenize(document_text))
    overlap = len(q & d) / max(1, len(q))
    return sigmoid(LEXICAL_WEIGHT * overlap + LEXICAL_BIAS)


def _query_parts(query) -> tuple[str | None, str]:
    if isinstance(query, EvalRecord):
        return query.query_id, query.query_text
    return None, str(query)


class LexicalScorer:
    """Deterministic desk-scale stand-in for a trained cross-scorer."""

    def score(self, query, api: ApiDoc) -> float:
        _, text = _query_parts(query)
        return lexical_overlap_score(text, api.document_text)


class OracleScorer:
    """Test oracle: gold APIs score 1.0, everything else a seeded value below the ceiling."""

    def __init__(self, gold: dict[str, frozenset[str] | set[str]],
                 noise_ceiling: float = 0.25, seed: int = 0):
        if not 0.0 <= noise_ceiling < 0.5:
            raise ToolrankError(f"noise_ceiling must be in [0, 0.5), got {noise_ceiling}")
        self.gold = {q: frozenset(g) for q, g in gold.items()}
        self.noise_ceiling = noise_ceiling
        self.seed = seed

    def score(self, query, api: ApiDoc) -> float:
        query_id, _ = _query_parts(query)
        if query_id is None or query_id not in self.gold:
            raise ToolrankError(f"oracle scorer knows no query {query_id!r}")
        if api.api_id in self.gold[query_id]:
            return 1.0
        key = f"{self.seed}|{query_id}|{api.api_id}".encode()
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return self.noise_ceiling * int.from_bytes(digest, "big") / 2**64


@dataclass
class ScoreCache:
    """Externally computed (query_id, api_id) -> score pairs."""

    scores: dict[tuple[str, str], float] = field(default_factory=dict)
    policy_on_miss: str = "error"  # or "fallback_scorer"


def cached_score(cache: ScoreCache, query_id: str, api_id: str,
                 fallback=None, api: ApiDoc | None = None, query=None) -> float:
    key = (query_id, api_id)
    if key in cache.scores:
        return cache.scores[key]
    if cache.policy_on_miss == "fallback_scorer" and fallback is not None:
        score = fallback.score(query if query is not None else query_id, api)
        cache.scores[key] = score
        return score
    raise ToolrankError(f"no cached score for pair ({query_id!r}, {api_id!r})")


class CachedScorer:
    """Scorer replaying a ScoreCache, optionally falling back on misses."""

    def __init__(self, cache: ScoreCache, fallback=None):
        if cache.policy_on_miss == "fallback_scorer" and fallback is None:
            raise ToolrankError("fallback_scorer policy needs a fallback scorer")
        self.cache = cache
        self.fallback = fallback

    def score(self, query, api: ApiDoc) -> float:
        query_id, _ = _query_parts(query)
        if query_id is None:
            raise ToolrankError("cached scorer needs a query with a query_id")
        return cached_score(
            self.cache, query_id, api.api_id, fallback=self.fallback, api=api, query=query
        )


def load_score_cache(path, policy_on_miss: str = "error") -> ScoreCache:
    cache = ScoreCache(policy_on_miss=policy_on_miss)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(path, line_no, "expected query_id\\tapi_id\\tscore")
            try:
                score = float(parts[2])
            except ValueError:
                raise FormatError(path, line_no, f"bad score {parts[2]!r}") from None
            if not 0.0 <= score <= 1.0:
                raise FormatError(path, line_no, f"score {score} outside [0, 1]")
            cache.scores[(parts[0], parts[1])] = score
    return cache


def save_score_cache(cache: ScoreCache, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (query_id, api_id), score in cache.scores.items():
            fh.write(f"{query_id}\t{api_id}\t{score!r}\n")


def embedding_doc_sim(store: EmbeddingStore, api_a: str, api_b: str) -> float:
    """Cosine similarity between two document vectors."""
    if api_a == api_b:
        return 1.0
    return cosine_sim(store.get(api_a), store.get(api_b))


class EmbeddingDocSim:
    """Document similarity backed by document embeddings; pair results are cached."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self._cache: dict[tuple[str, str], float] = {}

    def sim(self, api_a: str, api_b: str) -> float:
        if api_a == api_b:
            return 1.0
        key = (api_a, api_b) if api_a < api_b else (api_b, api_a)
        if key not in self._cache:
            self._cache[key] = embedding_doc_sim(self.store, *key)
        return self._cache[key]


class MatrixDocSim:
    """Document similarity from an external pair list; unlisted pairs default to 0."""

    def __init__(self, pairs: dict[tuple[str, str], float], default: float = 0.0):
        self.pairs = {}
        for (a, b), s in pairs.items():
            if not -1.0 <= s <= 1.0:
                raise ToolrankError(f"similarity {s} for ({a!r}, {b!r}) outside [-1, 1]")
            self.pairs[(a, b) if a < b else (b, a)] = s
        self.default = default

    @classmethod
    def from_file(cls, path, default: float = 0.0) -> "MatrixDocSim":
        pairs: dict[tuple[str, str], float] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise FormatError(path, line_no, "expected api_a\\tapi_b\\tsim")
                try:
                    pairs[(parts[0], parts[1])] = float(parts[2])
                except ValueError:
                    raise FormatError(path, line_no, f"bad sim {parts[2]!r}") from None
        return cls(pairs, default=default)

    def sim(self, api_a: str, api_b: str) -> float:
        if api_a == api_b:
            return 1.0
        key = (api_a, api_b) if api_a < api_b else (api_b, api_a)
        return self.pairs.get(key, self.default)
