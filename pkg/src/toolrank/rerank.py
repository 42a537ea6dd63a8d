"""Adaptive truncation, cross-scorer reranking, query-type routing, and the two
hierarchy-aware reranking algorithms (tool concentration for single-tool queries,
connected-component diversification for multi-tool queries)."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace, InitVar
from typing import Iterable, Sequence

from .errors import ToolrankError
from .library import EvalRecord, ToolLibrary
from .retrieval import Candidate, tokenize

TRUNCATED_POOL = "truncated_pool"
EXTENDED_POOL = "extended_pool"

COORDINATION_MARKERS = frozenset({"and", "also", "then", "additionally"})

CONFIG_KEYS = (
    "m_s", "m_u", "tau_s", "tau_m", "n", "k", "m",
    "extend_unseen", "extend_seen", "extend_multi",
    "classifier_policy", "similarity_source",
)


@dataclass(frozen=True)
class RerankConfig:
    """All pipeline hyperparameters. Defaults are the best grid values."""

    m_s: int = 10
    m_u: int = 50
    tau_s: float = 0.85
    tau_m: float = 0.7
    n: int = 3
    k: int = 5
    m: int = 50
    extend_unseen: bool = True
    extend_seen: bool = False
    extend_multi: bool = False
    classifier_policy: str = "heuristic"
    similarity_source: str = "doc_embedding"
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        for name in ("m_s", "m_u", "n", "k", "m"):
            if getattr(self, name) < 1:
                raise ToolrankError(f"config {name} must be a positive integer")
        if not 0.0 <= self.tau_s <= 1.0:
            raise ToolrankError(f"tau_s must be in [0, 1], got {self.tau_s}")
        if not -1.0 <= self.tau_m <= 1.0:
            raise ToolrankError(f"tau_m must be in [-1, 1], got {self.tau_m}")
        if not validate:
            return
        if self.m_s > self.m_u:
            raise ToolrankError(
                f"m_s ({self.m_s}) must not exceed m_u ({self.m_u}); "
                "pass validate=False only for ablation sweeps"
            )
        if not self.k <= self.m_u <= self.m:
            raise ToolrankError(
                f"expected k <= m_u <= m, got k={self.k}, m_u={self.m_u}, m={self.m}"
            )


def read_config_file(path) -> dict:
    """Read and key-check a JSON config file without constructing the config."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ToolrankError(f"{path}: invalid JSON config: {err.msg}") from err
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ToolrankError(f"{path}: unknown config keys: {sorted(unknown)}")
    return data


def load_config(path, **overrides) -> RerankConfig:
    """Read a JSON config file; keyword overrides win over file values."""
    data = read_config_file(path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RerankConfig(**data)


@dataclass(frozen=True)
class RerankedItem:
    """One entry of the reranked list R (or the final list F)."""

    api_id: str
    tool_id: str
    rerank_score: float
    origin: str = TRUNCATED_POOL
    pre_rerank_rank: int = 0


@dataclass(frozen=True)
class QueryType:
    value: str  # "single_tool" or "multi_tool"
    confidence: float


def _rank_key(item: RerankedItem):
    return (-item.rerank_score, item.pre_rerank_rank, item.api_id)


def adaptive_truncate(
    coarse: Sequence[Candidate], library: ToolLibrary, m_s: int, m_u: int
) -> list[Candidate]:
    """Keep c_i when its tool is seen and i <= m_s, or unseen and i <= m_u.

    Order-preserving; positions are the candidates' 1-based coarse ranks.
    """
    kept = []
    for cand in coarse:
        api = library.apis.get(cand.api_id)
        if api is None:
            raise ToolrankError(f"candidate {cand.api_id!r} is not in the library")
        if api.tool_id not in library.tools:
            raise ToolrankError(
                f"candidate {cand.api_id!r} references unknown tool {api.tool_id!r}"
            )
        limit = m_s if library.is_seen(api.tool_id) else m_u
        if cand.coarse_rank <= limit:
            kept.append(cand)
    return kept


def cross_rerank(
    query, truncated: Sequence[Candidate], scorer, library: ToolLibrary
) -> list[RerankedItem]:
    """Score every truncated candidate and sort by score (descending).

    Ties break by position in T, then api_id, so equal scores preserve the
    incoming order.
    """
    items = []
    for pos, cand in enumerate(truncated, 1):
        api = library.apis[cand.api_id]
        try:
            score = scorer.score(query, api)
        except ToolrankError as err:
            raise ToolrankError(
                f"scorer failed on ({getattr(query, 'query_id', query)!r}, "
                f"{cand.api_id!r}): {err}"
            ) from err
        items.append(
            RerankedItem(
                api_id=cand.api_id,
                tool_id=api.tool_id,
                rerank_score=score,
                origin=TRUNCATED_POOL,
                pre_rerank_rank=pos,
            )
        )
    items.sort(key=_rank_key)
    return items


class HeuristicClassifier:
    """Multi-tool iff the query carries at least two coordination markers.

    Markers: "and", "also", "then", "additionally" as tokens, plus the bigram
    "as well"; occurrences are counted over the tokenized query. Confidence is
    fixed at 1.0 (uncalibrated)."""

    def classify(self, query) -> QueryType:
        text = query.query_text if isinstance(query, EvalRecord) else str(query)
        tokens = tokenize(text)
        count = sum(1 for t in tokens if t in COORDINATION_MARKERS)
        count += sum(
            1 for a, b in zip(tokens, tokens[1:]) if a == "as" and b == "well"
        )
        value = "multi_tool" if count >= 2 else "single_tool"
        return QueryType(value=value, confidence=1.0)


class OracleClassifier:
    """Gold-label passthrough for evaluation-oracle mode."""

    def classify(self, query) -> QueryType:
        if not isinstance(query, EvalRecord):
            raise ToolrankError("oracle classifier needs an EvalRecord with a gold label")
        return QueryType(value=query.gold_query_type, confidence=1.0)


def classify_query(query, classifier) -> QueryType:
    qt = classifier.classify(query)
    if qt.value not in ("single_tool", "multi_tool"):
        raise ToolrankError(f"classifier produced unknown query type {qt.value!r}")
    return qt


def _extend_and_rescore(
    f1: list[RerankedItem],
    ext_tools: Iterable[str],
    total: int,
    query,
    library: ToolLibrary,
    scorer,
) -> list[RerankedItem]:
    """Pull every library API of each extension tool into F1, then rescore all of F1."""
    present = {item.api_id for item in f1}
    next_rank = total + 1
    for tool_id in sorted(ext_tools):
        for api_id in library.tools[tool_id].api_ids:
            if api_id in present:
                continue
            present.add(api_id)
            f1.append(
                RerankedItem(
                    api_id=api_id,
                    tool_id=tool_id,
                    rerank_score=0.0,
                    origin=EXTENDED_POOL,
                    pre_rerank_rank=next_rank,
                )
            )
            next_rank += 1
    f1 = [
        replace(item, rerank_score=scorer.score(query, library.apis[item.api_id]))
        for item in f1
    ]
    f1.sort(key=_rank_key)
    return f1


def rerank_single(
    query,
    reranked: Sequence[RerankedItem],
    config: RerankConfig,
    library: ToolLibrary,
    scorer=None,
) -> list[RerankedItem]:
    """Concentrate results on candidate tools for a single-tool query.

    The candidate tool set X holds the top result's tool plus the tool of any
    later result scoring above tau_s. F1 keeps the R-order of items whose tool
    is in X, F2 the rest. With extension enabled, every library API of each
    unseen tool in X joins F1 and F1 is rescored before concatenation.
    """
    if not reranked:
        raise ToolrankError("rerank_single needs a nonempty reranked list")
    candidate_tools = {reranked[0].tool_id}
    for item in reranked[1:]:
        if item.rerank_score > config.tau_s:
            candidate_tools.add(item.tool_id)

    f1 = [r for r in reranked if r.tool_id in candidate_tools]
    f2 = [r for r in reranked if r.tool_id not in candidate_tools]

    ext_tools = {
        t
        for t in candidate_tools
        if (config.extend_unseen and not library.is_seen(t))
        or (config.extend_seen and library.is_seen(t))
    }
    if ext_tools:
        if scorer is None:
            raise ToolrankError("extension needs a scorer to rerank the extended list")
        f1 = _extend_and_rescore(f1, ext_tools, len(reranked), query, library, scorer)
    return f1 + f2


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


@dataclass
class DiversityGraph:
    """Graph over reranked results: edges join same-tool or similar items."""

    nodes: list[RerankedItem]
    edges: frozenset[tuple[int, int]]


def build_diversity_graph(
    reranked: Sequence[RerankedItem], tau_m: float, doc_sim
) -> DiversityGraph:
    edges = set()
    for i in range(len(reranked) - 1):
        for j in range(i + 1, len(reranked)):
            if reranked[i].tool_id == reranked[j].tool_id:
                edges.add((i, j))
            elif doc_sim.sim(reranked[i].api_id, reranked[j].api_id) > tau_m:
                edges.add((i, j))
    return DiversityGraph(nodes=list(reranked), edges=frozenset(edges))


def connected_components(graph: DiversityGraph) -> list[list[int]]:
    """Partition node indices into connected components (sorted, by least member)."""
    n = len(graph.nodes)
    uf = UnionFind(n)
    for i, j in graph.edges:
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def rerank_multi(
    query,
    reranked: Sequence[RerankedItem],
    config: RerankConfig,
    doc_sim,
    library: ToolLibrary | None = None,
    scorer=None,
) -> list[RerankedItem]:
    """Diversify results for a multi-tool query.

    Connects results that share a tool or exceed tau_m document similarity,
    keeps the top-n scorers of each connected component in the front block F1
    (R-order), and appends the rest as F2.
    """
    if not reranked:
        raise ToolrankError("rerank_multi needs a nonempty reranked list")
    graph = build_diversity_graph(reranked, config.tau_m, doc_sim)
    selected: set[str] = set()
    for component in connected_components(graph):
        members = sorted((reranked[i] for i in component), key=_rank_key)
        selected.update(item.api_id for item in members[: config.n])

    f1 = [r for r in reranked if r.api_id in selected]
    f2 = [r for r in reranked if r.api_id not in selected]

    if config.extend_multi:
        if library is None or scorer is None:
            raise ToolrankError("multi-query extension needs a library and scorer")
        ext_tools = {
            item.tool_id
            for item in f1
            if (config.extend_unseen and not library.is_seen(item.tool_id))
            or (config.extend_seen and library.is_seen(item.tool_id))
        }
        if ext_tools:
            f1 = _extend_and_rescore(
                f1, ext_tools, len(reranked), query, library, scorer
            )
    return f1 + f2
