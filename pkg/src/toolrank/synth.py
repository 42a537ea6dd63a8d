"""Seeded synthetic benchmark generator.

Builds a tool library, gold-labeled queries, and an embedding store whose
vectors plant a controlled retrieval geometry per query:

* shallow gold documents near the query vector (top coarse ranks),
* clusters of near-duplicate tools whose APIs pad the ranks below the gold
  and stay mutually similar (each cluster forms one connected component),
* for multi-tool queries, a second gold document held behind the pad block
  (shallow but lexically weak when its tool is seen, coarse-deep when unseen),
* for seen single-tool queries, a "trap" tool whose APIs sit just past the
  pad block but carry most of the query's tokens,
* for unseen single-tool queries, a gold API placed outside the coarse pool
  entirely, reachable only through the extended API list.

Multi-tool query texts carry at least two coordination markers; single-tool
texts at most one, so the heuristic classifier separates them cleanly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ToolrankError
from .library import ApiDoc, EvalRecord, Tool, ToolLibrary, render_document
from .retrieval import EmbeddingStore

# Target cosine similarities to the owning query vector, per planted role.
SIM_GOLD_TOP = 0.92
SIM_GOLD_SECOND = 0.90
SIM_GOLD_SHALLOW_WEAK = 0.60  # second multi gold, seen tool: high rank, weak text
SIM_GOLD_DEEP = 0.36  # second multi gold, unseen tool: below the pad block
SIM_TRAP = 0.33  # seen trap APIs: just deeper than the pad block
SIM_OUT_OF_POOL = -0.15  # never retrieved into the coarse pool
SIM_PAD = 0.44  # cluster APIs relative to every query they pad
PLANT_JITTER = 0.01


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters. Defaults give 100 tools / 500 APIs / 60 queries."""

    tools: int = 100
    apis_per_tool: int = 5
    clusters: int = 15
    cluster_tools: int = 4
    seen_fraction: float = 0.5
    single_seen: int = 10
    single_unseen: int = 20
    multi_seen: int = 20
    multi_unseen: int = 10
    dim: int = 128
    seed: int = 0


@dataclass
class SynthBenchmark:
    library: ToolLibrary
    records: list[EvalRecord]
    embeddings: EmbeddingStore


@dataclass
class _Query:
    query_id: str
    kind: str  # single_seen / single_unseen / multi_seen / multi_unseen
    subset: str
    gold: list[str] = field(default_factory=list)
    text: str = ""
    plants: list[tuple[str, float]] = field(default_factory=list)
    pad_cluster: int | None = None


class _Vocab:
    def __init__(self):
        self.next_id = 0

    def word(self) -> str:
        token = f"w{self.next_id:04d}"
        self.next_id += 1
        return token

    def words(self, count: int) -> list[str]:
        return [self.word() for _ in range(count)]


def _check_feasible(spec: SynthSpec) -> dict[str, int]:
    singles = spec.single_seen + spec.single_unseen
    multis = spec.multi_seen + spec.multi_unseen
    if min(spec.tools, spec.apis_per_tool, spec.clusters, spec.cluster_tools, spec.dim) < 1:
        raise ToolrankError("infeasible spec: counts must be positive")
    if min(spec.single_seen, spec.single_unseen, spec.multi_seen, spec.multi_unseen) < 0:
        raise ToolrankError("infeasible spec: query counts must be non-negative")
    if singles and spec.apis_per_tool < 2:
        raise ToolrankError(
            "infeasible spec: single-tool queries need >= 2 APIs per tool"
        )
    if multis and spec.tools < 2:
        raise ToolrankError("infeasible spec: multi-tool queries need >= 2 tools")
    if multis > 2 * spec.clusters:
        raise ToolrankError(
            f"infeasible spec: {multis} multi-tool queries need >= {math.ceil(multis / 2)}"
            " similarity clusters (2 per cluster)"
        )
    if spec.single_seen > spec.clusters:
        raise ToolrankError(
            "infeasible spec: each seen single-tool query needs its own pad cluster"
        )

    per_single_tool = spec.apis_per_tool // 2
    counts = {
        "cluster": spec.clusters * spec.cluster_tools,
        "trap": spec.single_seen,
        "gold_ss": math.ceil(spec.single_seen / per_single_tool) if spec.single_seen else 0,
        "gold_su": math.ceil(spec.single_unseen / per_single_tool) if spec.single_unseen else 0,
        "gold_ms": max(2, math.ceil(2 * spec.multi_seen / spec.apis_per_tool))
        if spec.multi_seen
        else 0,
        "gold_mu": max(2, math.ceil(2 * spec.multi_unseen / spec.apis_per_tool))
        if spec.multi_unseen
        else 0,
    }
    used = sum(counts.values())
    if used > spec.tools:
        raise ToolrankError(
            f"infeasible spec: needs {used} tools for clusters/traps/gold, have {spec.tools}"
        )
    target_seen = round(spec.seen_fraction * spec.tools)
    forced_seen = counts["trap"] + counts["gold_ss"] + counts["gold_ms"]
    forced_unseen = counts["gold_su"] + counts["gold_mu"]
    if forced_seen > target_seen:
        raise ToolrankError(
            f"infeasible spec: seen fraction {spec.seen_fraction} allows {target_seen} "
            f"seen tools but {forced_seen} are required"
        )
    if forced_unseen > spec.tools - target_seen:
        raise ToolrankError(
            f"infeasible spec: seen fraction {spec.seen_fraction} leaves "
            f"{spec.tools - target_seen} unseen tools but {forced_unseen} are required"
        )
    counts["target_seen"] = target_seen
    return counts


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _plant(rng: np.random.Generator, query_vec: np.ndarray, target_sim: float) -> np.ndarray:
    axis = rng.standard_normal(query_vec.shape[0])
    axis -= np.dot(axis, query_vec) * query_vec
    axis = _unit(axis)
    vec = target_sim * query_vec + math.sqrt(1.0 - target_sim**2) * axis
    vec = vec + PLANT_JITTER * rng.standard_normal(query_vec.shape[0])
    return _unit(vec)


def _pad_base(
    rng: np.random.Generator, hosts: list[np.ndarray], target_sim: float, dim: int
) -> np.ndarray:
    """Unit vector with the exact target cosine to every host query vector."""
    axis = rng.standard_normal(dim)
    if not hosts:
        return _unit(axis)
    host_matrix = np.stack(hosts)
    parallel, *_ = np.linalg.lstsq(
        host_matrix, np.full(len(hosts), target_sim), rcond=None
    )
    basis, _ = np.linalg.qr(host_matrix.T)
    axis -= basis @ (basis.T @ axis)
    residual = math.sqrt(max(0.0, 1.0 - float(np.dot(parallel, parallel))))
    return parallel + residual * _unit(axis)


def generate_synthetic_benchmark(spec: SynthSpec) -> SynthBenchmark:
    """Build the benchmark. Deterministic for a fixed spec (including seed)."""
    counts = _check_feasible(spec)
    rng = random.Random(spec.seed)
    nrng = np.random.default_rng(spec.seed)
    vocab = _Vocab()
    categories = vocab.words(max(1, min(10, spec.tools)))

    tools: dict[str, Tool] = {}
    api_names: dict[str, str] = {}
    descriptions: dict[str, list[str]] = {}

    def new_tool(idx: int) -> Tool:
        tool_id = f"t{idx:03d}"
        tool = Tool(
            tool_id=tool_id,
            tool_name=vocab.word(),
            category=categories[idx % len(categories)],
            api_ids=tuple(f"{tool_id}_a{j}" for j in range(spec.apis_per_tool)),
        )
        tools[tool_id] = tool
        for api_id in tool.api_ids:
            api_names[api_id] = vocab.word()
            descriptions[api_id] = vocab.words(2)
        return tool

    next_tool = 0

    def take_tools(count: int) -> list[Tool]:
        nonlocal next_tool
        block = [new_tool(next_tool + i) for i in range(count)]
        next_tool += count
        return block

    cluster_pools = [take_tools(spec.cluster_tools) for _ in range(spec.clusters)]
    trap_tools = take_tools(counts["trap"])
    gold_ss = take_tools(counts["gold_ss"])
    gold_su = take_tools(counts["gold_su"])
    gold_ms = take_tools(counts["gold_ms"])
    gold_mu = take_tools(counts["gold_mu"])
    take_tools(spec.tools - next_tool)  # plain background tools

    cluster_themes = [vocab.words(3) for _ in range(spec.clusters)]

    def mention(api_id: str) -> str:
        return " ".join([api_names[api_id]] + descriptions[api_id])

    per_single_tool = spec.apis_per_tool // 2

    def single_gold(pool: list[Tool], i: int) -> tuple[Tool, str, str]:
        tool = pool[i // per_single_tool]
        base = (i % per_single_tool) * 2
        return tool, tool.api_ids[base], tool.api_ids[base + 1]

    multi_usage: dict[str, int] = {}

    def multi_gold(pool: list[Tool], slot: int) -> str:
        tool = pool[slot % len(pool)]
        idx = multi_usage.get(tool.tool_id, 0)
        multi_usage[tool.tool_id] = idx + 1
        return tool.api_ids[idx]

    queries: list[_Query] = []
    qn = 0

    # single-tool, seen: two shallow golds; a trap tool lurks past the pad block
    for i in range(spec.single_seen):
        subset = "I1-Inst"
        q = _Query(f"q{qn:03d}", "single_seen", subset)
        qn += 1
        tool, g1, g2 = single_gold(gold_ss, i)
        q.gold = [g1, g2]
        q.plants = [(g1, SIM_GOLD_TOP), (g2, SIM_GOLD_SECOND)]
        q.pad_cluster = i % spec.clusters
        q.text = (
            f"find {mention(g1)} and {mention(g2)} "
            f"using {tool.tool_name} {tool.category} please"
        )
        trap = trap_tools[i]
        q.plants += [(a, SIM_TRAP) for a in trap.api_ids]
        bait = ["find", api_names[g1], *descriptions[g1], "using", "please", api_names[g2]]
        for a in trap.api_ids:
            descriptions[a] = bait + descriptions[a]
        queries.append(q)

    # single-tool, unseen: one shallow gold plus one gold outside the coarse pool
    for i in range(spec.single_unseen):
        subset = "I1-Tool" if i < spec.single_unseen / 2 else "I1-Cat"
        q = _Query(f"q{qn:03d}", "single_unseen", subset)
        qn += 1
        tool, g1, g_out = single_gold(gold_su, i)
        q.gold = [g1, g_out]
        q.plants = [(g1, SIM_GOLD_TOP), (g_out, SIM_OUT_OF_POOL)]
        q.text = (
            f"find {mention(g1)} and {mention(g_out)} "
            f"using {tool.tool_name} {tool.category} please"
        )
        queries.append(q)

    # multi-tool: one strong gold + one weak gold held behind the cluster pad block
    multi_kinds = ["multi_seen"] * spec.multi_seen + ["multi_unseen"] * spec.multi_unseen
    for i, kind in enumerate(multi_kinds):
        if kind == "multi_seen":
            rel, total, pool = i, spec.multi_seen, gold_ms
            subset = "I2-Inst" if rel < total / 2 else "I3-Inst"
            sim_b = SIM_GOLD_SHALLOW_WEAK
        else:
            rel, total, pool = i - spec.multi_seen, spec.multi_unseen, gold_mu
            subset = "I2-Cat"
            sim_b = SIM_GOLD_DEEP
        q = _Query(f"q{qn:03d}", kind, subset)
        qn += 1
        g_a = multi_gold(pool, 2 * rel)
        g_b = multi_gold(pool, 2 * rel + 1)
        q.gold = [g_a, g_b]
        q.plants = [(g_a, SIM_GOLD_TOP), (g_b, sim_b)]
        q.pad_cluster = i // 2
        theme = cluster_themes[q.pad_cluster]
        q.text = f"find {mention(g_a)} and {' '.join(theme)} and also {mention(g_b)}"
        # the strong gold shares part of the theme so it outscores the pads
        descriptions[g_a] = descriptions[g_a] + theme[:2]
        queries.append(q)

    # cluster APIs: theme text plus a "find" hook, shared across the cluster
    for c, pool in enumerate(cluster_pools):
        for tool in pool:
            for api_id in tool.api_ids:
                descriptions[api_id] = cluster_themes[c] + ["find"] + descriptions[api_id]

    # seen/unseen assignment: traps and seen-query gold are forced seen,
    # unseen-query gold forced unseen, the rest sampled to hit the target
    forced_seen = {t.tool_id for t in trap_tools + gold_ss + gold_ms}
    forced_unseen = {t.tool_id for t in gold_su + gold_mu}
    flexible = sorted(tools.keys() - forced_seen - forced_unseen)
    extra = rng.sample(flexible, counts["target_seen"] - len(forced_seen))
    seen_tools = frozenset(forced_seen | set(extra))

    apis: dict[str, ApiDoc] = {}
    for tool in tools.values():
        for api_id in tool.api_ids:
            api = ApiDoc(
                api_id=api_id,
                tool_id=tool.tool_id,
                api_name=api_names[api_id],
                description=" ".join(descriptions[api_id]),
            )
            apis[api_id] = replace(api, document_text=render_document(api, tool))
    library = ToolLibrary(tools=tools, apis=apis, seen_tools=seen_tools)
    library.validate()

    records = [
        EvalRecord(
            query_id=q.query_id,
            query_text=q.text,
            gold_api_ids=frozenset(q.gold),
            gold_query_type="single_tool" if q.kind.startswith("single") else "multi_tool",
            subset=q.subset,
        )
        for q in queries
    ]

    store = EmbeddingStore(dimension=spec.dim)
    query_vecs = {q.query_id: _unit(nrng.standard_normal(spec.dim)) for q in queries}
    for query_id, vec in query_vecs.items():
        store.add(query_id, vec)

    cluster_hosts: dict[int, list[str]] = {c: [] for c in range(spec.clusters)}
    for q in queries:
        if q.pad_cluster is not None:
            cluster_hosts[q.pad_cluster].append(q.query_id)

    planted: dict[str, np.ndarray] = {}
    for q in queries:
        for api_id, target in q.plants:
            planted[api_id] = _plant(nrng, query_vecs[q.query_id], target)
    for c, pool in enumerate(cluster_pools):
        hosts = [query_vecs[qid] for qid in cluster_hosts[c]]
        base = _pad_base(nrng, hosts, SIM_PAD, spec.dim)
        for tool in pool:
            for api_id in tool.api_ids:
                planted[api_id] = _unit(
                    base + PLANT_JITTER * nrng.standard_normal(spec.dim)
                )

    for api_id in apis:
        vec = planted.get(api_id)
        if vec is None:
            vec = _unit(nrng.standard_normal(spec.dim))
        store.add(api_id, vec)

    return SynthBenchmark(library=library, records=records, embeddings=store)
