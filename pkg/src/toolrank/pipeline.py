"""End-to-end flow: retrieve -> truncate -> cross-rerank -> classify ->
hierarchy-aware rerank -> top-k cut, with baseline and ablation modes."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ToolrankError
from .library import EvalRecord, ToolLibrary
from .rerank import (
    HeuristicClassifier,
    QueryType,
    RerankConfig,
    adaptive_truncate,
    classify_query,
    cross_rerank,
    rerank_multi,
    rerank_single,
)

MODES = (
    "toolrerank",
    "bm25",
    "dpr",
    "rerank_m",
    "toolrerank_none",
    "toolrerank_single",
    "toolrerank_multi",
    "toolrerank_oracle",
)


@dataclass
class PipelineResult:
    query_id: str
    mode: str
    final_list: list[str]
    topk: list[str]
    trace: dict = field(default_factory=dict)


def _as_query(query) -> EvalRecord:
    if isinstance(query, EvalRecord):
        return query
    digest = hashlib.blake2b(str(query).encode("utf-8"), digest_size=4).hexdigest()
    return EvalRecord(
        query_id=f"adhoc-{digest}",
        query_text=str(query),
        gold_api_ids=frozenset(["_unknown_"]),
        gold_query_type="single_tool",
        subset="adhoc",
    )


def run_pipeline(
    query,
    config: RerankConfig,
    library: ToolLibrary,
    retriever,
    scorer=None,
    classifier=None,
    doc_sim=None,
    mode: str = "toolrerank",
) -> PipelineResult:
    """Run one query through the pipeline in the given mode.

    Stage order: coarse retrieval (m candidates) -> adaptive truncation
    (skipped for bm25/dpr/rerank_m) -> cross rerank (skipped for bm25/dpr) ->
    query-type classification -> hierarchy-aware rerank -> top-k cut. The
    trace snapshots every stage.
    """
    if mode not in MODES:
        raise ToolrankError(f"unknown mode {mode!r}; expected one of {MODES}")
    record = _as_query(query)
    trace: dict = {}

    def stage(name, fn):
        try:
            return fn()
        except ToolrankError as err:
            raise ToolrankError(f"pipeline stage {name!r}: {err}") from err

    coarse = stage("coarse_retrieval", lambda: retriever.retrieve(record, config.m))
    trace["coarse"] = [[c.api_id, c.retrieval_score] for c in coarse]

    if mode in ("bm25", "dpr"):
        final_ids = [c.api_id for c in coarse]
        trace["final"] = list(final_ids)
        return PipelineResult(
            query_id=record.query_id,
            mode=mode,
            final_list=final_ids,
            topk=final_ids[: config.k],
            trace=trace,
        )

    if mode == "rerank_m":
        truncated = list(coarse)
    else:
        truncated = stage(
            "adaptive_truncation",
            lambda: adaptive_truncate(coarse, library, config.m_s, config.m_u),
        )
    trace["truncated"] = [c.api_id for c in truncated]

    if scorer is None:
        raise ToolrankError(f"mode {mode!r} needs a relevance scorer")
    reranked = stage(
        "cross_rerank", lambda: cross_rerank(record, truncated, scorer, library)
    )
    trace["reranked"] = [[r.api_id, r.rerank_score] for r in reranked]

    if mode in ("rerank_m", "toolrerank_none"):
        qtype = None
    elif mode == "toolrerank_single":
        qtype = QueryType("single_tool", 1.0)
    elif mode == "toolrerank_multi":
        qtype = QueryType("multi_tool", 1.0)
    elif mode == "toolrerank_oracle":
        qtype = QueryType(record.gold_query_type, 1.0)
    else:
        clf = classifier if classifier is not None else HeuristicClassifier()
        qtype = stage("classify_query", lambda: classify_query(record, clf))
    trace["query_type"] = (
        {"value": qtype.value, "confidence": qtype.confidence} if qtype else None
    )

    if qtype is None:
        final = list(reranked)
    elif qtype.value == "single_tool":
        final = stage(
            "rerank_single",
            lambda: rerank_single(record, reranked, config, library, scorer),
        )
    else:
        if doc_sim is None:
            raise ToolrankError("multi-tool reranking needs a document similarity source")
        final = stage(
            "rerank_multi",
            lambda: rerank_multi(record, reranked, config, doc_sim, library, scorer),
        )
    final_ids = [r.api_id for r in final]
    trace["final"] = list(final_ids)

    return PipelineResult(
        query_id=record.query_id,
        mode=mode,
        final_list=final_ids,
        topk=final_ids[: config.k],
        trace=trace,
    )


@dataclass
class RunContext:
    """Shared immutable components for batch pipeline runs."""

    library: ToolLibrary
    retriever: object
    scorer: object = None
    classifier: object = None
    doc_sim: object = None


def run_batch(
    records: Sequence[EvalRecord],
    config: RerankConfig,
    ctx: RunContext,
    mode: str = "toolrerank",
    jobs: int = 1,
) -> list[PipelineResult]:
    """Run the pipeline over many queries; results keep the input order."""

    def one(record):
        return run_pipeline(
            record,
            config,
            ctx.library,
            ctx.retriever,
            scorer=ctx.scorer,
            classifier=ctx.classifier,
            doc_sim=ctx.doc_sim,
            mode=mode,
        )

    if jobs <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, records))


def save_results(results: Sequence[PipelineResult], path, with_trace: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            obj = {
                "query_id": res.query_id,
                "mode": res.mode,
                "final_list": res.final_list,
                "topk": res.topk,
            }
            if with_trace:
                obj["trace"] = res.trace
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_results(path) -> list[PipelineResult]:
    from .library import _iter_jsonl  # shared JSONL reader

    results = []
    for _, obj in _iter_jsonl(path):
        results.append(
            PipelineResult(
                query_id=obj["query_id"],
                mode=obj.get("mode", ""),
                final_list=list(obj["final_list"]),
                topk=list(obj["topk"]),
                trace=obj.get("trace", {}),
            )
        )
    return results
