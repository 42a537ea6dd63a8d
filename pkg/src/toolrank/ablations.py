"""Ablation table runners: truncation strategies, hierarchy-aware reranking
variants, and the extended API list. Values are Recall@k means in [0, 1]."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .evaluation import DEFAULT_SEEN_SUBSETS, _mean, evaluate
from .library import EvalRecord
from .pipeline import RunContext, run_batch
from .rerank import RerankConfig

# The nine truncation settings, grouped m_s<m_u / m_s=m_u / m_s>m_u.
TRUNCATION_PAIRS = (
    (10, 50), (10, 30), (30, 50),
    (10, 10), (30, 30), (50, 50),
    (50, 10), (30, 10), (50, 30),
)

VARIANT_MODES = (
    "toolrerank",
    "toolrerank_none",
    "toolrerank_single",
    "toolrerank_multi",
    "toolrerank_oracle",
)

EXTENSION_SETTINGS = (
    (False, True), (False, False), (True, True), (True, False)
)  # (extend_seen, extend_unseen)


def _type_means(
    records: Sequence[EvalRecord], per_query: dict[str, tuple[float, float]]
) -> dict[str, float]:
    single = [per_query[r.query_id][1] for r in records if r.gold_query_type == "single_tool"]
    multi = [per_query[r.query_id][1] for r in records if r.gold_query_type == "multi_tool"]
    return {"single_avg": _mean(single), "multi_avg": _mean(multi)}


def truncation_table(
    records: Sequence[EvalRecord],
    ctx: RunContext,
    base: RerankConfig = RerankConfig(),
    pairs: Sequence[tuple[int, int]] = TRUNCATION_PAIRS,
    seen_subsets: Sequence[str] = DEFAULT_SEEN_SUBSETS,
) -> list[dict]:
    """Recall@k per (m_s, m_u) setting; m_s > m_u rows bypass config validation."""
    rows = []
    for m_s, m_u in pairs:
        config = replace(base, m_s=m_s, m_u=m_u, validate=False)
        results = run_batch(records, config, ctx, mode="toolrerank")
        report = evaluate(results, records, k=base.k, seen_subsets=seen_subsets)
        rows.append(
            {
                "m_s": m_s,
                "m_u": m_u,
                "seen": report.overall["seen_recall"],
                "unseen": report.overall["unseen_recall"],
                "all": report.overall["all_recall"],
            }
        )
    return rows


def variant_table(
    records: Sequence[EvalRecord],
    ctx: RunContext,
    base: RerankConfig = RerankConfig(),
    seen_subsets: Sequence[str] = DEFAULT_SEEN_SUBSETS,
) -> list[dict]:
    """Recall@k of the hierarchy-aware reranking variants, split by query type."""
    rows = []
    for mode in VARIANT_MODES:
        results = run_batch(records, base, ctx, mode=mode)
        report = evaluate(results, records, k=base.k, seen_subsets=seen_subsets)
        row = {"variant": mode, "all_avg": report.overall["all_recall"]}
        row.update({s: nr[1] for s, nr in sorted(report.per_subset.items())})
        row.update(_type_means(records, report.per_query))
        rows.append(row)
    return rows


def extension_table(
    records: Sequence[EvalRecord],
    ctx: RunContext,
    base: RerankConfig = RerankConfig(),
    seen_subsets: Sequence[str] = DEFAULT_SEEN_SUBSETS,
) -> list[dict]:
    """Recall@k under the four extended-API-list settings."""
    rows = []
    for extend_seen, extend_unseen in EXTENSION_SETTINGS:
        config = replace(base, extend_seen=extend_seen, extend_unseen=extend_unseen)
        results = run_batch(records, config, ctx, mode="toolrerank")
        report = evaluate(results, records, k=base.k, seen_subsets=seen_subsets)
        row = {
            "extend_seen": extend_seen,
            "extend_unseen": extend_unseen,
            "seen": report.overall["seen_recall"],
            "unseen": report.overall["unseen_recall"],
            "all": report.overall["all_recall"],
        }
        row.update(_type_means(records, report.per_query))
        rows.append(row)
    return rows


def format_table(rows: Sequence[dict], percent_keys: Sequence[str]) -> str:
    """Render rows as an aligned text table, metric columns x100 at one decimal."""
    if not rows:
        return ""
    headers = list(rows[0])
    rendered = [headers]
    for row in rows:
        rendered.append(
            [
                f"{100 * row[h]:.1f}" if h in percent_keys else str(row[h])
                for h in headers
            ]
        )
    widths = [max(len(r[i]) for r in rendered) for i in range(len(headers))]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in rendered
    ]
    return "\n".join(lines)
