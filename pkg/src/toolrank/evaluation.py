"""Ranking metrics (NDCG@k, Recall@k), per-subset reports, and grid search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Sequence

from .errors import ToolrankError
from .library import EvalRecord
from .pipeline import PipelineResult, RunContext
from .rerank import (
    HeuristicClassifier,
    RerankConfig,
    adaptive_truncate,
    classify_query,
    cross_rerank,
    rerank_multi,
    rerank_single,
)

DEFAULT_SEEN_SUBSETS = ("I1-Inst", "I2-Inst", "I3-Inst")


def recall_at_k(ranked: Sequence[str], gold: Iterable[str], k: int) -> float:
    """|gold & top-k| / |gold|."""
    gold = set(gold)
    if not gold:
        raise ToolrankError("recall needs a nonempty gold set")
    return len(gold & set(ranked[:k])) / len(gold)


def ndcg_at_k(ranked: Sequence[str], gold: Iterable[str], k: int) -> float:
    """Binary-gain NDCG: DCG over the top-k hits, normalized by the ideal DCG
    of the full gold set. Nondecreasing in k for fixed inputs."""
    gold = set(gold)
    if not gold:
        raise ToolrankError("ndcg needs a nonempty gold set")
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, api_id in enumerate(ranked[:k], 1)
        if api_id in gold
    )
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, len(gold) + 1))
    return dcg / idcg


@dataclass
class MetricReport:
    """Per-query, per-subset, and seen/unseen/all aggregates."""

    k: int
    per_query: dict[str, tuple[float, float]]  # query_id -> (ndcg, recall)
    per_subset: dict[str, tuple[float, float]]
    overall: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "per_query": {q: {"ndcg": n, "recall": r} for q, (n, r) in self.per_query.items()},
            "per_subset": {
                s: {"ndcg": n, "recall": r} for s, (n, r) in self.per_subset.items()
            },
            "overall": dict(self.overall),
        }


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def evaluate(
    results: Sequence[PipelineResult],
    records: Sequence[EvalRecord],
    k: int = 5,
    seen_subsets: Sequence[str] = DEFAULT_SEEN_SUBSETS,
) -> MetricReport:
    """Score pipeline results against gold records and aggregate per subset."""
    by_id = {r.query_id: r for r in records}
    per_query: dict[str, tuple[float, float]] = {}
    subsets: dict[str, list[tuple[float, float]]] = {}
    seen_pairs: list[tuple[float, float]] = []
    unseen_pairs: list[tuple[float, float]] = []
    for result in results:
        record = by_id.get(result.query_id)
        if record is None:
            raise ToolrankError(f"result for unknown query {result.query_id!r}")
        pair = (
            ndcg_at_k(result.final_list, record.gold_api_ids, k),
            recall_at_k(result.final_list, record.gold_api_ids, k),
        )
        per_query[result.query_id] = pair
        subsets.setdefault(record.subset, []).append(pair)
        (seen_pairs if record.subset in seen_subsets else unseen_pairs).append(pair)

    per_subset = {
        s: (_mean([p[0] for p in pairs]), _mean([p[1] for p in pairs]))
        for s, pairs in subsets.items()
    }
    all_pairs = list(per_query.values())
    overall = {
        "seen_ndcg": _mean([p[0] for p in seen_pairs]),
        "seen_recall": _mean([p[1] for p in seen_pairs]),
        "unseen_ndcg": _mean([p[0] for p in unseen_pairs]),
        "unseen_recall": _mean([p[1] for p in unseen_pairs]),
        "all_ndcg": _mean([p[0] for p in all_pairs]),
        "all_recall": _mean([p[1] for p in all_pairs]),
    }
    return MetricReport(k=k, per_query=per_query, per_subset=per_subset, overall=overall)


def write_report_csv(report: MetricReport, path) -> None:
    """Table-3-style CSV: one row per subset plus aggregates, x100 at one decimal."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "ndcg_at_k", "recall_at_k"])
        for subset in sorted(report.per_subset):
            ndcg, recall = report.per_subset[subset]
            writer.writerow([subset, f"{100 * ndcg:.1f}", f"{100 * recall:.1f}"])
        for group in ("seen", "unseen", "all"):
            writer.writerow(
                [
                    f"{group}-average",
                    f"{100 * report.overall[f'{group}_ndcg']:.1f}",
                    f"{100 * report.overall[f'{group}_recall']:.1f}",
                ]
            )


@dataclass(frozen=True)
class GridAxes:
    """Hyperparameter search axes; the feasible Cartesian product is evaluated."""

    m_s: tuple[int, ...] = (10, 30, 50)
    m_u: tuple[int, ...] = (10, 30, 50)
    tau_s: tuple[float, ...] = (0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
    tau_m: tuple[float, ...] = (0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
    n: tuple[int, ...] = (2, 3, 4)


class _MemoScorer:
    """Memoizes (query_id, api_id) scores around a deterministic scorer."""

    def __init__(self, scorer):
        self.scorer = scorer
        self.memo: dict[tuple[str, str], float] = {}

    def score(self, query, api):
        key = (query.query_id, api.api_id)
        if key not in self.memo:
            self.memo[key] = self.scorer.score(query, api)
        return self.memo[key]


@dataclass
class GridSearchResult:
    best_config: RerankConfig
    best_score: float
    objective: str
    table: list[dict] = field(default_factory=list)


def grid_search(
    records: Sequence[EvalRecord],
    ctx: RunContext,
    grid: GridAxes = GridAxes(),
    base: RerankConfig | None = None,
    objective: str = "recall",
    enforce_order: bool = True,
) -> GridSearchResult:
    """Exhaustively evaluate the grid's Cartesian product on dev records.

    Pairs with m_s > m_u are infeasible and skipped unless enforce_order is
    False (ablation sweeps). Stage results are shared across configs that
    agree on their upstream hyperparameters, so the full product stays cheap.
    Best config maximizes the objective; ties break toward the
    lexicographically smallest (m_s, m_u, tau_s, tau_m, n).
    """
    if not records:
        raise ToolrankError("grid search needs at least one dev record")
    if objective not in ("recall", "ndcg"):
        raise ToolrankError(f"unknown objective {objective!r}")
    base = base or RerankConfig()
    pairs = [
        (ms, mu)
        for ms, mu in product(grid.m_s, grid.m_u)
        if not enforce_order or ms <= mu
    ]
    if not pairs:
        raise ToolrankError("grid is infeasible: no (m_s, m_u) pair with m_s <= m_u")
    scorer = _MemoScorer(ctx.scorer)
    classifier = ctx.classifier if ctx.classifier is not None else HeuristicClassifier()
    metric_index = 0 if objective == "ndcg" else 1

    # per query: route plus metric contributions keyed by the stage parameters
    single_scores: list[dict[tuple, tuple[float, float]]] = []
    multi_scores: list[dict[tuple, tuple[float, float]]] = []
    for record in records:
        coarse = ctx.retriever.retrieve(record, base.m)
        route = classify_query(record, classifier).value
        contributions: dict[tuple, tuple[float, float]] = {}
        for ms, mu in pairs:
            truncated = adaptive_truncate(coarse, ctx.library, ms, mu)
            reranked = cross_rerank(record, truncated, scorer, ctx.library)
            if route == "single_tool":
                for tau_s in grid.tau_s:
                    cfg = replace(base, m_s=ms, m_u=mu, tau_s=tau_s, validate=False)
                    final = rerank_single(record, reranked, cfg, ctx.library, scorer)
                    ranked = [r.api_id for r in final]
                    contributions[(ms, mu, tau_s)] = (
                        ndcg_at_k(ranked, record.gold_api_ids, base.k),
                        recall_at_k(ranked, record.gold_api_ids, base.k),
                    )
            else:
                for tau_m in grid.tau_m:
                    for n in grid.n:
                        cfg = replace(
                            base, m_s=ms, m_u=mu, tau_m=tau_m, n=n, validate=False
                        )
                        final = rerank_multi(
                            record, reranked, cfg, ctx.doc_sim, ctx.library, scorer
                        )
                        ranked = [r.api_id for r in final]
                        contributions[(ms, mu, tau_m, n)] = (
                            ndcg_at_k(ranked, record.gold_api_ids, base.k),
                            recall_at_k(ranked, record.gold_api_ids, base.k),
                        )
        (single_scores if route == "single_tool" else multi_scores).append(contributions)

    table: list[dict] = []
    best_key = None
    best_row = None
    for ms, mu in pairs:
        for tau_s, tau_m, n in product(grid.tau_s, grid.tau_m, grid.n):
            pairs_for_config = [c[(ms, mu, tau_s)] for c in single_scores]
            pairs_for_config += [c[(ms, mu, tau_m, n)] for c in multi_scores]
            row = {
                "m_s": ms,
                "m_u": mu,
                "tau_s": tau_s,
                "tau_m": tau_m,
                "n": n,
                "ndcg": _mean([p[0] for p in pairs_for_config]),
                "recall": _mean([p[1] for p in pairs_for_config]),
            }
            table.append(row)
            key = (-row[objective], ms, mu, tau_s, tau_m, n)
            if best_key is None or key < best_key:
                best_key, best_row = key, row
    assert best_row is not None
    best_config = replace(
        base,
        m_s=best_row["m_s"],
        m_u=best_row["m_u"],
        tau_s=best_row["tau_s"],
        tau_m=best_row["tau_m"],
        n=best_row["n"],
        validate=best_row["m_s"] <= best_row["m_u"],
    )
    return GridSearchResult(
        best_config=best_config,
        best_score=best_row[objective],
        objective=objective,
        table=table,
    )


def write_grid_csv(result: GridSearchResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m_s", "m_u", "tau_s", "tau_m", "n", "ndcg", "recall"])
        for row in result.table:
            writer.writerow(
                [row["m_s"], row["m_u"], row["tau_s"], row["tau_m"], row["n"],
                 repr(row["ndcg"]), repr(row["recall"])]
            )
