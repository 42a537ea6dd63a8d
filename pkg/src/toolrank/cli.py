"""Command-line surface: synth, index, retrieve, rerank, eval, grid-search.

Subcommands compose through files (JSONL libraries/queries/results, TSV
embeddings and score caches). Exit codes: 0 success, 1 data/validation error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ToolrankError
from .evaluation import (
    GridAxes,
    evaluate,
    grid_search,
    write_grid_csv,
    write_report_csv,
)
from .library import load_library, load_records, save_library, save_records
from .pipeline import MODES, RunContext, load_results, run_batch, save_results
from .rerank import (
    HeuristicClassifier,
    OracleClassifier,
    RerankConfig,
    read_config_file,
)
from .retrieval import (
    Bm25Retriever,
    DenseRetriever,
    InvertedIndex,
    build_index,
    load_embeddings,
    save_embeddings,
)
from .scoring import (
    CachedScorer,
    EmbeddingDocSim,
    LexicalScorer,
    MatrixDocSim,
    load_score_cache,
)
from .synth import SynthSpec, generate_synthetic_benchmark


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolrank",
        description="Adaptive, hierarchy-aware reranking for tool/API retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic benchmark")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--tools", type=int, default=100)
    p.add_argument("--apis-per-tool", type=int, default=5)
    p.add_argument("--clusters", type=int, default=15, help="similar-tool clusters")
    p.add_argument("--cluster-tools", type=int, default=4, help="tools per cluster")
    p.add_argument("--seen-fraction", type=float, default=0.5)
    p.add_argument("--single-seen", type=int, default=10)
    p.add_argument("--single-unseen", type=int, default=20)
    p.add_argument("--multi-seen", type=int, default=20)
    p.add_argument("--multi-unseen", type=int, default=10)
    p.add_argument("--dim", type=int, default=128, help="embedding dimension")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("index", help="build and save a BM25 inverted index")
    p.add_argument("--library", required=True)
    p.add_argument("--out", required=True, help="index JSON path")

    p = sub.add_parser("retrieve", help="run coarse retrieval only")
    p.add_argument("--method", choices=["bm25", "dense"], default="dense")
    p.add_argument("--library", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--embeddings", help="embedding file (dense retrieval)")
    p.add_argument("--index", help="prebuilt index JSON (bm25); built on the fly if absent")
    p.add_argument("--m", type=int, default=50, help="candidate pool size")
    p.add_argument("--strict-empty", action="store_true",
                   help="return no candidates for queries with no indexed term")
    p.add_argument("--out", required=True, help="candidates JSONL path")

    p = sub.add_parser("rerank", help="run the full pipeline")
    p.add_argument("--library", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--embeddings", help="embedding file (dense retrieval, doc similarity)")
    p.add_argument("--scores", help="score-cache TSV replacing the lexical scorer")
    p.add_argument("--scores-miss", choices=["error", "lexical"], default="error",
                   help="what to do on a score-cache miss")
    p.add_argument("--config", help="JSON config file; flags below override it")
    p.add_argument("--mode", choices=list(MODES), default="toolrerank")
    p.add_argument("--retriever", choices=["dense", "bm25"], default="dense",
                   help="coarse retriever for reranking modes")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--m-s", type=int, dest="m_s")
    p.add_argument("--m-u", type=int, dest="m_u")
    p.add_argument("--tau-s", type=float, dest="tau_s")
    p.add_argument("--tau-m", type=float, dest="tau_m")
    p.add_argument("--n", type=int)
    p.add_argument("--extend-unseen", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--extend-seen", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--classifier", choices=["heuristic", "oracle"], default="heuristic")
    p.add_argument("--similarity", choices=["doc_embedding", "external_matrix"],
                   default="doc_embedding")
    p.add_argument("--sim-matrix", help="TSV api_a\\tapi_b\\tsim (external_matrix)")
    p.add_argument("--jobs", type=int, default=1, help="parallel query evaluation")
    p.add_argument("--trace", action="store_true", help="include per-stage traces")
    p.add_argument("--out", required=True, help="results JSONL path")

    p = sub.add_parser("eval", help="score result files against qrels")
    p.add_argument("--results", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seen-subsets", default=",".join(("I1-Inst", "I2-Inst", "I3-Inst")),
                   help="comma-separated subset labels counted as seen")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write a CSV report here")

    p = sub.add_parser("grid-search", help="exhaustive hyperparameter search")
    p.add_argument("--library", required=True)
    p.add_argument("--queries", required=True, help="dev queries with gold labels")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--scores", help="score-cache TSV replacing the lexical scorer")
    p.add_argument("--grid", help="JSON file with axes m_s/m_u/tau_s/tau_m/n")
    p.add_argument("--objective", choices=["recall", "ndcg"], default="recall")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--no-enforce-order", action="store_true",
                   help="also sweep m_s > m_u settings")
    p.add_argument("--out", required=True, help="result JSON path")
    p.add_argument("--csv", help="also write the full table as CSV")
    return parser


def _save_index(index: InvertedIndex, path) -> None:
    obj = {
        "postings": {t: [[a, tf] for a, tf in pl] for t, pl in index.postings.items()},
        "doc_lengths": index.doc_lengths,
        "avg_doc_length": index.avg_doc_length,
        "doc_count": index.doc_count,
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")


def _load_index(path) -> InvertedIndex:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return InvertedIndex(
        postings={t: [(a, tf) for a, tf in pl] for t, pl in obj["postings"].items()},
        doc_lengths=obj["doc_lengths"],
        avg_doc_length=obj["avg_doc_length"],
        doc_count=obj["doc_count"],
    )


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        tools=args.tools,
        apis_per_tool=args.apis_per_tool,
        clusters=args.clusters,
        cluster_tools=args.cluster_tools,
        seen_fraction=args.seen_fraction,
        single_seen=args.single_seen,
        single_unseen=args.single_unseen,
        multi_seen=args.multi_seen,
        multi_unseen=args.multi_unseen,
        dim=args.dim,
        seed=args.seed,
    )
    bench = generate_synthetic_benchmark(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_library(bench.library, out / "library.jsonl")
    save_records(bench.records, out / "queries.jsonl")
    save_embeddings(bench.embeddings, out / "embeddings.tsv")
    print(
        f"wrote {len(bench.library.tools)} tools, {len(bench.library.apis)} APIs, "
        f"{len(bench.records)} queries to {out}"
    )
    return 0


def _cmd_index(args) -> int:
    library = load_library(args.library)
    _save_index(build_index(library), args.out)
    print(f"indexed {len(library.apis)} documents -> {args.out}")
    return 0


def _cmd_retrieve(args) -> int:
    library = load_library(args.library)
    records = load_records(args.queries, library)
    if args.method == "dense":
        if not args.embeddings:
            raise ToolrankError("dense retrieval needs --embeddings")
        retriever = DenseRetriever(load_embeddings(args.embeddings), library)
    else:
        index = _load_index(args.index) if args.index else build_index(library)
        retriever = Bm25Retriever(index, strict_empty=args.strict_empty)
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            candidates = retriever.retrieve(record, args.m)
            fh.write(
                json.dumps(
                    {
                        "query_id": record.query_id,
                        "candidates": [
                            [c.api_id, c.retrieval_score, c.coarse_rank]
                            for c in candidates
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"retrieved candidates for {len(records)} queries -> {args.out}")
    return 0


def _make_config(args) -> RerankConfig:
    data = read_config_file(args.config) if args.config else {}
    data.update(
        {
            key: getattr(args, key)
            for key in ("k", "m", "m_s", "m_u", "tau_s", "tau_m", "n",
                        "extend_unseen", "extend_seen")
            if getattr(args, key) is not None
        }
    )
    data["classifier_policy"] = args.classifier
    data["similarity_source"] = args.similarity
    if args.mode == "rerank_m":
        # rerank_m ignores the truncation cutoffs; align them with the pool size
        m = data.get("m", RerankConfig().m)
        data["m_s"] = data["m_u"] = m
    return RerankConfig(**data)


def _cmd_rerank(args) -> int:
    library = load_library(args.library)
    records = load_records(args.queries, library)
    config = _make_config(args)

    store = load_embeddings(args.embeddings) if args.embeddings else None
    if args.mode == "bm25" or args.retriever == "bm25":
        retriever = Bm25Retriever(build_index(library))
    else:
        if store is None:
            raise ToolrankError(f"mode {args.mode!r} with a dense retriever needs --embeddings")
        retriever = DenseRetriever(store, library)

    if args.scores:
        policy = "fallback_scorer" if args.scores_miss == "lexical" else "error"
        cache = load_score_cache(args.scores, policy_on_miss=policy)
        scorer = CachedScorer(
            cache, fallback=LexicalScorer() if policy == "fallback_scorer" else None
        )
    else:
        scorer = LexicalScorer()

    if config.similarity_source == "external_matrix":
        if not args.sim_matrix:
            raise ToolrankError("similarity_source external_matrix needs --sim-matrix")
        doc_sim = MatrixDocSim.from_file(args.sim_matrix)
    elif store is not None:
        doc_sim = EmbeddingDocSim(store)
    else:
        doc_sim = None

    classifier = OracleClassifier() if args.classifier == "oracle" else HeuristicClassifier()
    ctx = RunContext(
        library=library, retriever=retriever, scorer=scorer,
        classifier=classifier, doc_sim=doc_sim,
    )
    results = run_batch(records, config, ctx, mode=args.mode, jobs=args.jobs)
    save_results(results, args.out, with_trace=args.trace)
    print(f"reranked {len(results)} queries in mode {args.mode} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    results = load_results(args.results)
    records = load_records(args.qrels)
    seen_subsets = tuple(s for s in args.seen_subsets.split(",") if s)
    report = evaluate(results, records, k=args.k, seen_subsets=seen_subsets)
    Path(args.out).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if args.csv:
        write_report_csv(report, args.csv)
    print(
        f"all-average: NDCG@{args.k} {100 * report.overall['all_ndcg']:.1f}, "
        f"Recall@{args.k} {100 * report.overall['all_recall']:.1f} -> {args.out}"
    )
    return 0


def _cmd_grid_search(args) -> int:
    library = load_library(args.library)
    records = load_records(args.queries, library)
    store = load_embeddings(args.embeddings)
    if args.scores:
        scorer = CachedScorer(load_score_cache(args.scores))
    else:
        scorer = LexicalScorer()
    if args.grid:
        axes = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        grid = GridAxes(**{k: tuple(v) for k, v in axes.items()})
    else:
        grid = GridAxes()
    ctx = RunContext(
        library=library,
        retriever=DenseRetriever(store, library),
        scorer=scorer,
        classifier=HeuristicClassifier(),
        doc_sim=EmbeddingDocSim(store),
    )
    base = RerankConfig(k=args.k, m=args.m)
    result = grid_search(
        records, ctx, grid=grid, base=base, objective=args.objective,
        enforce_order=not args.no_enforce_order,
    )
    best = result.best_config
    Path(args.out).write_text(
        json.dumps(
            {
                "best_config": {
                    "m_s": best.m_s, "m_u": best.m_u, "tau_s": best.tau_s,
                    "tau_m": best.tau_m, "n": best.n, "k": best.k, "m": best.m,
                },
                "best_score": result.best_score,
                "objective": result.objective,
                "evaluated": len(result.table),
                "table": result.table,
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    if args.csv:
        write_grid_csv(result, args.csv)
    print(
        f"evaluated {len(result.table)} configs; best {result.objective} "
        f"{result.best_score:.4f} at m_s={best.m_s} m_u={best.m_u} "
        f"tau_s={best.tau_s} tau_m={best.tau_m} n={best.n} -> {args.out}"
    )
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "index": _cmd_index,
    "retrieve": _cmd_retrieve,
    "rerank": _cmd_rerank,
    "eval": _cmd_eval,
    "grid-search": _cmd_grid_search,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ToolrankError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
