"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
"""

import json
import math
import random
import time

import pytest

from conftest import make_library
from reference_impls import (
    bfs_components,
    naive_algorithm_one,
    naive_algorithm_two,
    naive_truncate,
)
from test_rerank import DictSim, as_tuples, items_from, random_instance
from toolrank.ablations import (
    extension_table,
    format_table,
    truncation_table,
    variant_table,
)
from toolrank.cli import main
from toolrank.evaluation import GridAxes, evaluate, grid_search, ndcg_at_k, recall_at_k
from toolrank.pipeline import run_batch
from toolrank.rerank import (
    DiversityGraph,
    RerankConfig,
    RerankedItem,
    adaptive_truncate,
    connected_components,
    cross_rerank,
    rerank_multi,
    rerank_single,
)
from toolrank.retrieval import Candidate


def report(name, detail=""):
    print(f"[PASS] {name}" + (f" ({detail})" if detail else ""))


def test_algorithm_fidelity_against_naive_transcriptions():
    """Single- and multi-tool reranking equal the line-by-line transcriptions
    on 1,000 randomized instances each (l <= 50); exact list equality."""
    start = time.perf_counter()
    rng = random.Random(2024)
    for _ in range(1000):
        items, _ = random_instance(rng, max_len=50)
        tau_s = rng.random()
        library = make_library(
            {
                t: ("n", "c", {a: ("x", "d") for a, tt, *_ in as_tuples(items) if tt == t})
                for t in {r.tool_id for r in items}
            }
        )
        config = RerankConfig(tau_s=tau_s, extend_unseen=False)
        got = rerank_single("q", items, config, library)
        assert as_tuples(got) == naive_algorithm_one(as_tuples(items), tau_s)
    for _ in range(1000):
        items, sim = random_instance(rng, max_len=50)
        tau_m = rng.uniform(-0.5, 0.95)
        n = rng.randint(1, 6)
        got = rerank_multi("q", items, RerankConfig(n=n, tau_m=tau_m), sim)
        assert as_tuples(got) == naive_algorithm_two(as_tuples(items), sim.sim, tau_m, n)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report("algorithm fidelity", f"2x1000 instances, {elapsed:.1f}s")


def test_truncation_matches_filter_oracle_with_boundaries():
    """Exact equality with the filter comprehension on 1,000 random candidate
    lists, with candidates planted at positions m_s and m_u."""
    rng = random.Random(4096)
    for _ in range(1000):
        n = rng.randint(2, 60)
        m_u = rng.randint(1, n)
        m_s = rng.randint(1, m_u)
        seen = {f"t{i}" for i in range(n) if rng.random() < 0.5}
        # force both boundary positions to be occupied by both flag kinds over the loop
        if rng.random() < 0.5:
            seen.add(f"t{m_s - 1}")
        else:
            seen.discard(f"t{m_u - 1}")
        spec = {
            f"t{i}": (f"n{i}", "c", {f"t{i}_a": (f"api{i}", "d")}) for i in range(n)
        }
        library = make_library(spec, seen=seen)
        coarse = [
            Candidate(api_id=f"t{i}_a", retrieval_score=1 - i / (n + 1), coarse_rank=i + 1)
            for i in range(n)
        ]
        kept = adaptive_truncate(coarse, library, m_s, m_u)
        flags = {f"t{i}_a": (f"t{i}" in seen) for i in range(n)}
        expected = naive_truncate(
            [(c.api_id, c.coarse_rank) for c in coarse], flags, m_s, m_u
        )
        assert [(c.api_id, c.coarse_rank) for c in kept] == expected
    report("adaptive truncation oracle", "1000 lists incl. boundary positions")


def test_components_match_bfs_closure():
    """Union-find components equal BFS transitive closure on 1,000 random
    graphs of up to 30 nodes; exact partition equality."""
    rng = random.Random(8192)
    for _ in range(1000):
        n = rng.randint(1, 30)
        density = rng.random() * 0.25
        edges = {
            (i, j)
            for i in range(n - 1)
            for j in range(i + 1, n)
            if rng.random() < density
        }
        nodes = [
            RerankedItem(api_id=f"a{i}", tool_id=f"t{i}", rerank_score=0.0,
                         pre_rerank_rank=i)
            for i in range(n)
        ]
        graph = DiversityGraph(nodes=nodes, edges=frozenset(edges))
        assert connected_components(graph) == bfs_components(n, edges)
    report("connected components oracle", "1000 graphs vs BFS closure")


def test_permutation_invariants_ten_thousand_cases():
    """Every rerank stage (extension disabled) permutes its input: zero
    violations over 10,000 generated cases."""
    rng = random.Random(31337)
    violations = 0
    for case in range(10_000):
        items, sim = random_instance(rng, max_len=15)
        stage = case % 3
        if stage == 0:
            library = make_library(
                {
                    t: ("n", "c", {a: ("x", "d") for a, tt, *_ in as_tuples(items) if tt == t})
                    for t in {r.tool_id for r in items}
                }
            )
            config = RerankConfig(tau_s=rng.random(), extend_unseen=False)
            out = rerank_single("q", items, config, library)
        elif stage == 1:
            out = rerank_multi(
                "q", items, RerankConfig(n=rng.randint(1, 4), tau_m=rng.uniform(-1, 1)),
                sim,
            )
        else:
            library = make_library(
                {
                    t: ("n", "c", {a: ("x", "d") for a, tt, *_ in as_tuples(items) if tt == t})
                    for t in {r.tool_id for r in items}
                }
            )

            class Noise:
                def __init__(self, rng):
                    self.rng = rng
                    self.values = {}

                def score(self, query, api):
                    return self.values.setdefault(api.api_id, self.rng.random())

            coarse = [
                Candidate(api_id=r.api_id, retrieval_score=0.0, coarse_rank=i + 1)
                for i, r in enumerate(items)
            ]
            out = cross_rerank("q", coarse, Noise(rng), library)
        if sorted(r.api_id for r in out) != sorted(r.api_id for r in items):
            violations += 1
    assert violations == 0
    report("permutation invariants", "10000 cases, 0 violations")


def test_metric_hand_checks_and_monotonicity():
    """The worked metric examples reproduce to 1e-9 and both metrics are
    nondecreasing in k on 1,000 random rankings."""

    def w(i):
        return 1.0 / math.log2(i + 1)

    assert recall_at_k(["g1", "g2", "x"], {"g1", "g2"}, 5) == 1.0
    assert recall_at_k(["x", "y", "z"], {"g"}, 5) == 0.0
    assert recall_at_k(["a", "x", "b", "y", "z", "c"], {"a", "b", "c"}, 5) == pytest.approx(
        2 / 3, abs=1e-9
    )
    assert ndcg_at_k(["a", "b", "x"], {"a", "b"}, 5) == pytest.approx(1.0, abs=1e-9)
    assert ndcg_at_k(["x", "a", "y", "z", "v"], {"a"}, 5) == pytest.approx(
        w(2) / w(1), abs=1e-9
    )
    assert ndcg_at_k(["x", "a", "y", "b", "z"], {"a", "b"}, 5) == pytest.approx(
        (w(2) + w(4)) / (w(1) + w(2)), abs=1e-9
    )

    rng = random.Random(555)
    pool = [f"d{i}" for i in range(25)]
    for _ in range(1000):
        ranked = rng.sample(pool, k=rng.randint(1, 25))
        gold = set(rng.sample(pool, k=rng.randint(1, 8)))
        prev = (0.0, 0.0)
        for k in range(1, len(ranked) + 2):
            pair = (ndcg_at_k(ranked, gold, k), recall_at_k(ranked, gold, k))
            assert pair[0] >= prev[0] - 1e-12 and pair[1] >= prev[1] - 1e-12
            prev = pair
    report("metric hand checks", "3 worked examples at 1e-9 + monotonicity x1000")


def test_end_to_end_oracle_recall(bench, oracle_ctx):
    """On the seeded benchmark (100 tools / 500 APIs / 60 queries) with the
    oracle scorer, toolrerank reaches Recall@5 = 1.0 on every query with <= 5
    gold APIs, in under 5 seconds."""
    start = time.perf_counter()
    results = run_batch(bench.records, RerankConfig(), oracle_ctx, mode="toolrerank")
    rep = evaluate(results, bench.records, k=5)
    elapsed = time.perf_counter() - start
    for record in bench.records:
        assert len(record.gold_api_ids) <= 5
        assert rep.per_query[record.query_id][1] == 1.0, record.query_id
    assert elapsed < 5.0
    report("end-to-end oracle run", f"Recall@5 = 1.0 on 60/60 queries, {elapsed:.1f}s")


def test_directional_ablations(bench, lexical_ctx):
    """Qualitative table shapes with the lexical scorer: (a) adaptive
    truncation beats fixed settings, (b) toolrerank beats the none-variant,
    (c) matched beats mismatched per query type, (d) unseen extension helps
    the unseen subset. All margins >= 0; full tables printed."""
    start = time.perf_counter()
    records, base = bench.records, RerankConfig()

    trunc = truncation_table(records, lexical_ctx, base)
    by_pair = {(r["m_s"], r["m_u"]): r["all"] for r in trunc}
    print("\nAdaptive truncation (Recall@5):")
    print(format_table(trunc, ("seen", "unseen", "all")))
    for fixed in ((10, 10), (30, 30), (50, 50)):
        assert by_pair[(10, 50)] >= by_pair[fixed], fixed

    variants = variant_table(records, lexical_ctx, base)
    by_variant = {r["variant"]: r for r in variants}
    print("\nHierarchy-aware reranking variants (Recall@5):")
    print(format_table(variants, tuple(k for k in variants[0] if k != "variant")))
    assert by_variant["toolrerank"]["all_avg"] >= by_variant["toolrerank_none"]["all_avg"]
    assert (
        by_variant["toolrerank_single"]["single_avg"]
        >= by_variant["toolrerank_multi"]["single_avg"]
    )
    assert (
        by_variant["toolrerank_multi"]["multi_avg"]
        >= by_variant["toolrerank_single"]["multi_avg"]
    )

    ext = extension_table(records, lexical_ctx, base)
    by_ext = {(r["extend_seen"], r["extend_unseen"]): r for r in ext}
    print("\nExtended API list (Recall@5):")
    print(format_table(ext, ("seen", "unseen", "all", "single_avg", "multi_avg")))
    assert by_ext[(False, True)]["unseen"] >= by_ext[(False, False)]["unseen"]

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report("directional ablations", f"(a)-(d) hold, {elapsed:.1f}s")


def test_baseline_identity_files(tmp_path, bench):
    """rerank_m(m) output files are identical to toolrerank_none with
    m_s = m_u = m on the full synthetic benchmark."""
    out = tmp_path / "bench"
    assert main(["synth", "--seed", "0", "--out", str(out)]) == 0
    common = [
        "--library", str(out / "library.jsonl"),
        "--queries", str(out / "queries.jsonl"),
        "--embeddings", str(out / "embeddings.tsv"),
    ]
    for m in (10, 30, 50):
        a = tmp_path / f"rerank_{m}.jsonl"
        b = tmp_path / f"none_{m}.jsonl"
        assert main(["rerank", *common, "--mode", "rerank_m", "--m", str(m),
                     "--out", str(a)]) == 0
        assert main(["rerank", *common, "--mode", "toolrerank_none",
                     "--m-s", str(m), "--m-u", str(m), "--out", str(b)]) == 0
        a_rows = [
            {k: v for k, v in json.loads(line).items() if k != "mode"}
            for line in a.read_text().splitlines()
        ]
        b_rows = [
            {k: v for k, v in json.loads(line).items() if k != "mode"}
            for line in b.read_text().splitlines()
        ]
        assert a_rows == b_rows
    report("baseline identity", "rerank_m == toolrerank_none for m in {10, 30, 50}")


def test_grid_search_exhaustive_and_argmax(bench, lexical_ctx):
    """The runner enumerates exactly the feasible product of the default
    axes and returns the argmax, verified by rescanning its own table."""
    result = grid_search(bench.records, lexical_ctx, grid=GridAxes())
    expected_rows = {
        (ms, mu, ts, tm, n)
        for ms in (10, 30, 50)
        for mu in (10, 30, 50)
        if ms <= mu
        for ts in (0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
        for tm in (0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
        for n in (2, 3, 4)
    }
    got_rows = {
        (r["m_s"], r["m_u"], r["tau_s"], r["tau_m"], r["n"]) for r in result.table
    }
    assert len(result.table) == len(expected_rows) == 882
    assert got_rows == expected_rows
    best = max(r["recall"] for r in result.table)
    assert result.best_score == best
    winners = sorted(
        (r["m_s"], r["m_u"], r["tau_s"], r["tau_m"], r["n"])
        for r in result.table
        if r["recall"] == best
    )
    assert (
        result.best_config.m_s, result.best_config.m_u, result.best_config.tau_s,
        result.best_config.tau_m, result.best_config.n,
    ) == winners[0]
    report("grid search exhaustiveness", f"882 configs, best recall {best:.3f}")
