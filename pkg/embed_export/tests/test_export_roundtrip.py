"""Round-trip acceptance: exported files load into the toolrank engine without
error, self-cosine is 1.0 within 1e-6, and replayed scores match the export."""

import subprocess
import sys

import numpy as np
import pytest

from embed_export.cli import main as export_main
from embed_export.exporter import ExportJob, export_embeddings, export_scores

from test_embed_export import write_library, write_queries


@pytest.fixture()
def exported(tmp_path):
    lib = tmp_path / "library.jsonl"
    api_ids = write_library(lib, n_tools=4, apis_per_tool=3)
    queries = tmp_path / "queries.jsonl"
    query_ids = write_queries(queries, n=4)
    emb = tmp_path / "embeddings.tsv"
    scores = tmp_path / "scores.tsv"
    job = ExportJob(
        library=str(lib), queries=str(queries),
        out_embeddings=str(emb), out_scores=str(scores),
    )
    export_embeddings(job)
    pairs = [(q, a) for q in query_ids for a in api_ids]
    export_scores(job, pairs)
    return {
        "lib": lib, "queries": queries, "emb": emb, "scores": scores,
        "api_ids": api_ids, "query_ids": query_ids, "pairs": pairs,
    }


def test_primary_loads_embeddings_and_self_cosine(exported):
    from toolrank.retrieval import cosine_sim, load_embeddings

    store = load_embeddings(exported["emb"])
    assert set(store.vectors) == set(exported["api_ids"]) | set(exported["query_ids"])
    for vec_id, vec in store.vectors.items():
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6
        assert cosine_sim(vec, vec) == pytest.approx(1.0, abs=1e-6)


def test_primary_replays_exported_scores_exactly(exported):
    from toolrank.library import load_library, load_records
    from toolrank.scoring import CachedScorer, load_score_cache

    library = load_library(exported["lib"])
    records = {r.query_id: r for r in load_records(exported["queries"], library)}
    cache = load_score_cache(exported["scores"])
    scorer = CachedScorer(cache)
    raw = {}
    for line in exported["scores"].read_text().splitlines():
        q, a, s = line.split("\t")
        raw[(q, a)] = float(s)
    assert set(raw) == set(exported["pairs"])
    for (q, a), expected in raw.items():
        assert scorer.score(records[q], library.apis[a]) == expected


def test_primary_cli_consumes_export(tmp_path, exported):
    """Drive the engine's CLI end to end on exported files."""
    out = tmp_path / "results.jsonl"
    proc = subprocess.run(
        [
            sys.executable, "-m", "toolrank.cli", "rerank",
            "--library", str(exported["lib"]),
            "--queries", str(exported["queries"]),
            "--embeddings", str(exported["emb"]),
            "--scores", str(exported["scores"]),
            "--mode", "toolrerank",
            "--m", "12", "--m-s", "6", "--m-u", "12",
            "--out", str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == len(exported["query_ids"])


def test_export_cli_then_primary_retrieve(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib, n_tools=3, apis_per_tool=2)
    queries = tmp_path / "queries.jsonl"
    write_queries(queries, n=2)
    emb = tmp_path / "emb.tsv"
    assert export_main([
        "--library", str(lib), "--queries", str(queries), "--out-embeddings", str(emb),
    ]) == 0
    proc = subprocess.run(
        [
            sys.executable, "-m", "toolrank.cli", "retrieve",
            "--method", "dense",
            "--library", str(lib), "--queries", str(queries),
            "--embeddings", str(emb), "--m", "4",
            "--out", str(tmp_path / "coarse.jsonl"),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
