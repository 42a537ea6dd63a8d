import json
import math

import numpy as np
import pytest

from embed_export.cli import main
from embed_export.encoders import ExportError, HashingEncoder, get_encoder
from embed_export.exporter import ExportJob, export_embeddings, export_scores, read_pairs


def write_library(path, n_tools=2, apis_per_tool=2, with_document_text=False):
    lines = []
    for t in range(n_tools):
        tool_id = f"t{t}"
        api_ids = [f"{tool_id}_a{j}" for j in range(apis_per_tool)]
        lines.append({
            "kind": "tool", "tool_id": tool_id, "tool_name": f"Tool{t}",
            "category": f"Cat{t % 3}", "api_ids": api_ids,
        })
        for j, api_id in enumerate(api_ids):
            record = {
                "kind": "api", "api_id": api_id, "tool_id": tool_id,
                "api_name": f"api_{t}_{j}", "description": f"does thing {t} {j}",
            }
            if with_document_text:
                record["document_text"] = f"custom text {t} {j}"
            lines.append(record)
    lines.append({"kind": "meta", "seen_tools": ["t0"]})
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
    return [l["api_id"] for l in lines if l.get("kind") == "api"]


def write_queries(path, n=3):
    lines = [
        {
            "query_id": f"q{i}", "query_text": f"find thing {i} please",
            "gold_api_ids": [f"t0_a0"], "gold_query_type": "single_tool",
            "subset": "I1-Inst",
        }
        for i in range(n)
    ]
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
    return [l["query_id"] for l in lines]


def test_embedding_file_shape(tmp_path):
    lib = tmp_path / "library.jsonl"
    api_ids = write_library(lib, n_tools=2, apis_per_tool=2)
    out = tmp_path / "emb.tsv"
    job = ExportJob(library=str(lib), out_embeddings=str(out))
    export_embeddings(job)
    lines = out.read_text().splitlines()
    assert lines[0] == "dim=256"
    assert len(lines) == 1 + len(api_ids)  # header plus one row per API
    assert [l.split("\t")[0] for l in lines[1:]] == api_ids


def test_rerun_is_bit_identical(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib)
    queries = tmp_path / "queries.jsonl"
    write_queries(queries)
    outs = []
    for name in ("a.tsv", "b.tsv"):
        out = tmp_path / name
        job = ExportJob(library=str(lib), queries=str(queries), out_embeddings=str(out))
        export_embeddings(job)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_vectors_unit_norm(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib, n_tools=3, apis_per_tool=3)
    out = tmp_path / "emb.tsv"
    export_embeddings(ExportJob(library=str(lib), out_embeddings=str(out)))
    for line in out.read_text().splitlines()[1:]:
        vec = np.array([float(x) for x in line.split("\t")[1].split()])
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6


def test_document_text_preferred_over_rendering(tmp_path):
    lib_a, lib_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_library(lib_a, with_document_text=True)
    write_library(lib_b, with_document_text=False)
    job_a = ExportJob(library=str(lib_a))
    job_b = ExportJob(library=str(lib_b))
    assert job_a.texts["t0_a0"] == "custom text 0 0"
    assert job_b.texts["t0_a0"] == "Cat0 | Tool0 | api_0_0 | does thing 0 0"


def test_empty_pair_list(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib)
    out = tmp_path / "scores.tsv"
    export_scores(ExportJob(library=str(lib), out_scores=str(out)), [])
    assert out.read_text() == ""


def test_scores_in_range(tmp_path):
    lib = tmp_path / "library.jsonl"
    api_ids = write_library(lib, n_tools=5, apis_per_tool=2)
    queries = tmp_path / "queries.jsonl"
    query_ids = write_queries(queries, n=2)
    out = tmp_path / "scores.tsv"
    pairs = [(q, a) for q in query_ids for a in api_ids][:10]
    export_scores(
        ExportJob(library=str(lib), queries=str(queries), out_scores=str(out)), pairs
    )
    lines = out.read_text().splitlines()
    assert len(lines) == 10
    for line in lines:
        q, a, s = line.split("\t")
        assert 0.0 <= float(s) <= 1.0


def test_unresolvable_pair_id(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib)
    with pytest.raises(ExportError, match="ghost"):
        export_scores(
            ExportJob(library=str(lib), out_scores=str(tmp_path / "s.tsv")),
            [("ghost", "t0_a0")],
        )


def test_id_collision(tmp_path):
    lib = tmp_path / "library.jsonl"
    write_library(lib)
    queries = tmp_path / "queries.jsonl"
    queries.write_text(
        json.dumps({
            "query_id": "t0_a0", "query_text": "collides", "gold_api_ids": ["t0_a0"],
            "gold_query_type": "single_tool", "subset": "I1-Inst",
        }) + "\n",
        encoding="utf-8",
    )
    with pytest.raises(ExportError, match="collision"):
        ExportJob(library=str(lib), queries=str(queries))


def test_hashing_encoder_properties():
    enc = HashingEncoder(64)
    vecs = enc.encode(["alpha beta", "alpha beta", "", "gamma"])
    assert np.array_equal(vecs[0], vecs[1])
    for vec in vecs:
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-12  # empty text included
    assert get_encoder("hash:64").dim == 64
    with pytest.raises(ExportError):
        get_encoder("hash:abc")


def test_unknown_model_errors_cleanly():
    with pytest.raises(ExportError):
        get_encoder("definitely/not-a-model-anywhere")


def test_cli_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["--library", "x.jsonl"])  # no outputs requested
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["--library", "x.jsonl", "--out-scores", "s.tsv"])  # pairs missing
    assert err.value.code == 2


def test_cli_end_to_end(tmp_path, capsys):
    lib = tmp_path / "library.jsonl"
    write_library(lib)
    queries = tmp_path / "queries.jsonl"
    write_queries(queries, n=2)
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("q0\tt0_a0\nq1\tt1_a1\n", encoding="utf-8")
    emb = tmp_path / "emb.tsv"
    scores = tmp_path / "scores.tsv"
    code = main([
        "--library", str(lib), "--queries", str(queries),
        "--out-embeddings", str(emb), "--pairs", str(pairs),
        "--out-scores", str(scores),
    ])
    assert code == 0
    assert emb.exists() and scores.exists()
    assert len(read_pairs(pairs)) == 2


def test_cli_data_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{nope\n", encoding="utf-8")
    code = main(["--library", str(bad), "--out-embeddings", str(tmp_path / "e.tsv")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
