"""Reads the tool-library and query JSONL formats, batch-encodes the rendered
documents and query texts, and writes the embedding / score-cache files the
toolrank engine consumes. File writes are atomic (write then rename)."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import DEFAULT_MODEL, ExportError, get_encoder

_WHITESPACE = re.compile(r"\s+")


@dataclass
class ExportJob:
    library: str | None = None
    queries: str | None = None
    model: str = DEFAULT_MODEL
    batch_size: int = 32
    out_embeddings: str | None = None
    out_scores: str | None = None
    texts: dict[str, str] = field(default_factory=dict)  # id -> text, input order

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExportError(f"batch size must be positive, got {self.batch_size}")
        if self.library:
            self._read_library(self.library)
        if self.queries:
            self._read_queries(self.queries)

    def _add(self, text_id: str, text: str, path, line_no: int) -> None:
        if text_id in self.texts:
            raise ExportError(f"{path}:{line_no}: id collision on {text_id!r}")
        self.texts[text_id] = text

    def _read_library(self, path) -> None:
        tools: dict[str, dict] = {}
        apis: list[tuple[int, dict]] = []
        for line_no, obj in _jsonl(path):
            kind = obj.get("kind")
            if kind == "tool":
                tools[_need(obj, "tool_id", path, line_no)] = obj
            elif kind == "api":
                apis.append((line_no, obj))
        for line_no, obj in apis:
            text = obj.get("document_text", "")
            if not text:
                tool = tools.get(_need(obj, "tool_id", path, line_no))
                if tool is None:
                    raise ExportError(
                        f"{path}:{line_no}: api references unknown tool "
                        f"{obj.get('tool_id')!r}"
                    )
                parts = [
                    tool.get("category", ""),
                    tool.get("tool_name", ""),
                    _need(obj, "api_name", path, line_no),
                    obj.get("description", ""),
                ]
                text = " | ".join(
                    _WHITESPACE.sub(" ", p).strip() for p in parts
                ).rstrip()
            self._add(_need(obj, "api_id", path, line_no), text, path, line_no)

    def _read_queries(self, path) -> None:
        for line_no, obj in _jsonl(path):
            self._add(
                _need(obj, "query_id", path, line_no),
                _need(obj, "query_text", path, line_no),
                path,
                line_no,
            )


def _need(obj: dict, key: str, path, line_no: int):
    if key not in obj:
        raise ExportError(f"{path}:{line_no}: missing field {key!r}")
    return obj[key]


def _jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as err:
                raise ExportError(f"{path}:{line_no}: invalid JSON: {err.msg}") from err


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def encode_all(job: ExportJob) -> dict[str, np.ndarray]:
    if not job.texts:
        raise ExportError("nothing to encode: no library or queries given")
    encoder = get_encoder(job.model)
    ids = list(job.texts)
    vectors = encoder.encode([job.texts[i] for i in ids], batch_size=job.batch_size)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors = vectors / norms
    return dict(zip(ids, vectors))


def export_embeddings(job: ExportJob) -> str:
    """Encode every document/query and write the embedding file. Returns the path."""
    if not job.out_embeddings:
        raise ExportError("export_embeddings needs an output path")
    vectors = encode_all(job)
    dim = next(iter(vectors.values())).shape[0]
    lines = [f"dim={dim}"]
    for vec_id, vec in vectors.items():
        lines.append(vec_id + "\t" + " ".join(repr(float(x)) for x in vec))
    _atomic_write(job.out_embeddings, "\n".join(lines) + "\n")
    return job.out_embeddings


def read_pairs(path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ExportError(f"{path}:{line_no}: expected query_id\\tapi_id")
            pairs.append((parts[0], parts[1]))
    return pairs


def export_scores(job: ExportJob, pairs: list[tuple[str, str]]) -> str:
    """Score (query, api) pairs with the encoder's squashed cosine and write
    the score-cache TSV. Returns the path."""
    if not job.out_scores:
        raise ExportError("export_scores needs an output path")
    vectors = encode_all(job) if pairs else {}
    lines = []
    for query_id, api_id in pairs:
        for needed in (query_id, api_id):
            if needed not in vectors:
                raise ExportError(f"cannot score unknown id {needed!r}")
        cosine = float(np.dot(vectors[query_id], vectors[api_id]))
        score = min(1.0, max(0.0, (cosine + 1.0) / 2.0))
        lines.append(f"{query_id}\t{api_id}\t{score!r}")
    _atomic_write(job.out_scores, "\n".join(lines) + ("\n" if lines else ""))
    return job.out_scores
