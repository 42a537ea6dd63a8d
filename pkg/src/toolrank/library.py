"""Hierarchical tool library: data model, JSONL ingest/serialization, document rendering.

File formats (JSON Lines, one object per line):

Library file -- three record kinds:
    {"kind": "tool", "tool_id": ..., "tool_name": ..., "category": ..., "api_ids": [...]}
    {"kind": "api", "api_id": ..., "tool_id": ..., "api_name": ..., "description": ...,
     "document_text": ...}          # document_text optional on input; rendered if absent
    {"kind": "meta", "seen_tools": [...]}   # at most one; defaults to no seen tools

Queries/qrels file -- one EvalRecord per line:
    {"query_id": ..., "query_text": ..., "gold_api_ids": [...],
     "gold_query_type": "single_tool"|"multi_tool", "subset": ...}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .errors import FormatError, ToolrankError

QUERY_TYPES = ("single_tool", "multi_tool")

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class ApiDoc:
    """One API: identity, parent tool, and the rendered document text."""

    api_id: str
    tool_id: str
    api_name: str
    description: str
    document_text: str = ""


@dataclass(frozen=True)
class Tool:
    tool_id: str
    tool_name: str
    category: str
    api_ids: tuple[str, ...]


@dataclass(frozen=True)
class EvalRecord:
    """A query with its gold API set, gold query type, and subset label."""

    query_id: str
    query_text: str
    gold_api_ids: frozenset[str]
    gold_query_type: str
    subset: str


@dataclass
class ToolLibrary:
    """The full tool/API hierarchy. Immutable after load; safe for concurrent readers."""

    tools: dict[str, Tool]
    apis: dict[str, ApiDoc]
    seen_tools: frozenset[str]

    def is_seen(self, tool_id: str) -> bool:
        return tool_id in self.seen_tools

    def tool_of(self, api_id: str) -> Tool:
        return self.tools[self.apis[api_id].tool_id]

    def apis_of(self, tool_id: str) -> list[ApiDoc]:
        return [self.apis[a] for a in self.tools[tool_id].api_ids]

    def validate(self) -> None:
        """Check cross-reference closure and per-type invariants; raise on violation."""
        for api in self.apis.values():
            if not api.tool_id:
                raise ToolrankError(f"api {api.api_id!r} has an empty tool_id")
            if api.tool_id not in self.tools:
                raise ToolrankError(
                    f"api {api.api_id!r} references unknown tool {api.tool_id!r}"
                )
            if not api.document_text:
                raise ToolrankError(f"api {api.api_id!r} has empty document text")
        for tool in self.tools.values():
            if not tool.api_ids:
                raise ToolrankError(f"tool {tool.tool_id!r} has no APIs")
            for api_id in tool.api_ids:
                if api_id not in self.apis:
                    raise ToolrankError(
                        f"tool {tool.tool_id!r} references unknown api {api_id!r}"
                    )
                if self.apis[api_id].tool_id != tool.tool_id:
                    raise ToolrankError(
                        f"api {api_id!r} is listed under tool {tool.tool_id!r} "
                        f"but claims tool {self.apis[api_id].tool_id!r}"
                    )
        stray = self.seen_tools - self.tools.keys()
        if stray:
            raise ToolrankError(f"seen_tools references unknown tools: {sorted(stray)}")


def _squash(text: str) -> str:
    return _WHITESPACE.sub(" ", text).strip()


def render_document(api: ApiDoc, tool: Tool) -> str:
    """Render an API into its retrievable document text.

    Deterministic "category | tool_name | api_name | description" with
    whitespace runs collapsed; trailing separator whitespace is trimmed when
    the description is empty.
    """
    if api.tool_id != tool.tool_id:
        raise ToolrankError(
            f"api {api.api_id!r} belongs to {api.tool_id!r}, not {tool.tool_id!r}"
        )
    parts = [tool.category, tool.tool_name, api.api_name, api.description]
    return " | ".join(_squash(p) for p in parts).rstrip()


def _require(obj: dict, key: str, path, line_no: int):
    if key not in obj:
        raise FormatError(path, line_no, f"missing field {key!r}")
    return obj[key]


def _iter_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise FormatError(path, line_no, f"invalid JSON: {err.msg}") from err
            if not isinstance(obj, dict):
                raise FormatError(path, line_no, "expected a JSON object")
            yield line_no, obj


def load_library(path) -> ToolLibrary:
    """Load and validate a library JSONL file."""
    tools: dict[str, Tool] = {}
    raw_apis: dict[str, tuple[int, dict]] = {}
    seen_tools: frozenset[str] | None = None

    for line_no, obj in _iter_jsonl(path):
        kind = _require(obj, "kind", path, line_no)
        if kind == "tool":
            tool = Tool(
                tool_id=_require(obj, "tool_id", path, line_no),
                tool_name=_require(obj, "tool_name", path, line_no),
                category=_require(obj, "category", path, line_no),
                api_ids=tuple(_require(obj, "api_ids", path, line_no)),
            )
            if tool.tool_id in tools:
                raise FormatError(path, line_no, f"duplicate tool id {tool.tool_id!r}")
            tools[tool.tool_id] = tool
        elif kind == "api":
            api_id = _require(obj, "api_id", path, line_no)
            if api_id in raw_apis:
                raise FormatError(path, line_no, f"duplicate api id {api_id!r}")
            raw_apis[api_id] = (line_no, obj)
        elif kind == "meta":
            if seen_tools is not None:
                raise FormatError(path, line_no, "duplicate meta record")
            seen_tools = frozenset(_require(obj, "seen_tools", path, line_no))
        else:
            raise FormatError(path, line_no, f"unknown record kind {kind!r}")

    apis: dict[str, ApiDoc] = {}
    for api_id, (line_no, obj) in raw_apis.items():
        api = ApiDoc(
            api_id=api_id,
            tool_id=_require(obj, "tool_id", path, line_no),
            api_name=_require(obj, "api_name", path, line_no),
            description=_require(obj, "description", path, line_no),
            document_text=obj.get("document_text", ""),
        )
        tool = tools.get(api.tool_id)
        if tool is None:
            raise FormatError(
                path, line_no, f"api {api_id!r} references unknown tool {api.tool_id!r}"
            )
        if not api.document_text:
            api = replace(api, document_text=render_document(api, tool))
        apis[api_id] = api

    library = ToolLibrary(tools=tools, apis=apis, seen_tools=seen_tools or frozenset())
    library.validate()
    return library


def save_library(library: ToolLibrary, path) -> None:
    """Serialize a library so that load(save(lib)) == lib."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for tool in library.tools.values():
            fh.write(
                json.dumps(
                    {
                        "kind": "tool",
                        "tool_id": tool.tool_id,
                        "tool_name": tool.tool_name,
                        "category": tool.category,
                        "api_ids": list(tool.api_ids),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        for api in library.apis.values():
            fh.write(
                json.dumps(
                    {
                        "kind": "api",
                        "api_id": api.api_id,
                        "tool_id": api.tool_id,
                        "api_name": api.api_name,
                        "description": api.description,
                        "document_text": api.document_text,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        fh.write(
            json.dumps(
                {"kind": "meta", "seen_tools": sorted(library.seen_tools)},
                sort_keys=True,
            )
            + "\n"
        )


def gold_tool_count(record: EvalRecord, library: ToolLibrary) -> int:
    return len({library.apis[a].tool_id for a in record.gold_api_ids})


def load_records(path, library: ToolLibrary | None = None) -> list[EvalRecord]:
    """Load a queries/qrels JSONL file, validating against the library if given."""
    records: list[EvalRecord] = []
    ids: set[str] = set()
    for line_no, obj in _iter_jsonl(path):
        record = EvalRecord(
            query_id=_require(obj, "query_id", path, line_no),
            query_text=_require(obj, "query_text", path, line_no),
            gold_api_ids=frozenset(_require(obj, "gold_api_ids", path, line_no)),
            gold_query_type=_require(obj, "gold_query_type", path, line_no),
            subset=_require(obj, "subset", path, line_no),
        )
        if record.query_id in ids:
            raise FormatError(path, line_no, f"duplicate query id {record.query_id!r}")
        ids.add(record.query_id)
        if not record.gold_api_ids:
            raise FormatError(path, line_no, f"query {record.query_id!r} has no gold APIs")
        if record.gold_query_type not in QUERY_TYPES:
            raise FormatError(
                path, line_no, f"unknown gold_query_type {record.gold_query_type!r}"
            )
        if library is not None:
            missing = record.gold_api_ids - library.apis.keys()
            if missing:
                raise FormatError(
                    path, line_no, f"gold APIs not in library: {sorted(missing)}"
                )
            expected = (
                "single_tool" if gold_tool_count(record, library) == 1 else "multi_tool"
            )
            if record.gold_query_type != expected:
                raise FormatError(
                    path,
                    line_no,
                    f"query {record.query_id!r} is labeled {record.gold_query_type} "
                    f"but its gold APIs imply {expected}",
                )
        records.append(record)
    return records


def save_records(records: Iterable[EvalRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "query_id": r.query_id,
                        "query_text": r.query_text,
                        "gold_api_ids": sorted(r.gold_api_ids),
                        "gold_query_type": r.gold_query_type,
                        "subset": r.subset,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
