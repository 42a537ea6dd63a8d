"""embed-export CLI: encode a library and/or queries into toolrank's embedding
file format, optionally emitting a cross-scorer score cache for given pairs."""

from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_MODEL, ExportError
from .exporter import ExportJob, export_embeddings, export_scores, read_pairs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Batch-encode tool documents and queries for the toolrank engine.",
    )
    parser.add_argument("--library", help="library JSONL (one vector per API document)")
    parser.add_argument("--queries", help="queries JSONL (one vector per query)")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="encoder id: hash:<dim> or a sentence-transformers model")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--out-embeddings", help="embedding file to write")
    parser.add_argument("--out-scores", help="score-cache TSV to write (needs --pairs)")
    parser.add_argument("--pairs", help="TSV of query_id\\tapi_id pairs to score")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.out_embeddings and not args.out_scores:
        parser.error("nothing to do: pass --out-embeddings and/or --out-scores")
    if args.out_scores and not args.pairs:
        parser.error("--out-scores needs --pairs")
    if not args.library and not args.queries:
        parser.error("pass --library and/or --queries")
    try:
        job = ExportJob(
            library=args.library,
            queries=args.queries,
            model=args.model,
            batch_size=args.batch_size,
            out_embeddings=args.out_embeddings,
            out_scores=args.out_scores,
        )
        if args.out_embeddings:
            path = export_embeddings(job)
            print(f"wrote {len(job.texts)} vectors -> {path}")
        if args.out_scores:
            pairs = read_pairs(args.pairs)
            path = export_scores(job, pairs)
            print(f"wrote {len(pairs)} scores -> {path}")
        return 0
    except ExportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
