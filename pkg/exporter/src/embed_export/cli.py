"""Command-line entry point: ``embed-export export --corpus ... --preset ... --out ...``."""

from __future__ import annotations

import argparse
import sys

from . import PRESETS, ConfigError, DataError, EncoderError, ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Export contextual document embeddings in the EMBv1 format")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="encode a corpus TSV into an EMBv1 file")
    p.add_argument("--corpus", required=True,
                   help="corpus TSV (text<TAB>partition[<TAB>label])")
    p.add_argument("--preset", required=True, choices=sorted(PRESETS),
                   help="encoder preset: teacher (768-d) or student (384-d)")
    p.add_argument("--out", required=True, help="output EMBv1 path")
    p.add_argument("--batch-size", type=int, default=32,
                   help="inference batch size")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = export(ExportJob(corpus=args.corpus, preset=args.preset,
                                  out=args.out, batch_size=args.batch_size))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EncoderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {result.n_docs} x {result.dim} embeddings to {result.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
