"""Command line: batch `export` and the local HTTP `serve` mode."""

from __future__ import annotations

import argparse
import sys

from .backends import ALL_KINDS, NOUN_PHRASES, BackendError, get_backend
from .exporter import ExportJob, JobError, export
from .service import serve

_CLI_KINDS = [k for k in ALL_KINDS if k != NOUN_PHRASES]


def cmd_export(args) -> int:
    job = ExportJob(
        input_path=args.input,
        output_path=args.out,
        kinds=tuple(args.kinds),
        language=args.lang,
    )
    backend = get_backend(args.backend)
    summary = export(job, backend)
    print(
        f"wrote {summary['output']}: {summary['ok']} annotated, "
        f"{summary['failed']} errors, backend={backend.name}-{backend.version}"
    )
    return 0 if summary["failed"] == 0 else 1


def cmd_serve(args) -> int:
    serve(get_backend(args.backend), args.port, args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syntax-annotator", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("export", help="annotate a dataset file into a sidecar JSONL")
    ex.add_argument("--input", required=True, help="dataset JSONL with id/text per line")
    ex.add_argument("--kinds", nargs="+", required=True, choices=_CLI_KINDS)
    ex.add_argument("--out", required=True)
    ex.add_argument("--lang", choices=["zh", "en"], default="zh")
    ex.add_argument("--backend", default="lexicon")
    ex.set_defaults(func=cmd_export)

    sv = sub.add_parser("serve", help="run the annotation HTTP service")
    sv.add_argument("--port", type=int, default=8765)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--backend", default="lexicon")
    sv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (JobError, BackendError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
