"""Command line for the embedding exporter."""
from __future__ import annotations

import argparse
import sys

from . import ExportError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ain-export",
        description="Export a masked-LM's static character embeddings as a "
        "simulator table file.",
    )
    parser.add_argument("model", help="model id or local checkpoint path "
                        "(e.g. bert-base-chinese)")
    parser.add_argument("charlist", help="character list file, one per line")
    parser.add_argument("out", help="output table path")
    parser.add_argument("--format", choices=("tsv", "binary"), default="binary")
    args = parser.parse_args(argv)
    try:
        count, skipped = export(args.model, args.charlist, args.out, format=args.format)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if skipped:
        print(f"skipped {len(skipped)} character(s) not in the vocabulary: "
              f"{''.join(skipped)}")
    print(f"wrote {args.out}: {count} characters, format {args.format}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
