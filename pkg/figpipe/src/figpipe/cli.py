"""CLI: ``figpipe render --csv <path> --kind <k> --out <image path>``."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render_figure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figpipe", description="Render sweep CSVs to figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a sweep CSV")
    p.add_argument("--csv", required=True, help="sweep CSV produced by the harness")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True, help="output image path (.png or .svg)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render_figure(FigureSpec(csv_path=args.csv, figure_kind=args.kind, out_path=args.out))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
