"""CLI: oppsim-plots --csv results.csv --out figures [--panels a,b,c]"""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oppsim-plots",
        description="render benchmark figure panels from a results CSV")
    parser.add_argument("--csv", required=True, help="results CSV path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--panels", default="a,b,c,d,e,f",
                        help="comma-separated panel letters (default: all)")
    args = parser.parse_args(argv)
    try:
        written = render(args.csv, args.out, args.panels)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    for panel, path in sorted(written.items()):
        print(f"panel {panel}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
