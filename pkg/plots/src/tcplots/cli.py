"""Command line wrapper around render()."""
import argparse
import sys

from .render import PlotSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="treecolour-plots",
        description="Render charts from treecolour CLI CSV outputs.")
    parser.add_argument("--kind", required=True,
                        choices=("decay", "ksweep", "smatrix"))
    parser.add_argument("--input", action="append", required=True,
                        help="input CSV (repeatable, one series each)")
    parser.add_argument("--out", required=True,
                        help="output path; .png and .svg are written")
    parser.add_argument("--label", action="append", default=[],
                        help="legend label per input (repeatable)")
    parser.add_argument("--degree", type=int,
                        help="tree degree d for the d/ln d markers (ksweep)")
    parser.add_argument("--logx", action="store_true")
    parser.add_argument("--logy", action="store_true")
    args = parser.parse_args(argv)
    spec = PlotSpec(inputs=tuple(args.input), kind=args.kind, out=args.out,
                    logx=args.logx, logy=args.logy,
                    labels=tuple(args.label), degree=args.degree)
    try:
        info = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.kind}: {info['series']} series -> {info['png']}, "
          f"{info['svg']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
