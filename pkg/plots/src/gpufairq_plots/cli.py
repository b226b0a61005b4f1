"""Command-line figure rendering over simulator export files.

Usage:
    gpufairq-plot service_timeline --in windows.csv --in invocations.csv --out fig.png
    gpufairq-plot latency_bars     --in compare.csv --out fig.png
    gpufairq-plot miss_rate_curve  --in sweep.csv --out fig.png
    gpufairq-plot sweep_line       --in sweep.csv --out fig.png

Exit codes: 0 success, 2 usage or malformed input, 1 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from . import figures

KINDS = {
    "service_timeline": (2, figures.plot_service_timeline),
    "latency_bars": (1, figures.plot_latency_bars),
    "miss_rate_curve": (1, figures.plot_miss_rate_curve),
    "sweep_line": (1, figures.plot_sweep_line),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpufairq-plot",
        description="Render figures from gpufairq CSV exports",
    )
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV",
                        help="input file; service_timeline takes it twice "
                             "(windows.csv then invocations.csv)")
    parser.add_argument("--out", required=True, help="output image path (.png/.svg)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    n_inputs, render = KINDS[args.kind]
    if len(args.inputs) != n_inputs:
        print(f"error: {args.kind} needs {n_inputs} --in file(s), "
              f"got {len(args.inputs)}", file=sys.stderr)
        return 2
    try:
        render(*args.inputs, out_path=args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
