"""Batch figure rendering for sweep artifacts.

Exit codes: 0 success, 1 bad arguments or unusable artifacts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .plotting import FIGURE_KINDS, PlotError, PlotSpec, plot


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trace-plot",
        description="Render figures from incentive-gne sweep artifacts")
    parser.add_argument("--artifacts", required=True, help="sweep artifact directory")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", default=None, choices=("png", "svg", "pdf"),
                        help="image format (default: from the output suffix)")
    args = parser.parse_args(argv)
    spec = PlotSpec(artifact_dir=Path(args.artifacts), kind=args.kind,
                    out_path=Path(args.out), image_format=args.format)
    try:
        out = plot(spec)
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
