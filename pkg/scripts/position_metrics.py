"""Binaural and clarity metrics for every station position, then the figure-style report.

Runs the ``binaural`` stage of the command-line tool for positions 1 to 17
and collects ild/itd/iacc/c50/drr tables.

    python scripts/position_metrics.py --results results --jobs 2
"""

import argparse
import sys

from hybridrir.cli import emit_report, main as cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--results", default="results")
    ap.add_argument("--sources", default="1-17")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    scene = f"{args.results}/station.json"
    steps = [
        ["scene", "--preset", "all", "--out", scene],
        ["binaural", "--scene", scene, "--sources", args.sources, "--results", args.results,
         "--jobs", str(args.jobs), "--seed", str(args.seed)],
    ]
    for step in steps:
        code = cli(step)
        if code:
            return code
    for name in emit_report(args.results, f"{args.results}/report", ("positions",)):
        print(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
