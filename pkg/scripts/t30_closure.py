"""Calibrate the station hall, render hybrid omni IRs and compare T30 with the targets.

    python scripts/t30_closure.py --positions 1 6 16 17 --out results/t30.csv
"""

import argparse
import csv
import sys
import time

import numpy as np

from hybridrir import defaults
from hybridrir.pipeline import PipelineConfig, StationPipeline


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--positions", type=int, nargs="+", default=[1, 6, 16, 17])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV output (stdout if omitted)")
    args = ap.parse_args(argv)

    pipe = StationPipeline(PipelineConfig(seed=args.seed))
    target = np.asarray(defaults.STATION_T30)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["position", "metric", *(int(f) for f in defaults.OCTAVE_CENTERS)])
    w.writerow(["target", "t30", *target.tolist()])
    for sid in args.positions:
        t0 = time.perf_counter()
        rep = pipe.analyze_source(sid)
        w.writerow([sid, "t30", *np.round(rep.t30, 4).tolist()])
        w.writerow([sid, "ratio", *np.round(rep.t30 / target, 4).tolist()])
        print(f"position {sid}: {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    if args.out:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
