"""E-LST sweep for one source over several tail seeds; prints the worst T30 deviation per seed.

    python scripts/elst_sweep.py --source 1 --seeds 0 1 2 --out results/elst
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from hybridrir.audio_io import write_text
from hybridrir.pipeline import ELST_SWEEP_MS, PipelineConfig, StationPipeline
from hybridrir.synth import sweep_to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", type=int, default=1)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--elst-ms", type=float, nargs="+", default=list(ELST_SWEEP_MS))
    ap.add_argument("--out", default="results/elst")
    args = ap.parse_args(argv)

    out = Path(args.out)
    for seed in args.seeds:
        rows = StationPipeline(PipelineConfig(seed=seed)).elst_sweep(args.source, tuple(args.elst_ms))
        write_text(out / f"src{args.source}_seed{seed}.csv", sweep_to_csv(rows))
        ref = rows[0].t30
        for r in rows[1:]:
            dev = np.abs(r.t30 / ref - 1)
            print(f"seed {seed} elst {r.elst * 1e3:5.0f} ms: max T30 deviation {np.nanmax(dev):.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
