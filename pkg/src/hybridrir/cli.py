"""Command-line front end: ``hybridrir <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 I/O error.
"""

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import defaults
from .audio_io import read_ir, read_json, read_text, write_ir, write_json, write_text
from .errors import HybridRirError, IOFailure, MissingResults, ValidationError
from .ism import events_to_csv, simulate_events
from .metrics import analyze
from .pipeline import ELST_SWEEP_MS, PipelineConfig, StationPipeline, source_seed, tail_band_gains
from .scene import emit_scene, load_scene, predicted_t60, station_scene
from .spatial import HrirSet, array_to_binaural, binaural_metrics
from .srt import SrtBatchConfig, run_batch, summary_to_csv, tracks_to_csv
from .synth import LateTailSpec, assemble_hybrid, generate_late_tail, render_events_omni, sweep_to_csv

REPORT_FILES = {
    "elst": "elst_sweep.csv",
    "srt": "srt_summary.csv",
}


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ids(text):
    """``1,3,13-17`` -> (1, 3, 13, 14, 15, 16, 17)."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad id list {text!r}") from exc
    return tuple(out)


def _load_scene_file(path):
    return load_scene(read_text(path))


def _pipeline(scene, args):
    layout = getattr(args, "layout", None)
    cfg = PipelineConfig(target_t60=tuple(predicted_t60(scene).tolist()))
    cfg = cfg.with_overrides(seed=getattr(args, "seed", None), elst=getattr(args, "elst", None),
                             max_order=getattr(args, "max_order", None), window=getattr(args, "window", None),
                             layout=None if layout == "omni" else layout, order=getattr(args, "order", None))
    return StationPipeline(cfg, scene)


def _check_sources(scene, ids):
    missing = [i for i in ids if i not in scene.sources]
    if missing:
        raise ValidationError(f"scene has no source(s) {missing}")


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- subcommands -----------------------------------------------------------------

def cmd_scene(args):
    scene = station_scene(args.preset, tuple(args.dims), args.t60)
    text = emit_scene(scene)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


class _SimulateJob:
    def __init__(self, scene, args):
        self.scene, self.max_order, self.window, self.out = scene, args.max_order, args.window, Path(args.out)

    def __call__(self, sid):
        ev = simulate_events(self.scene, sid, self.max_order, self.window)
        write_text(self.out / f"src{sid}_events.csv", events_to_csv(ev))
        write_ir(self.out / f"src{sid}_early.wav", render_events_omni(ev), {"source": sid})
        return sid, len(ev)


def cmd_simulate(args):
    scene = _load_scene_file(args.scene)
    ids = args.sources or tuple(sorted(scene.sources))
    _check_sources(scene, ids)
    for sid, n in _map(_SimulateJob(scene, args), list(ids), args.jobs):
        print(f"source {sid}: {n} events")
    return 0


def cmd_tail(args):
    scene = _load_scene_file(args.scene)
    _check_sources(scene, [args.source])
    early = read_ir(args.early)
    p = _pipeline(scene, args)
    c = p.config
    onset = c.elst - c.crossfade
    dur = p.tail_duration(onset)
    seed = source_seed(c.seed, args.source)
    gains = tail_band_gains(early, p.t60, onset, dur, seed, c)
    if args.layout == "omni":
        dirs = ((1.0, 0.0, 0.0),)
    else:
        layout = p.layout
        dirs = tuple(tuple(u) for u in layout.unit_vectors().tolist())
        gains = tuple(g / math.sqrt(len(layout)) for g in gains)
    tail = generate_late_tail(LateTailSpec(p.t60, onset, dur, dirs, seed, gains, early.sample_rate))
    write_ir(args.out, tail, {"source": args.source, "seed": args.seed, "onset_s": onset,
                              "t60_s": list(p.t60), "band_gains": list(gains)})
    return 0


def cmd_hybrid(args):
    early, late = read_ir(args.early), read_ir(args.late)
    write_ir(args.out, assemble_hybrid(early, late, args.elst, args.crossfade),
             {"elst_s": args.elst, "crossfade_s": args.crossfade})
    return 0


def cmd_analyze(args):
    ir = read_ir(args.ir)
    if not 0 <= args.channel < ir.n_channels:
        raise ValidationError(f"channel {args.channel} out of range (file has {ir.n_channels})")
    rep = analyze(ir.channel(args.channel), ir.sample_rate)
    text = rep.to_csv() if str(args.out or "").endswith(".csv") else rep.to_json() + "\n"
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_elst_sweep(args):
    scene = _load_scene_file(args.scene)
    _check_sources(scene, [args.source])
    p = _pipeline(scene, args)
    rows = p.elst_sweep(args.source, args.elst_ms)
    write_text(args.out, sweep_to_csv(rows))
    return 0


def cmd_render_array(args):
    scene = _load_scene_file(args.scene)
    ids = args.sources or tuple(sorted(scene.sources))
    _check_sources(scene, ids)
    p = _pipeline(scene, args)
    out = Path(args.out)
    for sid in ids:
        ir = p.array_ir(sid, anechoic=args.anechoic)
        write_ir(out / f"src{sid}_array.wav", ir, {"source": sid, "layout": p.layout.name,
                                                    "azimuth_deg": list(p.layout.azimuth_deg),
                                                    "elevation_deg": list(p.layout.elevation_deg)})
    return 0


def _metrics_row(m):
    return {"itd_ms": m.itd * 1e3, "ild_db": m.ild, "iacc": m.iacc, "flags": list(m.flags)}


class _PositionJob:
    def __init__(self, scene, args):
        self.scene, self.args = scene, args

    def __call__(self, sid):
        p = _pipeline(self.scene, self.args)
        out = Path(self.args.results)
        rep = p.analyze_source(sid)
        row = {"position": sid, "c50_db": rep.c50_speech, "drr_db": rep.drr_speech}
        for mode in ("anechoic", "reverberant"):
            brir = p.brir(sid, mode)
            write_ir(out / "brir" / f"pos{sid}_{mode}.wav", brir, {"source": sid, "mode": mode})
            row[mode] = _metrics_row(binaural_metrics(brir))
        write_json(out / "positions" / f"pos{sid}.json", row)
        return sid


def cmd_binaural(args):
    if args.array:
        ir = read_ir(args.array)
        layout = PipelineConfig(layout=args.layout).array_layout()
        hrirs = HrirSet.load(args.hrir_dir) if args.hrir_dir else HrirSet.for_layout(layout, ir.sample_rate)
        brir = array_to_binaural(ir, layout, hrirs)
        if not args.out:
            raise ValidationError("--out is required with --array")
        write_ir(args.out, brir)
        write_json(Path(args.out).with_name(Path(args.out).stem + "_metrics.json"),
                   _metrics_row(binaural_metrics(brir)))
        return 0
    if not (args.scene and args.results):
        raise ValidationError("give either --array, or --scene with --results")
    scene = _load_scene_file(args.scene)
    ids = args.sources or tuple(sorted(scene.sources))
    _check_sources(scene, ids)
    for sid in _map(_PositionJob(scene, args), list(ids), args.jobs):
        print(f"position {sid} done")
    return 0


class _BrirCache:
    def __init__(self, pipeline):
        self.pipeline, self.cache = pipeline, {}

    def __call__(self, sid, mode):
        if (sid, mode) not in self.cache:
            self.cache[(sid, mode)] = self.pipeline.brir(sid, mode)
        return self.cache[(sid, mode)]


def cmd_srt(args):
    cfg = SrtBatchConfig.from_dict(read_json(args.config))
    brir_for = None
    if cfg.oracle == "better-ear-model":
        if not args.scene:
            raise ValidationError("the better-ear oracle needs --scene")
        scene = _load_scene_file(args.scene)
        _check_sources(scene, sorted({c.target for c in cfg.conditions} | {c.noise for c in cfg.conditions}))
        brir_for = _BrirCache(_pipeline(scene, args))
    res = run_batch(cfg, brir_for)
    out = Path(args.out)
    write_text(out / "srt_tracks.csv", tracks_to_csv(res))
    write_text(out / "srt_summary.csv", summary_to_csv(res, cfg.conditions))
    return 0


def _position_table(rows, field_name):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["position", "anechoic", "reverberant"])
    for r in rows:
        w.writerow([r["position"], repr(r["anechoic"][field_name]), repr(r["reverberant"][field_name])])
    return buf.getvalue()


def _scalar_table(rows, key, column):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["position", column])
    for r in rows:
        w.writerow([r["position"], repr(r[key])])
    return buf.getvalue()


def emit_report(results, out, parts=("elst", "srt", "positions")):
    """Collect figure-style tables from a results directory; returns the written file names."""
    results, out = Path(results), Path(out)
    missing = [str(results / REPORT_FILES[p]) for p in parts if p in REPORT_FILES
               and not (results / REPORT_FILES[p]).exists()]
    pos_files = sorted((results / "positions").glob("pos*.json")) if (results / "positions").is_dir() else []
    if "positions" in parts and not pos_files:
        missing.append(str(results / "positions" / "pos*.json"))
    if missing:
        raise MissingResults("missing results: " + ", ".join(missing))
    written = []
    if "elst" in parts:
        write_text(out / "elst_sweep.csv", read_text(results / REPORT_FILES["elst"]))
        written.append("elst_sweep.csv")
    if "srt" in parts:
        write_text(out / "srt_summary.csv", read_text(results / REPORT_FILES["srt"]))
        written.append("srt_summary.csv")
    if "positions" in parts:
        rows = sorted((read_json(f) for f in pos_files), key=lambda r: r["position"])
        for name, fld in (("ild.csv", "ild_db"), ("itd.csv", "itd_ms"), ("iacc.csv", "iacc")):
            write_text(out / name, _position_table(rows, fld))
            written.append(name)
        write_text(out / "c50.csv", _scalar_table(rows, "c50_db", "c50_db"))
        write_text(out / "drr.csv", _scalar_table(rows, "drr_db", "drr_db"))
        written += ["c50.csv", "drr.csv"]
    return written


def cmd_report(args):
    for name in emit_report(args.results, args.out, tuple(args.parts)):
        print(name)
    return 0


# -- parser --------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="hybridrir", description="Hybrid room impulse responses for a station hall.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=0, help="RNG seed for the diffuse tail (default 0)")

    def add_jobs(p):
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes across sources")

    def add_model(p):
        p.add_argument("--max-order", type=int, default=defaults.MAX_ORDER, help="image-source order")
        p.add_argument("--window", type=float, default=defaults.EVENT_WINDOW,
                       help="early event window in seconds")
        p.add_argument("--elst", type=float, default=defaults.ELST, help="early-late separation time, s")

    def add_layout(p, extra=()):
        p.add_argument("--layout", choices=("ring36", "rtsofe60") + tuple(extra), default="ring36",
                       help="loudspeaker layout")
        p.add_argument("--order", type=int, default=defaults.AMBI_ORDER, help="Ambisonics order")

    p = sub.add_parser("scene", help="emit a calibrated preset scene as JSON")
    p.add_argument("--preset", choices=("scene1", "scene2", "all"), default="all")
    p.add_argument("--dims", type=float, nargs=3, default=defaults.STATION_DIMS, metavar=("LX", "LY", "LZ"))
    p.add_argument("--t60", type=_floats, default=defaults.STATION_T30,
                   help="seven comma-separated octave-band target decay times, s")
    p.add_argument("--out", help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("simulate", help="image sources: events CSV and omni early IR per source")
    p.add_argument("--scene", required=True)
    p.add_argument("--sources", type=_ids, help="source ids, e.g. 1,3,13-17 (default all)")
    p.add_argument("--out", required=True, help="output directory")
    add_model(p)
    add_jobs(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tail", help="diffuse late tail level-matched to an early IR")
    p.add_argument("--scene", required=True)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--early", required=True, help="omni early IR from 'simulate'")
    p.add_argument("--out", required=True)
    add_layout(p, ("omni",))
    p.set_defaults(layout="omni")
    add_model(p)
    add_seed(p)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("hybrid", help="crossfade an early and a late IR")
    p.add_argument("--early", required=True)
    p.add_argument("--late", required=True)
    p.add_argument("--elst", type=float, default=defaults.ELST)
    p.add_argument("--crossfade", type=float, default=defaults.CROSSFADE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hybrid)

    p = sub.add_parser("analyze", help="octave-band room-acoustic parameters of an IR")
    p.add_argument("--ir", required=True)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--out", help="report .json or .csv (stdout JSON if omitted)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("elst-sweep", help="parameters versus early-late separation time")
    p.add_argument("--scene", required=True)
    p.add_argument("--source", type=int, default=1)
    p.add_argument("--elst-ms", type=_floats, default=ELST_SWEEP_MS)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--max-order", type=int, default=defaults.MAX_ORDER)
    p.add_argument("--window", type=float, default=defaults.EVENT_WINDOW)
    add_seed(p)
    p.set_defaults(func=cmd_elst_sweep)

    p = sub.add_parser("render-array", help="per-loudspeaker hybrid IRs as multichannel WAV")
    p.add_argument("--scene", required=True)
    p.add_argument("--sources", type=_ids)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--anechoic", action="store_true", help="direct sound only")
    add_layout(p)
    add_model(p)
    add_seed(p)
    p.set_defaults(func=cmd_render_array)

    p = sub.add_parser("binaural", help="binaural IRs and ITD/ILD/IACC")
    p.add_argument("--array", help="array IR to convert (layout order)")
    p.add_argument("--hrir-dir", help="HRIR set directory with manifest.csv (default: spherical head)")
    p.add_argument("--out", help="stereo WAV output when converting --array")
    p.add_argument("--scene", help="scene JSON: render every position end to end")
    p.add_argument("--sources", type=_ids)
    p.add_argument("--results", help="results directory for per-position metrics")
    add_layout(p)
    add_model(p)
    add_seed(p)
    add_jobs(p)
    p.set_defaults(func=cmd_binaural)

    p = sub.add_parser("srt", help="simulated adaptive SRT tracks")
    p.add_argument("--config", required=True, help="batch JSON")
    p.add_argument("--scene", help="scene JSON (needed by the better-ear oracle)")
    p.add_argument("--out", required=True, help="output directory")
    add_layout(p)
    add_model(p)
    add_seed(p)
    p.set_defaults(func=cmd_srt)

    p = sub.add_parser("report", help="figure-style CSV tables from a results directory")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parts", nargs="+", choices=("elst", "srt", "positions"),
                   default=["elst", "srt", "positions"])
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HybridRirError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IOFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
