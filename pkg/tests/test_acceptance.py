"""The eleven acceptance criteria, each reporting one PASS/FAIL line.

Lines are printed as each criterion finishes and again in the terminal
summary (see ``conftest.py``), so ``pytest -v`` output always carries them.
"""

import json
import math
import time

import numpy as np
import pytest

from hybridrir import defaults
from hybridrir.cli import main
from hybridrir.metrics import analyze, decay_times, schroeder_edc
from hybridrir.ism import simulate_events
from hybridrir.spatial import (ArrayLayout, binaural_metrics, encode_horizontal, sampling_decode,
                               velocity_vector)
from hybridrir.srt import (PsychometricOracle, SrtBatchConfig, compute_srm, paired_t_test,
                           run_adaptive_track, run_batch)
from hybridrir.synth import ImpulseResponse, assemble_hybrid

from conftest import BOX_ABSORPTION, BOX_DIMS, BOX_RECEIVER, BOX_SOURCE
from oracles import mirror_lattice, t_two_sided_p_df2

pytestmark = pytest.mark.slow

FS = defaults.SAMPLE_RATE
TARGET_T30 = np.array(defaults.STATION_T30)


def _fmt(a):
    return "[" + " ".join(f"{v:.3f}" for v in a) + "]"


def _cli(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, argv
    return code


def test_c01_t30_closure(tmp_path, criterion):
    t0 = time.perf_counter()
    scene = tmp_path / "station.json"
    _cli("scene", "--preset", "all", "--out", scene)
    _cli("simulate", "--scene", scene, "--sources", "1,6,16,17", "--out", tmp_path)
    t30 = {}
    for sid in (1, 6, 16, 17):
        _cli("tail", "--scene", scene, "--source", sid, "--early", tmp_path / f"src{sid}_early.wav",
             "--out", tmp_path / f"src{sid}_tail.wav", "--layout", "omni", "--seed", 0)
        _cli("hybrid", "--early", tmp_path / f"src{sid}_early.wav", "--late", tmp_path / f"src{sid}_tail.wav",
             "--out", tmp_path / f"src{sid}_hybrid.wav")
        _cli("analyze", "--ir", tmp_path / f"src{sid}_hybrid.wav", "--out", tmp_path / f"src{sid}.json")
        t30[sid] = np.array(json.loads((tmp_path / f"src{sid}.json").read_text())["t30"])
    elapsed = time.perf_counter() - t0
    # the measured targets average positions more than 5 m from the source: 16 and 17 here
    far = (t30[16] + t30[17]) / 2.0
    ratio_far = far / TARGET_T30
    ratio_1 = t30[1] / TARGET_T30
    ok = (np.all(np.abs(ratio_far - 1) <= 0.15) and np.all(np.abs(ratio_1 - 1) <= 0.15)
          and elapsed < 60.0)
    # position 6 is informational only
    criterion(1, ok, f"T30/target >5 m {_fmt(ratio_far)}; pos1 {_fmt(ratio_1)}; "
                     f"pos6 {_fmt(t30[6] / TARGET_T30)} (info); {elapsed:.1f} s")
    assert ok


def test_c02_analyzer_exactness(criterion):
    t = np.arange(int(8 * FS)) / FS
    d = decay_times(schroeder_edc(10 ** (-3 * t / 1.71), FS, truncate_db=None))
    vals = np.array([d.t20, d.t30, d.edt])
    ok = np.all(np.abs(vals / 1.71 - 1) <= 1e-3)
    criterion(2, ok, f"T20 {d.t20:.6f} T30 {d.t30:.6f} EDT {d.edt:.6f} s vs 1.71")
    assert ok


def test_c03_ism_oracle(box, criterion):
    ev = simulate_events(box, 1, max_order=3, window=1.0)
    env = box.environment
    ref = mirror_lattice(BOX_DIMS, np.array(BOX_SOURCE), np.array(BOX_RECEIVER), 3, BOX_ABSORPTION,
                         env.air_attenuation, env.speed_of_sound)
    counts = [sum(1 for e in ev if e.order == k) for k in range(4)]
    by_pos = {tuple(np.round(p, 6)): (o, t, a) for o, t, p, a in ref}
    r = np.array(BOX_RECEIVER)
    dt, da, matched = 0.0, 0.0, 0
    for e in ev:
        key = tuple(np.round(r + e.doa * e.arrival_time * env.speed_of_sound, 6))
        if key not in by_pos:
            continue
        o, t, a = by_pos[key]
        matched += o == e.order
        dt = max(dt, abs(e.arrival_time - t) * FS)
        da = max(da, float(np.max(np.abs(e.band_amplitude / a - 1))))
    ok = (len(ev) == len(ref) == matched and counts[1] == 6 and counts[2] == 18
          and dt <= 0.5 and da <= 1e-9)
    criterion(3, ok, f"counts {counts} vs oracle {len(ref)} total; max dt {dt:.2e} samples; "
                     f"max rel amp err {da:.1e}")
    assert ok


def test_c04_elst_identity_and_stability(station, criterion):
    rows = station.elst_sweep(1, (0, 25, 50, 75, 100, 200))
    ref = analyze(station.reference_tail(1).channel(), FS)
    identity = all(np.array_equal(getattr(rows[0], m), getattr(ref, m), equal_nan=True)
                   for m in ("t20", "t30", "edt", "c50", "c80"))
    dev = {int(round(r.elst * 1e3)): np.abs(r.t30 / rows[0].t30 - 1) for r in rows[1:]}
    worst = max(float(np.max(dev[k])) for k in (25, 50, 75, 100))
    grows = int(np.sum(dev[200] > dev[100]))
    ok = identity and worst < 0.10 and grows >= 4
    criterion(4, ok, f"identity {identity}; max T30 dev up to 100 ms {worst:.3f}; "
                     f"200 ms > 100 ms in {grows}/7 bands")
    assert ok


def test_c05_partition_of_unity(station, criterion):
    x = station.omni(1).hybrid
    noise = ImpulseResponse(FS, np.random.default_rng(0).standard_normal((2, FS // 2)))
    elsts = (0.0, 0.001, 0.025, 0.05, 0.0751, 0.1, 0.2, math.inf)
    ok = all(np.array_equal(assemble_hybrid(s, s, e).samples, s.samples)
             for s in (x, noise) for e in elsts)
    criterion(5, ok, f"identical early/late reproduced sample-exactly for elst {list(elsts)}")
    assert ok


def test_c06_ambisonics_accuracy(criterion):
    ring = ArrayLayout.ring(36)
    sums, errs = [], []
    for k in range(360):
        phi = math.radians(k + 0.37)
        g = sampling_decode(encode_horizontal(phi, 17), ring)
        sums.append(abs(g.sum() - 1.0))
        v = velocity_vector(g, ring)
        errs.append(math.degrees(abs(math.remainder(math.atan2(v[1], v[0]) - phi, 2 * math.pi))))
    coincident = sampling_decode(encode_horizontal(ring.azimuths[7], 17), ring)[7]
    ok = max(sums) <= 1e-9 and max(errs) < 0.5 and abs(coincident - 35 / 36) <= 1e-9
    criterion(6, ok, f"max |sum-1| {max(sums):.1e}; max velocity error {max(errs):.4f} deg; "
                     f"coincident gain {coincident:.12f}")
    assert ok


def test_c07_binaural_metric_exactness(criterion):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(FS // 2)
    m_delay = binaural_metrics(np.stack([x, np.concatenate([np.zeros(22), x[:-22]])]), FS)
    m_gain = binaural_metrics(np.stack([x, 10 ** (-6.02 / 20) * x]), FS)
    swaps = 0
    for _ in range(100):
        n = int(rng.integers(2000, 6000))
        a = rng.standard_normal(n)
        b = rng.uniform(0.1, 3) * np.roll(a, int(rng.integers(-40, 41))) + rng.uniform(0, 2) * rng.standard_normal(n)
        p, q = binaural_metrics(np.stack([a, b]), FS), binaural_metrics(np.stack([b, a]), FS)
        swaps += p.itd == -q.itd and abs(p.ild + q.ild) < 1e-9 and abs(p.iacc - q.iacc) < 1e-12
    ok = (abs(m_delay.itd * 1e3 - 0.499) < 5e-4 and abs(m_delay.iacc - 1.0) < 1e-3
          and abs(m_gain.ild - 6.02) <= 0.05 and swaps == 100)
    criterion(7, ok, f"delay: ITD {m_delay.itd * 1e3:.4f} ms IACC {m_delay.iacc:.4f}; "
                     f"gain: ILD {m_gain.ild:.4f} dB; swap antisymmetry {swaps}/100")
    assert ok


def test_c08_pipeline_trends(station, criterion):
    m = {s: binaural_metrics(station.brir(s)) for s in (1, 4, 10)}
    ild_ok = abs(m[4].ild) > abs(m[1].ild) and abs(m[10].ild) > abs(m[1].ild)
    iacc_ok = m[4].iacc < m[1].iacc and m[10].iacc < m[1].iacc
    drr = [station.analyze_source(s).drr_speech for s in (13, 1, 14, 15, 16, 17)]
    mono = all(b < a for a, b in zip(drr, drr[1:]))
    drop = drr[0] - drr[-1]
    ok = ild_ok and iacc_ok and mono and 16.0 <= drop <= 22.0
    criterion(8, ok, f"|ILD| 0/90/270 deg {abs(m[1].ild):.2f}/{abs(m[4].ild):.2f}/{abs(m[10].ild):.2f} dB; "
                     f"IACC {m[1].iacc:.2f}/{m[4].iacc:.2f}/{m[10].iacc:.2f}; "
                     f"DRR 13..17 {' '.join(f'{v:.1f}' for v in drr)} dB, drop {drop:.2f} dB")
    assert ok


def test_c09_srt_convergence(station, criterion):
    oracle = PsychometricOracle(-14.4, 1.0)
    est, slowest = [], 0.0
    for seed in range(200):
        t0 = time.perf_counter()
        est.append(run_adaptive_track(oracle, seed=seed).srt_estimate)
        slowest = max(slowest, time.perf_counter() - t0)
    mean = float(np.mean(est))
    cfg = SrtBatchConfig.from_dict({"oracle": "better-ear-model", "seeds": list(range(5)),
                                    "conditions": [{"target": t, "noise": 1} for t in (1, 3, 13)]})
    res = run_batch(cfg, lambda sid, mode: station.brir(sid, mode)).by_condition()
    srt = {t: float(np.mean(res[f"T{t}-N1-reverberant"])) for t in (1, 3, 13)}
    srm = compute_srm(srt[1], srt[3])
    ok = abs(mean + 14.4) <= 0.5 and slowest < 0.05 and srm > 0 and srt[13] < srt[1]
    criterion(9, ok, f"analytic mean {mean:.3f} dB over 200 tracks, slowest {slowest * 1e3:.2f} ms; "
                     f"better-ear SRT 1/3/13 {srt[1]:.2f}/{srt[3]:.2f}/{srt[13]:.2f} dB, SRM(3) {srm:.2f} dB")
    assert ok


def test_c10_paired_t_test(criterion):
    t, df, p = paired_t_test([1, 2, 3], [0, 0, 0])
    ok = abs(t - 3.464) < 1e-3 and df == 2 and abs(p - 0.0742) < 1e-3 and abs(p - t_two_sided_p_df2(t)) < 1e-12
    criterion(10, ok, f"t {t:.4f}, df {df}, p {p:.5f}")
    assert ok


def _seeded_run(root):
    scene = root / "station.json"
    _cli("scene", "--preset", "scene2", "--out", scene)
    _cli("simulate", "--scene", scene, "--sources", "13", "--out", root)
    _cli("tail", "--scene", scene, "--source", 13, "--early", root / "src13_early.wav",
         "--out", root / "tail.wav", "--layout", "omni", "--seed", 11)
    _cli("hybrid", "--early", root / "src13_early.wav", "--late", root / "tail.wav", "--out", root / "hyb.wav")
    _cli("analyze", "--ir", root / "hyb.wav", "--out", root / "report.json")
    _cli("elst-sweep", "--scene", scene, "--source", 13, "--seed", 11, "--out", root / "sweep.csv")
    _cli("render-array", "--scene", scene, "--sources", "13", "--seed", 11, "--out", root / "array")
    (root / "srt.json").write_text(json.dumps({"oracle": "analytic-logistic", "seeds": [0, 1, 2],
                                               "conditions": [{"target": 1, "srt_true": -14.4}]}))
    _cli("srt", "--config", root / "srt.json", "--out", root / "srt", "--seed", 11)
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c11_determinism(tmp_path, criterion):
    a = _seeded_run(tmp_path / "a")
    b = _seeded_run(tmp_path / "b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    ok = same and len(a) >= 10
    criterion(11, ok, f"{len(a)} files from two seeded runs, byte-identical: {same}")
    assert ok
