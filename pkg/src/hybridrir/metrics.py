"""Octave-band room-acoustic parameters from impulse responses.

Undefined results (no late energy, EDC too shallow for a fit, ...) never
raise inside :func:`analyze`; they are reported as NaN or as a +/-99 dB
clamp together with an entry in :attr:`AcousticReport.flags`.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from . import defaults
from .errors import RateTooLow, SilentInput

CLAMP = defaults.CLAMP_DB
EDC_FLOOR_DB = -300.0
BAND_LABELS = tuple(str(int(f)) for f in defaults.OCTAVE_CENTERS)

FIT_RANGES = {"EDT": (0.0, -10.0), "T20": (-5.0, -25.0), "T30": (-5.0, -35.0)}
ZERO_PAD_S = 0.1


def band_edges(center):
    return center / math.sqrt(2.0), center * math.sqrt(2.0)


@lru_cache(maxsize=16)
def _band_sos(sample_rate, order):
    if sample_rate < 2.0 * band_edges(defaults.OCTAVE_CENTERS[-1])[1]:
        raise RateTooLow(f"sample rate {sample_rate} Hz too low for the 8 kHz octave band")
    return tuple(
        sps.butter(order, band_edges(fc), btype="bandpass", fs=sample_rate, output="sos")
        for fc in defaults.OCTAVE_CENTERS
    )


def zero_phase_filter(sos, x, sample_rate, pad_s=ZERO_PAD_S):
    """Forward-backward ``sos`` filtering along the last axis with zero padding.

    scipy's default odd extension turns a large first sample into a step,
    which rings through the low bands; silence on both sides does not.
    """
    x = np.asarray(x, dtype=float)
    pad = int(round(pad_s * sample_rate))
    width = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    y = sps.sosfiltfilt(sos, np.pad(x, width), axis=-1, padtype=None)
    return y[..., pad:pad + x.shape[-1]]


def octave_filterbank(x, sample_rate, order=3):
    """Split ``x`` into the seven octave bands, 125 Hz to 8 kHz.

    Each band is a 6th-order Butterworth band-pass (``order`` per edge)
    applied forward and backward, so band signals are zero phase and keep the
    input length.  The result has shape ``(7, *x.shape)``.
    """
    sos = _band_sos(float(sample_rate), order)
    return np.stack([zero_phase_filter(s, x, sample_rate) for s in sos])


@dataclass(frozen=True, eq=False)
class EnergyDecayCurve:
    times: np.ndarray
    level: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "level_db"])
        for t, v in zip(self.times.tolist(), self.level.tolist()):
            w.writerow([repr(t), repr(v)])
        return buf.getvalue()


def schroeder_edc(h, sample_rate, truncate_db=-65.0):
    """Backward-integrated energy decay in dB, 0 dB at the first sample.

    The curve is cut after the first sample at or below ``truncate_db``
    (``None`` keeps everything).  Zero energy tails are floored at
    ``EDC_FLOOR_DB`` instead of -inf.
    """
    h = np.asarray(h, dtype=float)
    e = h * h
    total = e.sum()
    if not total > 0.0:
        raise SilentInput("impulse response is silent")
    tail = np.cumsum(e[::-1])[::-1]
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(tail / total)
    level = np.maximum(level, EDC_FLOOR_DB)
    level[0] = 0.0
    # cumulative round-off can make the backward sum tick upward by an ulp
    level = np.minimum.accumulate(level)
    if truncate_db is not None:
        below = np.flatnonzero(level <= truncate_db)
        if below.size:
            level = level[: below[0] + 1]
    times = np.arange(level.size) / float(sample_rate)
    return EnergyDecayCurve(times, level)


@dataclass(frozen=True)
class DecayTimes:
    t20: float
    t30: float
    edt: float
    flags: tuple = ()


def _fit_decay(edc, upper, lower):
    lv = edc.level
    if lv.size < 2 or lv.min() > lower:
        return math.nan
    sel = (lv <= upper) & (lv >= lower)
    if np.count_nonzero(sel) < 2:
        return math.nan
    t = edc.times[sel]
    y = lv[sel]
    slope = np.polyfit(t - t.mean(), y - y.mean(), 1)[0]
    if not slope < 0:
        return math.nan
    return -60.0 / slope


def decay_times(edc):
    """T20, T30 and EDT by least-squares fits over the standard EDC ranges.

    A metric whose range the EDC does not reach is NaN and listed in
    ``flags`` as ``"<name>:InsufficientDecay"``.
    """
    out = {name: _fit_decay(edc, *rng) for name, rng in FIT_RANGES.items()}
    flags = tuple(f"{k}:InsufficientDecay" for k, v in out.items() if math.isnan(v))
    return DecayTimes(out["T20"], out["T30"], out["EDT"], flags)


def detect_direct(h, threshold_db=-20.0):
    """Index of the first sample within ``threshold_db`` of the absolute peak."""
    a = np.abs(np.asarray(h, dtype=float))
    peak = a.max() if a.size else 0.0
    if not peak > 0.0:
        raise SilentInput("impulse response is silent")
    return int(np.argmax(a >= peak * 10.0 ** (threshold_db / 20.0)))


def _ratio_db(num, den):
    if den <= 0.0:
        return (CLAMP, "ZeroDenominator") if num > 0.0 else (math.nan, "Undefined")
    if num <= 0.0:
        return -CLAMP, "ZeroNumerator"
    return float(np.clip(10.0 * math.log10(num / den), -CLAMP, CLAMP)), None


def _split_energy(e, n0, n1):
    return float(e[n0:n1].sum()), float(e[n1:].sum())


def clarity_indices(h, sample_rate, direct_time=None):
    """``((C50, C80), flags)`` in dB relative to the direct-sound sample.

    The sample exactly 50 or 80 ms after the direct sound belongs to the late part.
    """
    h = np.asarray(h, dtype=float)
    e = h * h
    if not e.sum() > 0.0:
        raise SilentInput("impulse response is silent")
    nd = detect_direct(h) if direct_time is None else int(round(direct_time * sample_rate))
    vals, flags = [], []
    for ms in (50, 80):
        early, late = _split_energy(e, nd, nd + int(round(ms * 1e-3 * sample_rate)))
        v, flag = _ratio_db(early, late)
        vals.append(v)
        if flag:
            flags.append(f"C{ms}:{flag}")
    return tuple(vals), tuple(flags)


def direct_window_bounds(h, sample_rate, direct_time=None, direct_window=None):
    """Sample bounds ``[n0, n1)`` of the direct sound.

    ``direct_window`` is an absolute ``(start, stop)`` in seconds, for example
    ``(t_direct, t_first_reflection)`` from an event list.  The default is
    1 ms before to 2.5 ms after the detected direct sound.
    """
    if direct_window is not None:
        n0 = int(round(direct_window[0] * sample_rate))
        n1 = int(round(direct_window[1] * sample_rate))
    else:
        nd = detect_direct(h) if direct_time is None else int(round(direct_time * sample_rate))
        n0 = nd - int(round(1e-3 * sample_rate))
        n1 = nd + int(round(2.5e-3 * sample_rate))
    return max(n0, 0), max(n1, 0)


def drr(h, sample_rate, direct_time=None, direct_window=None):
    """Direct-to-reverberant ratio ``(dB, flags)``; everything outside the window is reverberant."""
    h = np.asarray(h, dtype=float)
    e = h * h
    total = float(e.sum())
    if not total > 0.0:
        raise SilentInput("impulse response is silent")
    n0, n1 = direct_window_bounds(h, sample_rate, direct_time, direct_window)
    direct = float(e[n0:n1].sum())
    v, flag = _ratio_db(direct, total - direct if total - direct > total * 1e-15 else 0.0)
    return v, (f"DRR:{flag}",) if flag else ()


def speech_weighted_ratio(numerator, denominator, weights=defaults.SPEECH_WEIGHTS):
    """``10 log10(sum w N / sum w D)`` with weights normalised to sum 1; returns ``(dB, flags)``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (defaults.N_BANDS,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("need 7 non-negative weights, not all zero")
    w = w / w.sum()
    num = float(w @ np.asarray(numerator, dtype=float))
    den = float(w @ np.asarray(denominator, dtype=float))
    v, flag = _ratio_db(num, den)
    return v, (flag,) if flag else ()


@dataclass(eq=False)
class AcousticReport:
    t20: np.ndarray
    t30: np.ndarray
    edt: np.ndarray
    c50: np.ndarray
    c80: np.ndarray
    drr: np.ndarray
    c50_speech: float
    drr_speech: float
    direct_time: float
    flags: dict = field(default_factory=dict)

    PER_BAND = ("t20", "t30", "edt", "c50", "c80", "drr")

    def to_dict(self):
        out = {k: [None if math.isnan(v) else v for v in getattr(self, k).tolist()] for k in self.PER_BAND}
        out.update(
            bands_hz=[int(f) for f in defaults.OCTAVE_CENTERS],
            c50_speech=self.c50_speech,
            drr_speech=self.drr_speech,
            direct_time=self.direct_time,
            flags={k: list(v) for k, v in sorted(self.flags.items())},
        )
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", *BAND_LABELS, "broadband"])
        broadband = {"c50": self.c50_speech, "drr": self.drr_speech}
        for k in self.PER_BAND:
            vals = ["" if math.isnan(v) else repr(v) for v in getattr(self, k).tolist()]
            bb = broadband.get(k)
            w.writerow([k, *vals, "" if bb is None or math.isnan(bb) else repr(bb)])
        return buf.getvalue()

    def __eq__(self, other):
        if not isinstance(other, AcousticReport):
            return NotImplemented
        return self.to_json() == other.to_json()


def analyze(h, sample_rate, direct_time=None, direct_window=None,
            weights=defaults.SPEECH_WEIGHTS, truncate_db=-65.0):
    """Full octave-band report for one impulse-response channel.

    Decay curves start at the detected (or given) direct sound.  Band
    clarity and DRR use the broadband direct time for every band.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise ValueError("analyze expects a single channel")
    if not np.any(h != 0.0):
        raise SilentInput("impulse response is silent")
    nd = detect_direct(h) if direct_time is None else int(round(direct_time * sample_rate))
    n0, n1 = direct_window_bounds(h, sample_rate, nd / sample_rate, direct_window)
    n50 = nd + int(round(0.05 * sample_rate))
    bands = octave_filterbank(h, sample_rate)

    flags = {}
    cols = {k: np.full(defaults.N_BANDS, math.nan) for k in AcousticReport.PER_BAND}
    e50 = np.zeros((2, defaults.N_BANDS))
    edr = np.zeros((2, defaults.N_BANDS))
    for b, label in enumerate(BAND_LABELS):
        x = bands[b]
        e = x * x
        band_flags = []
        if not e[nd:].sum() > 0.0:
            flags[label] = ("SilentBand",)
            continue
        dt = decay_times(schroeder_edc(x[nd:], sample_rate, truncate_db))
        cols["t20"][b], cols["t30"][b], cols["edt"][b] = dt.t20, dt.t30, dt.edt
        band_flags.extend(dt.flags)
        (c50, c80), cf = clarity_indices(x, sample_rate, nd / sample_rate)
        cols["c50"][b], cols["c80"][b] = c50, c80
        band_flags.extend(cf)
        direct = float(e[n0:n1].sum())
        rest = float(e.sum()) - direct
        cols["drr"][b], f = _ratio_db(direct, rest)
        if f:
            band_flags.append(f"DRR:{f}")
        e50[:, b] = _split_energy(e, nd, n50)
        edr[:, b] = direct, rest
        if band_flags:
            flags[label] = tuple(band_flags)

    c50_sw, f1 = speech_weighted_ratio(e50[0], e50[1], weights)
    drr_sw, f2 = speech_weighted_ratio(edr[0], edr[1], weights)
    bb = tuple(f"C50:{f}" for f in f1) + tuple(f"DRR:{f}" for f in f2)
    if bb:
        flags["broadband"] = bb
    return AcousticReport(cols["t20"], cols["t30"], cols["edt"], cols["c50"], cols["c80"],
                          cols["drr"], c50_sw, drr_sw, nd / sample_rate, flags)


def filter_band(x, sample_rate, band, order=3):
    """Zero-phase octave band ``band`` (index 0..6) of ``x`` along the last axis."""
    return zero_phase_filter(_band_sos(float(sample_rate), order)[band], x, sample_rate)


def band_energies(x, sample_rate, n0=0, n1=None):
    """Per-band energy of ``x[..., n0:n1]`` after octave filtering, summed over leading axes."""
    bands = octave_filterbank(x, sample_rate)
    seg = bands[..., n0:n1]
    return (seg * seg).reshape(defaults.N_BANDS, -1).sum(axis=1)
