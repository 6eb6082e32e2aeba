"""Simulated speech-reception-threshold experiment.

Levels are signal-to-noise ratios in dB (speech level minus the fixed
interferer level).  A listener oracle maps a level to the probability that a
single word is repeated correctly; an adaptive track presents five-word
sentences and moves the level by the proportion of words correct.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import defaults
from .errors import DegenerateVariance, RangeError, SilentBRIR, ValidationError
from .metrics import band_energies, octave_filterbank

# Approximate long-term average speech spectrum, octave bands 125 Hz - 8 kHz,
# dB relative to the 500 Hz band.
LTASS_OCTAVE_DB = (-4.0, 0.5, 0.0, -6.0, -11.0, -15.0, -20.0)
MOD_DEPTH = 0.5            # std of the log-envelope, nepers
MOD_BAND = (2.0, 8.0)      # Hz
MOD_PEAK = 4.0             # Hz
WORDS_PER_SENTENCE = 5
STEP_SCHEDULE = (4.0, 2.0, 1.0)
SRT_SENTENCES = 20
START_OFFSET = 6.0


# -- stimuli ---------------------------------------------------------------------

def _band_index(freqs):
    """Octave band of every FFT bin; bins outside the outer bands join the edge band."""
    c = np.asarray(defaults.OCTAVE_CENTERS)
    with np.errstate(divide="ignore"):
        idx = np.rint(np.log2(np.maximum(freqs, 1e-9) / c[0])).astype(int)
    return np.clip(idx, 0, len(c) - 1)


def octave_levels_db(x, sample_rate):
    """Band energy of ``x`` in each analysis octave, dB (arbitrary reference)."""
    bands = octave_filterbank(x, sample_rate)
    return 10.0 * np.log10(np.mean(bands ** 2, axis=-1))


def modulation_envelope(n, sample_rate, rng, depth=MOD_DEPTH):
    """Positive envelope ``exp(depth * m)``; ``m`` is unit-variance noise in 2-8 Hz peaking at 4 Hz."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    lo, hi = MOD_BAND
    inside = (f >= lo) & (f <= hi)
    shape = np.zeros_like(f)
    shape[inside] = np.exp(-0.5 * (np.log2(f[inside] / MOD_PEAK) / 0.5) ** 2)
    m = np.fft.irfft(spec * shape, n)
    m /= np.std(m)
    env = np.exp(depth * m)
    return env / np.sqrt(np.mean(env ** 2))


def speech_shaped_noise(duration, sample_rate=defaults.SAMPLE_RATE, seed=0,
                        level_db=defaults.NOISE_LEVEL_DB, template=LTASS_OCTAVE_DB,
                        modulate=True, iterations=3):
    """Noise with a speech-like octave spectrum and syllabic envelope.

    The spectrum is set per octave in the frequency domain and refined a few
    times against the analysis filterbank, so the measured octave levels
    follow ``template`` (relative dB).  The result is scaled to an RMS of
    ``level_db`` dB SPL, in pascals.
    """
    if not duration > 0:
        raise RangeError("duration must be positive")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    white = np.fft.rfft(rng.standard_normal(n))
    band = _band_index(np.fft.rfftfreq(n, 1.0 / sample_rate))
    env = modulation_envelope(n, sample_rate, rng) if modulate else np.ones(n)
    target = np.asarray(template, dtype=float)
    gains_db = target.copy()
    for it in range(iterations + 1):
        x = np.fft.irfft(white * 10.0 ** (gains_db[band] / 20.0), n) * env
        if it == iterations:
            break
        err = target - octave_levels_db(x, sample_rate)
        gains_db += err - np.mean(err)
    rms = defaults.P_REF * 10.0 ** (level_db / 20.0)
    return x * (rms / np.sqrt(np.mean(x * x)))


# -- listener oracles ---------------------------------------------------------------

@dataclass(frozen=True)
class PsychometricOracle:
    """Logistic word-recognition probability, 0.5 at ``srt_true``."""

    srt_true: float
    slope: float = 1.0
    kind: str = "analytic-logistic"
    benefit: float = 0.0

    def __post_init__(self):
        if not self.slope > 0:
            raise RangeError("slope must be positive")
        if self.kind not in ("analytic-logistic", "better-ear-model"):
            raise ValidationError(f"unknown oracle kind {self.kind!r}")

    def __call__(self, level):
        z = (level - self.srt_true) / self.slope
        return 0.5 * (1.0 + math.tanh(0.5 * z))


def _ear_band_energies(brir):
    fs = brir.sample_rate
    out = np.stack([band_energies(ch, fs) for ch in brir.samples[:2]])
    if np.any(out <= 0.0):
        raise SilentBRIR("BRIR has an ear with no energy in some band")
    return out


def effective_snr(target_brir, interferer_brir, speech_level=defaults.NOISE_LEVEL_DB,
                  noise_level=defaults.NOISE_LEVEL_DB, weights=defaults.SPEECH_WEIGHTS):
    """Band-importance weighted better-ear SNR in dB.

    Speech and interferer share the same long-term spectrum, so per band and
    ear the SNR is the level difference plus the BRIR band-energy ratio.
    """
    if target_brir.sample_rate != interferer_brir.sample_rate:
        raise ValidationError("BRIR sample rates differ")
    if target_brir.n_channels < 2 or interferer_brir.n_channels < 2:
        raise ValidationError("BRIRs must be stereo")
    et = _ear_band_energies(target_brir)
    ei = _ear_band_energies(interferer_brir)
    band_snr = np.max(10.0 * np.log10(et / ei), axis=0) + (speech_level - noise_level)
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * band_snr) / np.sum(w))


def intelligibility_oracle(target_brir, interferer_brir, srt_offset=-14.4, slope=1.0,
                           weights=defaults.SPEECH_WEIGHTS, noise_level=defaults.NOISE_LEVEL_DB):
    """Better-ear listener: words are understood at 50% when the effective SNR is ``srt_offset``.

    The returned oracle takes the nominal SNR; its ``benefit`` is the
    effective SNR at a nominal SNR of 0 dB.
    """
    benefit = effective_snr(target_brir, interferer_brir, noise_level, noise_level, weights)
    return PsychometricOracle(srt_offset - benefit, slope, "better-ear-model", benefit)


# -- adaptive track -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    index: int
    level: float
    words: tuple
    proportion: float


@dataclass(frozen=True)
class SrtResult:
    srt_estimate: float
    trials: tuple
    condition: str = ""

    @property
    def levels(self):
        return np.array([t.level for t in self.trials])


def run_adaptive_track(oracle, start_level=None, n_sentences=30, seed=0, condition="",
                       step_schedule=STEP_SCHEDULE, n_words=WORDS_PER_SENTENCE):
    """Word-scored one-up/one-down style track.

    After each sentence the level moves by ``-step * (p - 0.5) / 0.5`` where
    ``p`` is the proportion of words correct.  The step starts at
    ``step_schedule[0]`` and advances along the schedule at each of the first
    reversals.  The SRT is the mean level of the last 20 sentences presented.
    ``start_level`` defaults to ``oracle.srt_true + 6`` dB.
    """
    if n_sentences < SRT_SENTENCES + 5:
        raise RangeError(f"need at least {SRT_SENTENCES + 5} sentences")
    rng = np.random.default_rng(seed)
    level = oracle.srt_true + START_OFFSET if start_level is None else float(start_level)
    reversals, last_dir = 0, 0
    trials = []
    for i in range(n_sentences):
        p = oracle(level)
        words = tuple(bool(w) for w in rng.random(n_words) < p)
        prop = sum(words) / n_words
        trials.append(TrialRecord(i, level, words, prop))
        step = step_schedule[min(reversals, len(step_schedule) - 1)]
        delta = -step * (prop - 0.5) / 0.5
        direction = int(np.sign(delta))
        if direction and last_dir and direction != last_dir:
            reversals += 1
        if direction:
            last_dir = direction
        level += delta
    est = float(np.mean([t.level for t in trials[-SRT_SENTENCES:]]))
    return SrtResult(est, tuple(trials), condition)


def compute_srm(srt_reference, srt_test):
    """Spatial release from masking; positive when the test condition is easier."""
    if not (math.isfinite(srt_reference) and math.isfinite(srt_test)):
        raise RangeError("SRTs must be finite")
    return srt_reference - srt_test


def paired_t_test(sample_a, sample_b):
    """Two-tailed paired t-test; returns ``(t, df, p)``."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise RangeError("need two equal-length samples of at least 2 values")
    d = a - b
    n = d.size
    df = n - 1
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, df, 1.0
        raise DegenerateVariance("all paired differences are equal")
    t = mean / (sd / math.sqrt(n))
    p = float(2.0 * stats.t.sf(abs(t), df))
    return t, df, min(p, 1.0)


# -- batch runs ---------------------------------------------------------------------

@dataclass(frozen=True)
class SrtCondition:
    target: int
    noise: int = 1
    mode: str = "reverberant"
    srt_true: float = -14.4

    @property
    def label(self):
        return f"T{self.target}-N{self.noise}-{self.mode}"


@dataclass(frozen=True)
class SrtBatchConfig:
    conditions: tuple
    oracle: str = "better-ear-model"
    seeds: tuple = tuple(range(10))
    slope: float = 1.0
    srt_offset: float = -14.4
    n_sentences: int = 30
    noise_level_db: float = defaults.NOISE_LEVEL_DB

    @classmethod
    def from_dict(cls, d):
        try:
            conds = tuple(SrtCondition(int(c["target"]), int(c.get("noise", 1)),
                                       str(c.get("mode", "reverberant")),
                                       float(c.get("srt_true", -14.4)))
                          for c in d["conditions"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad SRT condition list: {exc}") from exc
        if not conds:
            raise ValidationError("no SRT conditions")
        seeds = d.get("seeds", list(range(int(d.get("n_seeds", 10)))))
        cfg = cls(conds, str(d.get("oracle", "better-ear-model")), tuple(int(s) for s in seeds),
                  float(d.get("slope", 1.0)), float(d.get("srt_offset", -14.4)),
                  int(d.get("n_sentences", 30)), float(d.get("noise_level_db", defaults.NOISE_LEVEL_DB)))
        if cfg.oracle not in ("better-ear-model", "analytic-logistic"):
            raise ValidationError(f"unknown oracle {cfg.oracle!r}")
        return cfg


@dataclass
class SrtBatchResult:
    rows: list = field(default_factory=list)   # (condition label, seed, srt)

    def by_condition(self):
        out = {}
        for label, _, srt in self.rows:
            out.setdefault(label, []).append(srt)
        return out


def make_oracle(config, condition, brir_for=None):
    if config.oracle == "analytic-logistic":
        return PsychometricOracle(condition.srt_true, config.slope)
    if brir_for is None:
        raise ValidationError("the better-ear oracle needs BRIRs")
    return intelligibility_oracle(brir_for(condition.target, condition.mode),
                                  brir_for(condition.noise, condition.mode),
                                  config.srt_offset, config.slope, noise_level=config.noise_level_db)


def run_batch(config, brir_for=None):
    """Run every condition for every seed; ``brir_for(position, mode)`` supplies stereo BRIRs."""
    res = SrtBatchResult()
    for cond in config.conditions:
        oracle = make_oracle(config, cond, brir_for)
        for seed in config.seeds:
            r = run_adaptive_track(oracle, None, config.n_sentences, seed, cond.label)
            res.rows.append((cond.label, seed, r.srt_estimate))
    return res


def tracks_to_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "seed", "srt_db"])
    for label, seed, srt in result.rows:
        w.writerow([label, seed, repr(srt)])
    return buf.getvalue()


def summary_to_csv(result, conditions):
    """Mean and spread per condition, with SRM against the co-located condition of the same mode."""
    groups = result.by_condition()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "target", "noise", "mode", "n", "srt_mean_db", "srt_sd_db", "srm_db"])
    means = {c.label: float(np.mean(groups[c.label])) for c in conditions}
    for c in conditions:
        vals = np.asarray(groups[c.label])
        ref = next((r for r in conditions if r.mode == c.mode and r.target == r.noise == c.noise), None)
        srm = compute_srm(means[ref.label], means[c.label]) if ref is not None else math.nan
        sd = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
        w.writerow([c.label, c.target, c.noise, c.mode, vals.size, repr(means[c.label]),
                    "" if math.isnan(sd) else repr(sd), "" if math.isnan(srm) else repr(srm)])
    return buf.getvalue()
