"""Horizontal Ambisonics panning, loudspeaker-array rendering and binaural reconstruction.

Azimuths are counter-clockwise with 0 straight ahead and +90 degrees to the
listener's left.  The horizontal encoding is ``[1, cos phi, sin phi, ...,
cos M phi, sin M phi]``; the sampling decoder evaluates the same functions at
each loudspeaker, weights orders ``m >= 1`` by 2 and divides by the number of
loudspeakers, which for a plane wave gives the Dirichlet kernel

    g_j = (1 + 2 sum_m cos(m (phi_j - phi_s))) / L.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.fft import next_fast_len

from . import defaults
from .errors import MissingDirection, OrderTooHigh, SilentChannel, ValidationError
from .metrics import zero_phase_filter
from .synth import ImpulseResponse, assemble_hybrid, fractional_delay_kernel, render_events

HEAD_RADIUS = 0.0875
HRIR_TAPS = 256
HRIR_BULK_DELAY = 48          # samples; keeps every ear's kernel causal
SHADOW_ALPHA_MIN = 0.1
SHADOW_THETA_MIN = math.radians(150.0)
BINAURAL_CUTOFF = 1300.0
MAX_ITD = 1e-3
LOW_COHERENCE = 0.3


# -- encoding and decoding -------------------------------------------------------

def encode_horizontal(azimuth, order, elevation=0.0):
    """Circular-harmonic coefficients of a plane wave from ``azimuth`` (radians).

    A non-zero ``elevation`` scales every ``m >= 1`` term by ``cos(elevation)``;
    the omni term, and with it the decoded gain sum, is left untouched.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    m = np.arange(1, order + 1)
    out = np.empty(2 * order + 1)
    out[0] = 1.0
    scale = math.cos(elevation)
    out[1::2] = scale * np.cos(m * azimuth)
    out[2::2] = scale * np.sin(m * azimuth)
    return out


@dataclass(frozen=True)
class ArrayLayout:
    """Loudspeaker directions in degrees; channel order is layout order."""

    azimuth_deg: tuple
    elevation_deg: tuple
    radius: float = defaults.RING_RADIUS
    name: str = "custom"

    def __post_init__(self):
        if len(self.azimuth_deg) != len(self.elevation_deg) or len(self.azimuth_deg) == 0:
            raise ValidationError("layout needs matching, non-empty azimuth and elevation lists")

    @classmethod
    def ring(cls, n=defaults.RING_SIZE, radius=defaults.RING_RADIUS):
        az = tuple(360.0 * k / n for k in range(n))
        return cls(az, (0.0,) * n, radius, f"ring{n}")

    @classmethod
    def rtsofe(cls, radius=defaults.RING_RADIUS):
        """60 loudspeakers: 36 at ear height plus 12 each at -19 and +32 degrees."""
        ring = cls.ring(36, radius)
        low = tuple(30.0 * k for k in range(12))
        az = ring.azimuth_deg + low + low
        el = ring.elevation_deg + (-19.0,) * 12 + (32.0,) * 12
        return cls(az, el, radius, "rtsofe60")

    def __len__(self):
        return len(self.azimuth_deg)

    @property
    def azimuths(self):
        return np.radians(np.asarray(self.azimuth_deg, dtype=float))

    @property
    def elevations(self):
        return np.radians(np.asarray(self.elevation_deg, dtype=float))

    @property
    def horizontal_indices(self):
        return np.flatnonzero(np.asarray(self.elevation_deg) == 0.0)

    def horizontal(self):
        idx = self.horizontal_indices
        return ArrayLayout(tuple(self.azimuth_deg[i] for i in idx), (0.0,) * len(idx),
                           self.radius, f"{self.name}-horizontal")

    def unit_vectors(self):
        az, el = self.azimuths, self.elevations
        return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)

    def is_uniform_ring(self, tol=1e-9):
        if np.any(np.asarray(self.elevation_deg) != 0.0):
            return False
        az = np.sort(np.mod(self.azimuths, 2 * np.pi))
        gaps = np.diff(np.concatenate([az, [az[0] + 2 * np.pi]]))
        return bool(np.all(np.abs(gaps - 2 * np.pi / len(az)) < tol))


def decoder_matrix(order, layout, allow_aliasing=False):
    """``(L, 2M+1)`` sampling decoder for a horizontal ring."""
    n = len(layout)
    if n < 2 * order + 1:
        msg = f"{n} loudspeakers cannot carry order {order} (need {2 * order + 1})"
        if not allow_aliasing:
            raise OrderTooHigh(msg)
        warnings.warn(msg + "; spatial aliasing", RuntimeWarning, stacklevel=2)
    weights = np.full(2 * order + 1, 2.0)
    weights[0] = 1.0
    y = np.stack([encode_horizontal(a, order) for a in layout.azimuths])
    return y * weights[None, :] / n


def sampling_decode(coefficients, layout, allow_aliasing=False):
    """Per-loudspeaker gains for one coefficient vector (or ``(2M+1, N)`` signals)."""
    b = np.asarray(coefficients, dtype=float)
    order = (b.shape[0] - 1) // 2
    return decoder_matrix(order, layout, allow_aliasing) @ b


@dataclass(eq=False)
class AmbisonicField:
    order: int
    signals: np.ndarray
    sample_rate: int = defaults.SAMPLE_RATE

    def __post_init__(self):
        self.signals = np.atleast_2d(np.asarray(self.signals, dtype=float))
        if self.signals.shape[0] != 2 * self.order + 1:
            raise ValueError(f"order {self.order} needs {2 * self.order + 1} channels")

    def decode(self, layout, allow_aliasing=False):
        return ImpulseResponse(self.sample_rate, sampling_decode(self.signals, layout, allow_aliasing))


def velocity_vector(gains, layout):
    """Gain-weighted mean loudspeaker direction (not normalised to unit length)."""
    g = np.asarray(gains, dtype=float)
    return g @ layout.unit_vectors() / np.sum(g)


# -- array rendering ---------------------------------------------------------------

def event_gains(events, layout, order=defaults.AMBI_ORDER, facing_azimuth=0.0, allow_aliasing=False):
    """``(n_events, L)`` decoded gains; only ear-height loudspeakers receive early sound.

    ``facing_azimuth`` (radians) is the listener's look direction in room
    coordinates; event azimuths are taken relative to it.
    """
    ring_idx = layout.horizontal_indices
    ring = layout.horizontal()
    if not ring.is_uniform_ring():
        raise ValidationError("the ear-height loudspeakers must form a uniform ring")
    dec = decoder_matrix(order, ring, allow_aliasing)
    out = np.zeros((len(events), len(layout)))
    for i, e in enumerate(events):
        d = np.asarray(e.doa, dtype=float)
        az = math.atan2(d[1], d[0]) - facing_azimuth
        el = math.asin(max(-1.0, min(1.0, d[2] / np.linalg.norm(d))))
        out[i, ring_idx] = dec @ encode_horizontal(az, order, el)
    return out


def render_scene_to_array(events, late, layout, order=defaults.AMBI_ORDER, elst=defaults.ELST,
                          crossfade=defaults.CROSSFADE, facing_azimuth=0.0,
                          sample_rate=defaults.SAMPLE_RATE, taps=defaults.FIR_TAPS):
    """Loudspeaker-array IR: panned early events spliced onto per-loudspeaker tails.

    ``late`` must carry one channel per loudspeaker (or be ``None`` for early
    sound only).  With no events the tail channels are returned as they are.
    """
    if late is not None and late.n_channels != len(layout):
        raise ValidationError(f"late part has {late.n_channels} channels, layout has {len(layout)}")
    if len(events) == 0:
        if late is None:
            raise ValidationError("nothing to render")
        return ImpulseResponse(late.sample_rate, late.samples.copy(), late.time_origin, _labels(layout))
    fs = late.sample_rate if late is not None else sample_rate
    gains = event_gains(events, layout, order, facing_azimuth)
    early = render_events(events, fs, taps, gains)
    early = ImpulseResponse(fs, early.samples, 0.0, _labels(layout))
    if late is None:
        return early
    return assemble_hybrid(early, late, elst, crossfade)


def _labels(layout):
    return tuple(f"az{a:g}_el{e:g}" for a, e in zip(layout.azimuth_deg, layout.elevation_deg))


# -- head-related impulse responses ------------------------------------------------------

def _ear_angle(azimuth, elevation, side):
    """Angle between the source direction and the ear axis (+y left, -y right)."""
    u_y = math.cos(elevation) * math.sin(azimuth)
    return math.acos(max(-1.0, min(1.0, side * u_y)))


def woodworth_delay(theta, radius=HEAD_RADIUS, c=343.0):
    """Arrival delay at an ear, relative to the head centre, for ear angle ``theta``."""
    if theta < math.pi / 2:
        return -radius * math.cos(theta) / c
    return radius * (theta - math.pi / 2) / c


def head_shadow_filter(theta, sample_rate, radius=HEAD_RADIUS, c=343.0):
    """First-order shelving head-shadow filter as digital ``(b, a)``.

    ``(1 + alpha s / 2 w0) / (1 + s / 2 w0)`` with ``w0 = c / a``; ``alpha``
    runs from 2 facing the ear down to ``SHADOW_ALPHA_MIN`` at 150 degrees.
    """
    alpha = (1.0 + SHADOW_ALPHA_MIN / 2.0) + (1.0 - SHADOW_ALPHA_MIN / 2.0) * math.cos(
        theta / SHADOW_THETA_MIN * math.pi)
    w0 = c / radius
    return sps.bilinear([alpha, 2.0 * w0], [1.0, 2.0 * w0], fs=sample_rate)


def spherical_head_hrir(azimuth_deg, elevation_deg=0.0, sample_rate=defaults.SAMPLE_RATE,
                        radius=HEAD_RADIUS, c=343.0, taps=HRIR_TAPS):
    """``(2, taps)`` left/right impulse responses of a rigid spherical head model."""
    az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    out = np.zeros((2, taps))
    for row, side in ((0, 1.0), (1, -1.0)):
        theta = _ear_angle(az, el, side)
        delay = HRIR_BULK_DELAY + woodworth_delay(theta, radius, c) * sample_rate
        first, k = fractional_delay_kernel(delay, 64)
        imp = np.zeros(taps)
        imp[first:first + k.size] = k
        b, a = head_shadow_filter(theta, sample_rate, radius, c)
        out[row] = sps.lfilter(b, a, imp)
    return out


@dataclass(eq=False)
class HrirSet:
    """Stereo HRIRs keyed by ``(azimuth_deg, elevation_deg)``."""

    directions: list
    irs: np.ndarray
    sample_rate: int = defaults.SAMPLE_RATE
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.irs = np.asarray(self.irs, dtype=float)
        if self.irs.ndim != 3 or self.irs.shape[1] != 2 or self.irs.shape[0] != len(self.directions):
            raise ValidationError("irs must be (directions, 2, taps)")
        self.directions = [(float(a), float(e)) for a, e in self.directions]
        self._index = {self._key(a, e): i for i, (a, e) in enumerate(self.directions)}

    @staticmethod
    def _key(az, el):
        return (round(float(az) % 360.0, 6) % 360.0, round(float(el), 6))

    @classmethod
    def spherical(cls, directions, sample_rate=defaults.SAMPLE_RATE, **kw):
        irs = np.stack([spherical_head_hrir(a, e, sample_rate, **kw) for a, e in directions])
        return cls(list(directions), irs, sample_rate)

    @classmethod
    def for_layout(cls, layout, sample_rate=defaults.SAMPLE_RATE, **kw):
        return cls.spherical(list(zip(layout.azimuth_deg, layout.elevation_deg)), sample_rate, **kw)

    def get(self, azimuth_deg, elevation_deg=0.0):
        i = self._index.get(self._key(azimuth_deg, elevation_deg))
        if i is None:
            raise MissingDirection(f"no HRIR for azimuth {azimuth_deg} deg, elevation {elevation_deg} deg")
        return self.irs[i]

    def save(self, directory):
        """Write ``manifest.csv`` (azimuth_deg, elevation_deg, filename) and stereo WAVs."""
        from .audio_io import write_ir, write_text
        directory = Path(directory)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["azimuth_deg", "elevation_deg", "filename"])
        for i, (a, e) in enumerate(self.directions):
            name = f"hrir_{i:03d}.wav"
            write_ir(directory / name, ImpulseResponse(self.sample_rate, self.irs[i]))
            w.writerow([repr(a), repr(e), name])
        write_text(directory / "manifest.csv", buf.getvalue())

    @classmethod
    def load(cls, directory):
        from .audio_io import read_ir, read_text
        directory = Path(directory)
        rows = list(csv.DictReader(io.StringIO(read_text(directory / "manifest.csv"))))
        dirs, irs, fs = [], [], None
        for row in rows:
            ir = read_ir(directory / row["filename"])
            if ir.n_channels != 2:
                raise ValidationError(f"{row['filename']} is not stereo")
            if fs is not None and ir.sample_rate != fs:
                raise ValidationError("HRIR files disagree on sample rate")
            fs = ir.sample_rate
            dirs.append((float(row["azimuth_deg"]), float(row["elevation_deg"])))
            irs.append(ir.samples)
        n = max(x.shape[1] for x in irs)
        irs = np.stack([np.pad(x, ((0, 0), (0, n - x.shape[1]))) for x in irs])
        return cls(dirs, irs, fs)


def array_to_binaural(array_ir, layout, hrirs):
    """Sum over loudspeakers of each channel convolved with its direction's HRIR pair."""
    if array_ir.n_channels != len(layout):
        raise ValidationError("array IR and layout disagree on channel count")
    if hrirs.sample_rate != array_ir.sample_rate:
        raise ValidationError("HRIR and array sample rates differ")
    pairs = [hrirs.get(a, e) for a, e in zip(layout.azimuth_deg, layout.elevation_deg)]
    n_out = array_ir.n_samples + hrirs.irs.shape[2] - 1
    nfft = next_fast_len(n_out, real=True)
    spec = np.zeros((2, nfft // 2 + 1), dtype=complex)
    for ch, h in zip(array_ir.samples, pairs):
        if not np.any(ch):
            continue
        spec += np.fft.rfft(ch, nfft)[None, :] * np.fft.rfft(h, nfft, axis=1)
    out = np.fft.irfft(spec, nfft, axis=1)[:, :n_out]
    return ImpulseResponse(array_ir.sample_rate, out, array_ir.time_origin, ("left", "right"))


# -- binaural metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class BinauralMetrics:
    itd: float
    ild: float
    iacc: float
    flags: tuple = ()

    def as_row(self):
        return {"itd_ms": self.itd * 1e3, "ild_db": self.ild, "iacc": self.iacc}


def _split_sos(sample_rate, cutoff):
    lo = sps.butter(4, cutoff, "lowpass", fs=sample_rate, output="sos")
    hi = sps.butter(4, cutoff, "highpass", fs=sample_rate, output="sos")
    return lo, hi


def _lagged_dots(left, right, max_lag):
    """``c[k] = sum_n left[n] right[n + k]`` for ``k = -max_lag .. max_lag``."""
    n = left.size
    out = np.empty(2 * max_lag + 1)
    for i, k in enumerate(range(-max_lag, max_lag + 1)):
        if k >= 0:
            out[i] = np.dot(left[:n - k], right[k:])
        else:
            out[i] = np.dot(left[-k:], right[:n + k])
    return out


def binaural_metrics(stereo, sample_rate=None, cutoff=BINAURAL_CUTOFF, max_itd=MAX_ITD):
    """ITD, ILD and IACC of a two-channel signal.

    ITD is the lag of the cross-correlation peak of the low-passed ears within
    ``+-max_itd``; positive means the left ear leads.  Exact ties go to the
    smallest lag magnitude, and a tie between ``+k`` and ``-k`` reports 0.
    IACC is the largest magnitude of the normalised cross-correlation over the
    same lags, normalised by the full-length energies.  ILD is the left-to-right
    energy ratio of the high-passed ears in dB.
    """
    if isinstance(stereo, ImpulseResponse):
        sample_rate, x = stereo.sample_rate, stereo.samples
    else:
        x = np.asarray(stereo, dtype=float)
    if sample_rate is None:
        raise ValueError("sample_rate is required for raw arrays")
    if x.ndim != 2 or x.shape[0] != 2:
        raise ValueError("need a (2, n) signal")
    for name, ch in zip(("left", "right"), x):
        if not np.any(ch):
            raise SilentChannel(f"{name} channel is silent")
    lo_sos, hi_sos = _split_sos(sample_rate, cutoff)
    lo = zero_phase_filter(lo_sos, x, sample_rate)
    hi = zero_phase_filter(hi_sos, x, sample_rate)
    e_lo = np.sum(lo * lo, axis=1)
    e_hi = np.sum(hi * hi, axis=1)
    if np.any(e_lo == 0.0) or np.any(e_hi == 0.0):
        raise SilentChannel("a channel has no energy on one side of the crossover")

    max_lag = int(round(max_itd * sample_rate))
    rho = _lagged_dots(lo[0], lo[1], max_lag) / math.sqrt(e_lo[0] * e_lo[1])
    lags = np.arange(-max_lag, max_lag + 1)
    peak = rho.max()
    tied = lags[rho >= peak - 1e-12 * max(abs(peak), 1.0)]
    near = tied[np.abs(tied) == np.abs(tied).min()]
    itd = 0.0 if near.size > 1 else near[0] / sample_rate
    iacc = float(min(1.0, np.max(np.abs(rho))))
    ild = 10.0 * math.log10(e_hi[0] / e_hi[1])
    flags = ("LowCoherence",) if iacc < LOW_COHERENCE else ()
    return BinauralMetrics(float(itd), float(ild), iacc, flags)
