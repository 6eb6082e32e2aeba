"""End-to-end station-hall pipeline: scene, early events, tail, hybrid and spatial renders."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import defaults
from .ism import simulate_events
from .metrics import analyze, band_energies
from .scene import station_scene
from .spatial import (ArrayLayout, HrirSet, array_to_binaural, binaural_metrics,
                      render_scene_to_array)
from .synth import (ImpulseResponse, LateTailSpec, assemble_hybrid, elst_sweep,
                    generate_late_tail, render_events_omni)

ELST_SWEEP_MS = (0.0, 25.0, 50.0, 75.0, 100.0, 200.0)


@dataclass(frozen=True)
class PipelineConfig:
    scene: str = "all"
    dims: tuple = defaults.STATION_DIMS
    target_t60: tuple = defaults.STATION_T30
    max_order: int = defaults.MAX_ORDER
    window: float = defaults.EVENT_WINDOW
    elst: float = defaults.ELST
    crossfade: float = defaults.CROSSFADE
    splice: float = defaults.SPLICE_WINDOW
    order: int = defaults.AMBI_ORDER
    layout: str = "ring36"
    sample_rate: int = defaults.SAMPLE_RATE
    tail_length: float = 1.5       # tail duration in units of the longest T60
    seed: int = 0

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def array_layout(self):
        if self.layout == "ring36":
            return ArrayLayout.ring(defaults.RING_SIZE)
        if self.layout == "rtsofe60":
            return ArrayLayout.rtsofe()
        raise ValueError(f"unknown layout {self.layout!r}")


def source_seed(seed, source_id):
    """Per-source tail seed, independent of processing order."""
    return int(np.random.SeedSequence([int(seed), int(source_id)]).generate_state(1)[0])


def tail_band_gains(early, t60, onset, duration, seed, config):
    """Per-band gains that make a unit tail match ``early`` over the splice window."""
    fs = config.sample_rate
    unit = generate_late_tail(LateTailSpec(tuple(t60), onset, duration, seed=seed, sample_rate=fs))
    n0 = int(round(config.elst * fs))
    n1 = n0 + int(round(config.splice * fs))
    ee = band_energies(early.channel(0), fs, n0, n1)
    et = band_energies(unit.channel(0), fs, n0, n1)
    return tuple(np.sqrt(np.where(et > 0, ee / et, 0.0)).tolist())


@dataclass(eq=False)
class SourceRender:
    """Omni stages for one source position."""

    source_id: int
    events: list
    early: ImpulseResponse
    tail: ImpulseResponse
    hybrid: ImpulseResponse
    band_gains: tuple
    tail_seed: int
    t60: tuple
    extras: dict = field(default_factory=dict)


class StationPipeline:
    """Calibrated station hall with cached per-source renders."""

    def __init__(self, config=PipelineConfig(), scene=None):
        self.config = config
        self.scene = scene if scene is not None else station_scene(config.scene, config.dims, config.target_t60)
        self.t60 = tuple(float(v) for v in config.target_t60)
        self._omni = {}
        self._brir = {}
        self._layout = config.array_layout()
        self._hrirs = None

    @property
    def layout(self):
        return self._layout

    @property
    def hrirs(self):
        if self._hrirs is None:
            self._hrirs = HrirSet.for_layout(self._layout, self.config.sample_rate)
        return self._hrirs

    def tail_duration(self, onset):
        return onset + self.config.tail_length * max(self.t60)

    def events(self, sid):
        c = self.config
        return simulate_events(self.scene, sid, c.max_order, c.window)

    def omni(self, sid):
        if sid in self._omni:
            return self._omni[sid]
        c = self.config
        fs = c.sample_rate
        ev = self.events(sid)
        early = render_events_omni(ev, fs)
        onset = c.elst - c.crossfade
        dur = self.tail_duration(onset)
        seed = source_seed(c.seed, sid)
        gains = tail_band_gains(early, self.t60, onset, dur, seed, c)
        tail = generate_late_tail(LateTailSpec(self.t60, onset, dur, seed=seed, band_gains=gains,
                                               sample_rate=fs))
        hyb = assemble_hybrid(early, tail, c.elst, c.crossfade)
        out = SourceRender(sid, ev, early, tail, hyb, gains, seed, self.t60)
        self._omni[sid] = out
        return out

    def analyze_source(self, sid):
        return analyze(self.omni(sid).hybrid.channel(0), self.config.sample_rate)

    # -- E-LST sweep --------------------------------------------------------------

    def reference_tail(self, sid):
        """Late-only surrogate starting at the direct sound, level matched at the default splice."""
        c = self.config
        r = self.omni(sid)
        onset = r.events[0].arrival_time
        dur = self.tail_duration(onset)
        gains = tail_band_gains(r.early, self.t60, onset, dur, r.tail_seed, c)
        return generate_late_tail(LateTailSpec(self.t60, onset, dur, seed=r.tail_seed,
                                               band_gains=gains, sample_rate=c.sample_rate))

    def elst_sweep(self, sid, elst_ms=ELST_SWEEP_MS):
        r = self.omni(sid)
        return elst_sweep(r.early, self.reference_tail(sid), [t / 1e3 for t in elst_ms],
                          energy_match=True, splice=self.config.splice)

    # -- loudspeaker array and binaural -------------------------------------------

    def array_ir(self, sid, anechoic=False):
        c = self.config
        r = self.omni(sid)
        facing = self.scene.receiver.facing_azimuth
        if anechoic:
            direct = [e for e in r.events if e.order == 0]
            return render_scene_to_array(direct, None, self._layout, c.order, facing_azimuth=facing,
                                         sample_rate=c.sample_rate)
        n = len(self._layout)
        dirs = tuple(tuple(u) for u in self._layout.unit_vectors().tolist())
        gains = tuple(g / math.sqrt(n) for g in r.band_gains)
        onset = c.elst - c.crossfade
        tail = generate_late_tail(LateTailSpec(self.t60, onset, self.tail_duration(onset), dirs,
                                               r.tail_seed, gains, c.sample_rate))
        return render_scene_to_array(r.events, tail, self._layout, c.order, c.elst, c.crossfade,
                                     facing, c.sample_rate)

    def brir(self, sid, mode="reverberant"):
        if mode not in ("reverberant", "anechoic"):
            raise ValueError(f"unknown mode {mode!r}")
        if (sid, mode) not in self._brir:
            self._brir[(sid, mode)] = array_to_binaural(self.array_ir(sid, mode == "anechoic"),
                                                        self._layout, self.hrirs)
        return self._brir[(sid, mode)]

    def position_metrics(self, sid):
        """Binaural metrics (anechoic and reverberant) plus speech-weighted C50 and DRR."""
        rep = self.analyze_source(sid)
        out = {"position": sid, "c50_db": rep.c50_speech, "drr_db": rep.drr_speech}
        for mode in ("anechoic", "reverberant"):
            m = binaural_metrics(self.brir(sid, mode))
            out[mode] = m
        return out
