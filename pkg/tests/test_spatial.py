import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridrir import defaults
from hybridrir.errors import MissingDirection, OrderTooHigh, SilentChannel
from hybridrir.ism import ReflectionEvent
from hybridrir.spatial import (AmbisonicField, ArrayLayout, HrirSet, array_to_binaural, binaural_metrics,
                               decoder_matrix, encode_horizontal, event_gains, render_scene_to_array,
                               sampling_decode, spherical_head_hrir, velocity_vector, woodworth_delay)
from hybridrir.synth import ImpulseResponse, LateTailSpec, generate_late_tail, render_events_omni

from oracles import dirichlet_gain, woodworth_itd

FS = defaults.SAMPLE_RATE
RING = ArrayLayout.ring(36)
ONES = np.ones(defaults.N_BANDS)


def _event(az_deg, t=0.005, el_deg=0.0):
    a, e = math.radians(az_deg), math.radians(el_deg)
    doa = np.array([math.cos(e) * math.cos(a), math.cos(e) * math.sin(a), math.sin(e)])
    return ReflectionEvent(t, doa, ONES.copy(), 0)


def test_encode_examples():
    assert encode_horizontal(0.0, 1) == pytest.approx([1, 1, 0])
    assert encode_horizontal(math.pi / 2, 1) == pytest.approx([1, 0, 1], abs=1e-15)
    assert encode_horizontal(1.234, 17).size == 35


def test_gain_at_loudspeaker_direction():
    g = sampling_decode(encode_horizontal(math.radians(50.0), 17), RING)
    assert g[5] == pytest.approx(35 / 36, abs=1e-12)
    assert g[5] == pytest.approx(dirichlet_gain(17, 36, 0.0), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(0.0, 2 * math.pi))
def test_decoded_gains_match_dirichlet_and_sum_to_one(phi):
    g = sampling_decode(encode_horizontal(phi, 17), RING)
    assert abs(g.sum() - 1.0) < 1e-9
    oracle = [dirichlet_gain(17, 36, a - phi) for a in RING.azimuths]
    np.testing.assert_allclose(g, oracle, atol=1e-12)


def test_order_zero_is_uniform():
    assert np.allclose(sampling_decode(encode_horizontal(0.7, 0), RING), 1 / 36)


@settings(max_examples=50)
@given(st.floats(0.0, 2 * math.pi))
def test_velocity_vector_points_at_source(phi):
    v = velocity_vector(sampling_decode(encode_horizontal(phi, 17), RING), RING)
    err = math.degrees(abs(math.remainder(math.atan2(v[1], v[0]) - phi, 2 * math.pi)))
    assert err < 0.5


@settings(max_examples=30)
@given(st.floats(0.0, 2 * math.pi), st.integers(0, 35))
def test_rotation_equivariance(phi, k):
    rot = ArrayLayout(tuple((a + 10.0 * k) for a in RING.azimuth_deg), RING.elevation_deg)
    a = sampling_decode(encode_horizontal(phi, 17), RING)
    b = sampling_decode(encode_horizontal(phi + math.radians(10.0 * k), 17), rot)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_order_too_high_guard():
    with pytest.raises(OrderTooHigh):
        decoder_matrix(18, RING)
    with pytest.warns(RuntimeWarning):
        decoder_matrix(18, RING, allow_aliasing=True)


def test_ambisonic_field_channel_count():
    with pytest.raises(ValueError):
        AmbisonicField(2, np.zeros((4, 10)))
    field = AmbisonicField(1, np.stack([encode_horizontal(0.0, 1)] * 3, axis=1))
    assert field.decode(ArrayLayout.ring(4)).n_channels == 4


def test_rtsofe_layout():
    lay = ArrayLayout.rtsofe()
    assert len(lay) == 60
    assert len(lay.horizontal_indices) == 36
    assert lay.horizontal().is_uniform_ring()
    assert not lay.is_uniform_ring()


def test_single_event_array_gains_follow_decoder():
    ev = [_event(0.0)]
    arr = render_scene_to_array(ev, None, RING)
    g = event_gains(ev, RING)[0]
    np.testing.assert_allclose(g, [dirichlet_gain(17, 36, a) for a in RING.azimuths], atol=1e-12)
    omni = render_events_omni(ev, FS).channel()
    assert np.allclose(arr.samples.sum(axis=0), omni, rtol=0, atol=1e-12)
    k = int(np.argmax(np.abs(omni)))
    np.testing.assert_allclose(arr.samples[:, k] / omni[k], g, atol=1e-9)


def test_elevated_event_reaches_ring_only():
    lay = ArrayLayout.rtsofe()
    g = event_gains([_event(30.0, el_deg=40.0)], lay)[0]
    assert not np.any(g[36:])
    assert g.sum() == pytest.approx(1.0)


def test_tail_only_render_returns_tail():
    spec = LateTailSpec((1.0,) * 7, 0.0, 0.2, tuple((1.0, 0.0, 0.0) for _ in range(36)))
    tail = generate_late_tail(spec)
    out = render_scene_to_array([], tail, RING)
    assert np.array_equal(out.samples, tail.samples)


def test_front_hrir_is_symmetric():
    h = spherical_head_hrir(0.0)
    assert np.array_equal(h[0], h[1])


@pytest.mark.parametrize("az", [15.0, 60.0, 90.0, 135.0])
def test_mirrored_directions_swap_ears(az):
    a = spherical_head_hrir(az)
    b = spherical_head_hrir(-az)
    np.testing.assert_allclose(a[::-1], b, atol=1e-12)


def test_woodworth_delay_matches_oracle():
    c = 343.0
    for deg in (0.0, 30.0, 90.0):
        th = math.radians(deg)
        # left ear angle 90 - az, right ear angle 90 + az
        diff = woodworth_delay(math.pi / 2 + th, c=c) - woodworth_delay(math.pi / 2 - th, c=c)
        assert diff == pytest.approx(woodworth_itd(0.0875, th, c), abs=1e-12)
    assert woodworth_itd(0.0875, math.pi / 2, c) * 1e3 == pytest.approx(0.656, abs=1e-3)


def test_lateral_hrir_left_leads():
    m = binaural_metrics(spherical_head_hrir(90.0), FS)
    # the head-shadow shelf adds group delay at low frequency on top of the path difference
    assert 0.6e-3 <= m.itd <= 0.85e-3
    assert m.ild > 5.0


def test_array_to_binaural_single_delta():
    lay = ArrayLayout.ring(4)
    hr = HrirSet.for_layout(lay)
    x = np.zeros((4, 100))
    x[1, 0] = 1.0
    out = array_to_binaural(ImpulseResponse(FS, x), lay, hr)
    np.testing.assert_allclose(out.samples[:, :hr.irs.shape[2]], hr.get(90.0), atol=1e-12)


def test_array_to_binaural_linearity():
    lay = ArrayLayout.ring(4)
    hr = HrirSet.for_layout(lay)
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, 4, 300))
    bx = array_to_binaural(ImpulseResponse(FS, x), lay, hr).samples
    by = array_to_binaural(ImpulseResponse(FS, y), lay, hr).samples
    bz = array_to_binaural(ImpulseResponse(FS, 2 * x - 3 * y), lay, hr).samples
    np.testing.assert_allclose(bz, 2 * bx - 3 * by, atol=1e-10)


def test_missing_direction():
    lay = ArrayLayout.ring(4)
    hr = HrirSet.for_layout(ArrayLayout.ring(3))
    with pytest.raises(MissingDirection):
        array_to_binaural(ImpulseResponse(FS, np.ones((4, 10))), lay, hr)


def test_front_direct_sound_has_zero_ild():
    arr = render_scene_to_array([_event(0.0)], None, RING)
    m = binaural_metrics(array_to_binaural(arr, RING, HrirSet.for_layout(RING)))
    assert m.ild == pytest.approx(0.0, abs=1e-9)
    assert m.itd == 0.0


def _noise(n=FS // 2, seed=0):
    return np.random.default_rng(seed).standard_normal(n)


def test_pure_delay():
    x = _noise()
    s = np.stack([x, np.concatenate([np.zeros(22), x[:-22]])])
    m = binaural_metrics(s, FS)
    assert m.itd * 1e3 == pytest.approx(0.499, abs=1e-3)
    assert m.iacc == pytest.approx(1.0, abs=1e-3)


def test_pure_gain():
    x = _noise()
    m = binaural_metrics(np.stack([x, 0.5 * x]), FS)
    assert m.ild == pytest.approx(6.0206, abs=1e-4)
    assert m.itd == 0.0
    assert m.iacc == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_independent_noise_low_coherence(seed):
    m = binaural_metrics(np.stack([_noise(seed=2 * seed), _noise(seed=2 * seed + 1)]), FS)
    assert m.iacc < 0.2
    assert "LowCoherence" in m.flags
    assert abs(m.itd) <= 1e-3


@settings(max_examples=20, deadline=None)
@given(st.integers(-40, 40), st.floats(0.1, 10.0), st.integers(0, 1000))
def test_channel_swap_antisymmetry(lag, gain, seed):
    x = _noise(4000, seed)
    y = gain * np.roll(x, lag) + 0.3 * _noise(4000, seed + 1)
    a = binaural_metrics(np.stack([x, y]), FS)
    b = binaural_metrics(np.stack([y, x]), FS)
    assert b.itd == -a.itd
    assert b.ild == pytest.approx(-a.ild, abs=1e-9)
    assert b.iacc == pytest.approx(a.iacc, abs=1e-12)


def test_silent_channel():
    with pytest.raises(SilentChannel):
        binaural_metrics(np.stack([_noise(), np.zeros(FS // 2)]), FS)


def test_hrir_set_round_trip(tmp_path):
    hr = HrirSet.for_layout(ArrayLayout.ring(6))
    hr.save(tmp_path)
    again = HrirSet.load(tmp_path)
    assert again.directions == hr.directions
    np.testing.assert_allclose(again.irs, hr.irs, atol=1e-7)
    assert (tmp_path / "manifest.csv").read_text().startswith("azimuth_deg,elevation_deg,filename")
