import math

import numpy as np
import pytest

from repest.core import SynthError
from repest.diffgeo import motion_maps
from repest.synth import (
    TAXONOMY_CASES,
    SynthSpec,
    chirp_annotation,
    gen_bouncing_square_video,
    gen_flow_sequence,
    gen_signal,
    gen_viewpoint_transition,
    render_square_frame,
    source_times,
    transition_weight,
    validate_synth_spec,
    zero_crossing_cycles,
)


def test_sinusoid_true_count():
    h, truth = gen_signal(SynthSpec(kind="sinusoid", base_freq=0.8, duration=12.0, fps=30.0, amplitude=2.0))
    assert h.size == 360
    assert truth == pytest.approx(9.6)
    assert np.abs(h).max() <= 2.0


def test_exp_chirp_closed_form_matches_zero_crossings():
    spec = SynthSpec(kind="exp_chirp", base_freq=0.5, chirp_rate=0.1, duration=20.0, fps=30.0)
    h, truth = gen_signal(spec)
    assert truth == pytest.approx(0.5 * math.expm1(2.0) / 0.1)
    assert abs(zero_crossing_cycles(h) - truth) <= 1.0


def test_midpoint_acceleration_count():
    spec = SynthSpec(kind="midpoint_accel", base_freq=1.0, duration=10.0, fps=30.0)
    h, truth = gen_signal(spec)
    assert h.size == 300
    assert truth == pytest.approx(15.0)
    assert abs(zero_crossing_cycles(h) - 15.0) <= 1.0


def test_source_times_with_midpoint_acceleration():
    spec = SynthSpec(kind="midpoint_accel", duration=1.0, fps=10.0)
    np.testing.assert_allclose(source_times(spec), np.array([0, 1, 2, 3, 4, 5, 7, 9, 11, 13]) * 0.1)
    np.testing.assert_allclose(source_times(SynthSpec(duration=1.0, fps=10.0)), np.arange(10) / 10.0)


def test_zero_crossing_cycles_ignores_exact_zeros():
    assert zero_crossing_cycles([1.0, 0.0, -1.0, 0.0, 1.0]) == 1.0
    assert zero_crossing_cycles(np.ones(10)) == 0.0


@pytest.mark.parametrize("spec", [
    SynthSpec(kind="warp_drive"),
    SynthSpec(fps=0.0),
    SynthSpec(duration=0.1),
    SynthSpec(base_freq=15.0, fps=30.0),
    SynthSpec(kind="midpoint_accel", base_freq=8.0, fps=30.0),
    SynthSpec(kind="exp_chirp", base_freq=2.0, chirp_rate=0.5, duration=10.0, fps=30.0),
    SynthSpec(width=4),
    SynthSpec(duty=0.0),
])
def test_invalid_specs(spec):
    with pytest.raises(SynthError):
        validate_synth_spec(spec)


def test_gen_signal_rejects_video_kinds():
    with pytest.raises(SynthError):
        gen_signal(SynthSpec(kind="taxonomy_case"))


def test_chirp_annotation_bounds():
    spec = SynthSpec(kind="exp_chirp", base_freq=0.5, chirp_rate=0.05, duration=20.0)
    a = chirp_annotation(spec, "c1")
    assert a.video_id == "c1" and a.n_frames == spec.n_frames
    assert a.count == len(a.cycle_bounds) - 1
    lengths = np.diff(a.cycle_bounds)
    assert lengths[0] > lengths[-1]


def flow_spec(case_id, **kwargs):
    base = dict(kind="taxonomy_case", case_id=case_id, base_freq=0.5, duration=4.0,
                fps=30.0, amplitude=2.0, width=48, height=48)
    base.update(kwargs)
    return SynthSpec(**base)


@pytest.mark.parametrize("case_id", sorted(TAXONOMY_CASES))
def test_every_case_yields_one_field_per_frame(case_id):
    flows, truth = gen_flow_sequence(flow_spec(case_id))
    assert len(flows) == 120
    assert all(F.shape == (48, 48) for F in flows)
    assert truth == pytest.approx(2.0)


def test_unsupported_case_id():
    with pytest.raises(SynthError, match="unsupported case id"):
        gen_flow_sequence(flow_spec(4))


def test_side_view_translation_integrates_to_the_oscillation():
    spec = flow_spec(3)
    flows, _ = gen_flow_sequence(spec)
    v = np.array([F.v[0, 0] for F in flows], dtype=np.float64)
    assert not any(F.u.any() for F in flows)
    tau = source_times(spec, spec.n_frames + 1)
    np.testing.assert_allclose(np.cumsum(v), 2.0 * np.sin(2 * np.pi * 0.5 * tau[1:]), atol=1e-5)


def test_intermittent_translation_rests_between_pulses():
    spec = flow_spec(2, duty=0.4)
    flows, _ = gen_flow_sequence(spec)
    v = np.array([F.v[0, 0] for F in flows], dtype=np.float64)
    assert np.all(v >= 0)
    assert v.sum() == pytest.approx(2.0 * 2.0, abs=1e-5)
    assert np.mean(v == 0) > 0.5


def test_rotation_case_has_pure_curl():
    flows, _ = gen_flow_sequence(flow_spec(12))
    F = max(flows, key=lambda f: float(np.abs(f.u).max()))
    m = motion_maps(F, 4.0)
    inner = (slice(12, 36), slice(12, 36))
    assert np.abs(m.curl[inner]).min() > 10 * np.abs(m.div[inner]).max()


def test_expansion_front_case_has_pure_divergence():
    flows, _ = gen_flow_sequence(flow_spec(6))
    F = max(flows, key=lambda f: float(np.abs(f.u).max()))
    m = motion_maps(F, 4.0)
    inner = (slice(12, 36), slice(12, 36))
    assert np.abs(m.div[inner]).min() > 10 * np.abs(m.curl[inner]).max()


def test_transition_weight_ramps_over_the_middle():
    spec = SynthSpec(kind="viewpoint_transition", duration=10.0, fps=30.0)
    w = transition_weight(spec)
    assert w.size == 300
    assert (w[:119] == 0).all() and (w[181:] == 1).all()
    assert np.all(np.diff(w) >= 0)


def test_viewpoint_transition_fields():
    spec = SynthSpec(kind="viewpoint_transition", base_freq=0.5, duration=10.0, amplitude=2.0)
    flows, freq = gen_viewpoint_transition(spec)
    assert freq == 0.5 and len(flows) == 300
    assert not flows[10].u.any()
    assert flows[-10].u.any()


def test_front_view_divergence_is_positive_everywhere():
    spec = SynthSpec(kind="viewpoint_transition", base_freq=0.5, duration=10.0, amplitude=2.0,
                     width=64, height=64)
    flows, _ = gen_viewpoint_transition(spec)
    F = max(flows[-60:], key=lambda f: float(f.u[32, -1]))
    m = motion_maps(F, 4.0)
    assert (m.gxfx > 0).all() and (m.gyfy > 0).all()
    assert (m.div > np.maximum(m.gxfx, m.gyfy)).all()


def test_bouncing_square_video():
    spec = SynthSpec(kind="bouncing_square_video", base_freq=0.5, duration=20.0,
                     amplitude=10.0, width=96, height=96)
    frames, truth = gen_bouncing_square_video(spec)
    assert len(frames) == 600 and truth == pytest.approx(10.0)
    assert frames[0].data.shape == (96, 96)
    np.testing.assert_array_equal(frames[0].data, frames[60].data)
    assert not np.array_equal(frames[0].data, frames[15].data)


def test_accelerated_square_video_count():
    spec = SynthSpec(kind="bouncing_square_video", base_freq=0.5, duration=20.0,
                     amplitude=10.0, width=96, height=96, midpoint_accel=True)
    frames, truth = gen_bouncing_square_video(spec)
    assert len(frames) == 600
    assert truth == pytest.approx(15.0)


def test_render_square_frame():
    spec = SynthSpec(kind="bouncing_square_video", amplitude=10.0, width=64, height=64)
    img = render_square_frame(spec, 20.0)
    side = 16
    left = (64 - side) // 2
    np.testing.assert_allclose(img.data[20:36, left:left + side], 0.9, atol=1e-6)
    outside = img.data[:, :left]
    assert outside.min() >= 0.1 - 1e-6 and outside.max() <= 0.3 + 1e-6
    half = render_square_frame(spec, 19.5).data[19, left]
    assert 0.45 < half < 0.65


def test_square_must_fit():
    with pytest.raises(SynthError):
        render_square_frame(SynthSpec(kind="bouncing_square_video", amplitude=60.0), 0.0)


def test_side_view_velocity_follows_the_position_derivative():
    spec = flow_spec(3, amplitude=3.0)
    flows, _ = gen_flow_sequence(spec)
    t_mid = (np.arange(len(flows)) + 0.5) / spec.fps
    expected = 3.0 * 2 * np.pi * 0.5 * np.cos(2 * np.pi * 0.5 * t_mid) / spec.fps
    v = np.array([F.v[5, 7] for F in flows], dtype=np.float64)
    np.testing.assert_allclose(v, expected, atol=1e-3 * np.abs(expected).max())
    assert all(np.ptp(F.v) == 0 for F in flows)


def test_rotation_curl_tracks_angular_rate():
    spec = flow_spec(12)
    flows, _ = gen_flow_sequence(spec)
    rate = spec.amplitude / (48 / 4.0)
    tau = source_times(spec, spec.n_frames + 1)
    steps = np.diff(np.sin(2 * np.pi * 0.5 * tau))
    for F, s in zip(flows, steps):
        if abs(s) < 0.1 * np.abs(steps).max():
            continue
        curl = motion_maps(F, 4.0).curl[24, 24]
        assert np.sign(curl) == np.sign(s)
        assert curl == pytest.approx(2.0 * rate * s, rel=0.05)
