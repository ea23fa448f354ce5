import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from repest.core import ConfigError, DimensionError, Image
from repest.flow import HSParams, estimate_flow, estimate_flow_sequence, validate_hs_params
from repest.synth import SynthSpec, render_square_frame

INNER = (slice(10, -10), slice(10, -10))


def blob_pattern(seed=0, size=64):
    rng = np.random.default_rng(seed)
    noise = gaussian_filter(rng.random((size, size)), sigma=3.0, mode="wrap")
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return 0.1 + 0.8 * noise


def shifted(pattern, dy=0, dx=0):
    return np.roll(pattern, (dy, dx), axis=(0, 1))


def test_default_params_are_valid():
    p = HSParams()
    assert (p.alpha, p.iterations, p.pyramid_levels, p.pyramid_scale) == (15.0, 200, 3, 0.5)
    assert validate_hs_params(p) is p


@pytest.mark.parametrize("kwargs", [
    {"alpha": 0.0},
    {"iterations": 0},
    {"pyramid_levels": 0},
    {"pyramid_scale": 1.0},
    {"pyramid_scale": 0.0},
])
def test_invalid_params(kwargs):
    with pytest.raises(ConfigError):
        validate_hs_params(HSParams(**kwargs))


def test_shift_right_by_two_pixels():
    prev = blob_pattern()
    F = estimate_flow(Image(prev), Image(shifted(prev, dx=2)))
    assert F.shape == prev.shape
    assert 1.6 <= F.u[INNER].mean() <= 2.4
    assert abs(F.v[INNER].mean()) <= 0.3


def test_identical_frames_give_zero_flow():
    img = Image(blob_pattern(seed=3))
    F = estimate_flow(img, img)
    assert np.abs(F.u).max() <= 1e-4
    assert np.abs(F.v).max() <= 1e-4


def test_constant_images_give_zero_flow():
    F = estimate_flow(Image(np.full((16, 16), 0.3)), Image(np.full((16, 16), 0.7)))
    assert not F.u.any() and not F.v.any()


def test_square_moving_up_three_pixels():
    spec = SynthSpec(kind="bouncing_square_video", width=96, height=96, amplitude=10.0)
    top, side = 40.0, 24
    F = estimate_flow(render_square_frame(spec, top), render_square_frame(spec, top - 3.0))
    left = (96 - side) // 2
    square = (slice(int(top), int(top) + side), slice(left, left + side))
    assert -3.9 <= F.v[square].mean() <= -2.1


def test_forward_and_backward_flow_cancel():
    a = blob_pattern(seed=5)
    b = shifted(a, dy=1, dx=2)
    forward = estimate_flow(Image(a), Image(b))
    backward = estimate_flow(Image(b), Image(a))
    assert abs(np.median(forward.u[INNER] + backward.u[INNER])) <= 0.5
    assert abs(np.median(forward.v[INNER] + backward.v[INNER])) <= 0.5


def test_translation_equivariance():
    a = blob_pattern(seed=7)
    b = shifted(a, dx=2)
    base = estimate_flow(Image(a), Image(b))
    moved = estimate_flow(Image(shifted(a, 3, 5)), Image(shifted(b, 3, 5)))
    assert abs(base.u[INNER].mean() - moved.u[INNER].mean()) < 0.2
    assert abs(base.v[INNER].mean() - moved.v[INNER].mean()) < 0.2


def test_flow_is_deterministic():
    a = blob_pattern(seed=2)
    b = shifted(a, dx=1)
    F1 = estimate_flow(Image(a), Image(b))
    F2 = estimate_flow(Image(a), Image(b))
    np.testing.assert_array_equal(F1.u, F2.u)
    np.testing.assert_array_equal(F1.v, F2.v)


def test_dimension_errors():
    with pytest.raises(DimensionError):
        estimate_flow(Image(np.zeros((16, 16))), Image(np.zeros((16, 17))))
    with pytest.raises(DimensionError):
        estimate_flow(Image(np.zeros((4, 16))), Image(np.zeros((4, 16))))


def test_sequence_yields_one_field_per_pair_in_order():
    a = blob_pattern(seed=11)
    frames = [Image(a), Image(shifted(a, dx=2)), Image(shifted(a, dx=2))]
    flows = estimate_flow_sequence(frames, HSParams(iterations=100))
    assert len(flows) == 2
    assert flows[0].u[INNER].mean() > 1.0
    assert np.abs(flows[1].u).max() <= 1e-4


def test_sequence_rejects_size_drift():
    frames = [Image(np.zeros((16, 16))), Image(np.zeros((16, 18)))]
    with pytest.raises(DimensionError):
        estimate_flow_sequence(frames)
    with pytest.raises(DimensionError):
        estimate_flow_sequence(frames[:1])
