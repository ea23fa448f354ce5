"""
Ground-truth generators
Idealized 1-D motion signals, analytic flow sequences for the basic motion cases,
a side-to-front viewpoint transition and a rendered bouncing-square video
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import CycleAnnotation, FlowField, Image, SynthError

logger = logging.getLogger(__name__)

MIN_FRAMES = 8

SYNTH_KINDS = (
    "sinusoid",
    "exp_chirp",
    "midpoint_accel",
    "taxonomy_case",
    "viewpoint_transition",
    "bouncing_square_video",
)

SIGNAL_KINDS = ("sinusoid", "exp_chirp", "midpoint_accel")

# Three motion types x three continuities x two viewpoints; ids not listed are
# viewpoint or texture mixtures of these and are not generated directly
TAXONOMY_CASES: Dict[int, str] = {
    1: "constant translation, side view (travelling texture modulation)",
    2: "intermittent translation, side view",
    3: "oscillating translation, side view",
    6: "oscillating translation, front view (looming)",
    12: "oscillating rotation, front view",
    15: "oscillating expansion, side view (1-D dilation)",
    18: "oscillating expansion, front view",
}


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "sinusoid"
    fps: float = 30.0
    duration: float = 10.0           # s
    base_freq: float = 1.0           # Hz
    amplitude: float = 1.0           # signal units, or px for flow and video
    width: int = 64
    height: int = 64
    seed: int = 0
    chirp_rate: float = 0.1          # 1/s, exponential chirp rate
    case_id: int = 3
    duty: float = 0.4                # intermittent motion fraction of each cycle
    midpoint_accel: bool = False     # drop every second frame after the midpoint
    square_size: Optional[int] = None  # px, default min(width, height) // 4

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))


def validate_synth_spec(spec: SynthSpec) -> SynthSpec:
    if spec.kind not in SYNTH_KINDS:
        raise SynthError(f"unknown kind {spec.kind!r}; valid kinds: {', '.join(SYNTH_KINDS)}")
    if not (spec.fps > 0 and spec.duration > 0):
        raise SynthError("fps and duration must be positive")
    if spec.n_frames < MIN_FRAMES:
        raise SynthError(f"clip of {spec.n_frames} frames is shorter than {MIN_FRAMES}")
    if not spec.base_freq > 0:
        raise SynthError("base_freq must be positive")
    nyquist = spec.fps / 2.0
    top_freq = spec.base_freq
    if spec.kind == "exp_chirp":
        top_freq = spec.base_freq * math.exp(max(spec.chirp_rate, 0.0) * _source_end(spec))
    if _accelerated(spec):
        top_freq *= 2.0
    if not top_freq < nyquist:
        raise SynthError(f"frequency {top_freq:.3g} Hz violates the Nyquist limit {nyquist:g} Hz")
    if spec.width < 8 or spec.height < 8:
        raise SynthError("dimensions must be at least 8x8")
    if not 0.0 < spec.duty <= 1.0:
        raise SynthError("duty must lie in (0, 1]")
    return spec


def _accelerated(spec: SynthSpec) -> bool:
    return spec.kind == "midpoint_accel" or spec.midpoint_accel


def source_times(spec: SynthSpec, n: Optional[int] = None) -> np.ndarray:
    """
    Source time (s) shown by output frames 0..n-1.

    With midpoint acceleration every second source frame is dropped after
    output frame N//2, so the second half plays at double speed.
    """
    n = spec.n_frames if n is None else n
    i = np.arange(n, dtype=np.float64)
    if not _accelerated(spec):
        return i / spec.fps
    half = spec.n_frames // 2
    return np.where(i < half, i, half + 2.0 * (i - half)) / spec.fps


def _source_end(spec: SynthSpec) -> float:
    """Source time at the end of the clip (one frame past the last output frame)"""
    return float(source_times(spec, spec.n_frames + 1)[-1])


def _chirp_phase(spec: SynthSpec, tau: np.ndarray) -> np.ndarray:
    """Phase in cycles"""
    k = spec.chirp_rate
    if abs(k) < 1e-12:
        return spec.base_freq * tau
    return spec.base_freq * np.expm1(k * tau) / k


def _signal_phase(spec: SynthSpec, tau: np.ndarray) -> np.ndarray:
    if spec.kind == "exp_chirp":
        return _chirp_phase(spec, tau)
    return spec.base_freq * tau


# ----------------------------
# 1-D signals
# ----------------------------

def gen_signal(spec: SynthSpec) -> Tuple[np.ndarray, float]:
    """
    Idealized motion signal and its true count

    Returns:
        (samples, true_count); the count is the phase, in cycles, accumulated over the clip
    """
    validate_synth_spec(spec)
    if spec.kind not in SIGNAL_KINDS:
        raise SynthError(f"{spec.kind!r} is not a signal kind; use one of {', '.join(SIGNAL_KINDS)}")
    tau = source_times(spec)
    cycles = _signal_phase(spec, tau)
    h = spec.amplitude * np.sin(2.0 * np.pi * cycles)
    true_count = float(_signal_phase(spec, np.array([_source_end(spec)]))[0])
    return h, true_count


def zero_crossing_cycles(h) -> float:
    """Independent cycle estimate: sign changes of the nonzero samples, halved"""
    x = np.asarray(h, dtype=np.float64)
    signs = np.sign(x[x != 0.0])
    return float(np.count_nonzero(np.diff(signs))) / 2.0


def chirp_annotation(spec: SynthSpec, video_id: str = "chirp") -> CycleAnnotation:
    """Cycle boundaries at the frames where the generated phase passes each whole cycle"""
    validate_synth_spec(spec)
    cycles = _signal_phase(spec, source_times(spec))
    whole = int(math.floor(cycles[-1]))
    bounds = [int(np.searchsorted(cycles, m, side="left")) for m in range(whole + 1)]
    return CycleAnnotation(
        video_id=video_id,
        fps=spec.fps,
        count=max(0, len(bounds) - 1),
        cycle_bounds=tuple(bounds),
        n_frames=spec.n_frames,
    )


# ----------------------------
# Flow fields
# ----------------------------

def _grid(spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates relative to the frame center"""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    return xs - (spec.width - 1) / 2.0, ys - (spec.height - 1) / 2.0


def _reference_radius(spec: SynthSpec) -> float:
    return min(spec.width, spec.height) / 4.0


def _window(spec: SynthSpec, fraction: float = 0.2) -> np.ndarray:
    dx, dy = _grid(spec)
    radius = fraction * min(spec.width, spec.height)
    return np.exp(-(dx ** 2 + dy ** 2) / (2.0 * radius ** 2))


def _intermittent_position(spec: SynthSpec, tau: np.ndarray) -> np.ndarray:
    """Cumulative displacement (cycles) of a half-sine velocity pulse active for `duty` of each cycle"""
    cycles = spec.base_freq * tau
    whole = np.floor(cycles)
    frac = cycles - whole
    moving = frac < spec.duty
    partial = np.where(moving, 0.5 * (1.0 - np.cos(np.pi * frac / spec.duty)), 1.0)
    return whole + partial


def gen_flow_sequence(spec: SynthSpec) -> Tuple[List[FlowField], float]:
    """
    Analytic flow for one of the generated motion cases

    Each field is the exact displacement between consecutive output frames, so
    N frames' worth of steps give N fields.

    Returns:
        (flows, true_count)
    """
    validate_synth_spec(spec)
    case = spec.case_id
    if case not in TAXONOMY_CASES:
        raise SynthError(f"unsupported case id {case}; generated ids: {sorted(TAXONOMY_CASES)}")

    tau = source_times(spec, spec.n_frames + 1)
    dx, dy = _grid(spec)
    zeros = np.zeros_like(dx)
    f = spec.base_freq
    A = spec.amplitude
    oscillation = np.sin(2.0 * np.pi * f * tau)
    steps = np.diff(oscillation)
    rate = A / _reference_radius(spec)

    flows: List[FlowField] = []
    if case == 1:
        wavelength = spec.width / 2.0
        mids = 0.5 * (tau[:-1] + tau[1:])
        for dt, t in zip(np.diff(tau), mids):
            modulation = 1.0 + 0.5 * np.sin(2.0 * np.pi * ((dx + (spec.width - 1) / 2.0) / wavelength - f * t))
            flows.append(FlowField(A * dt * spec.fps * modulation, zeros))
    elif case == 2:
        pulses = np.diff(_intermittent_position(spec, tau))
        flows = [FlowField(zeros, np.full_like(dx, A * p)) for p in pulses]
    elif case == 3:
        flows = [FlowField(zeros, np.full_like(dx, A * s)) for s in steps]
    elif case == 6:
        flows = [FlowField(rate * s * dx, rate * s * dy) for s in steps]
    elif case == 12:
        flows = [FlowField(-rate * s * dy, rate * s * dx) for s in steps]
    elif case == 15:
        flows = [FlowField(zeros, rate * s * dy) for s in steps]
    elif case == 18:
        g = _window(spec)
        flows = [FlowField(rate * s * dx * g, rate * s * dy * g) for s in steps]

    true_count = f * float(tau[-1])
    logger.debug(f"[OK] Generated {len(flows)} fields for case {case}: {TAXONOMY_CASES[case]}")
    return flows, true_count


def transition_weight(spec: SynthSpec) -> np.ndarray:
    """Per-step blend from side view (0) to front view (1), smooth over 40-60% of the clip"""
    n = spec.n_frames
    u = (np.arange(n, dtype=np.float64) + 0.5) / n
    x = np.clip((u - 0.4) / 0.2, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def gen_viewpoint_transition(spec: SynthSpec) -> Tuple[List[FlowField], float]:
    """
    Oscillating object seen first from the side (vertical translation) and then
    from the front (expansion), with the oscillation frequency held constant

    Returns:
        (flows, true_freq in Hz)
    """
    validate_synth_spec(spec)
    tau = source_times(spec, spec.n_frames + 1)
    dx, dy = _grid(spec)
    g = _window(spec)
    # frame-wide window: the frontal expansion has non-negative divergence everywhere
    wide = _window(spec, fraction=1.0)
    steps = np.diff(np.sin(2.0 * np.pi * spec.base_freq * tau))
    rate = spec.amplitude / _reference_radius(spec)
    flows = []
    for w, s in zip(transition_weight(spec), steps):
        side_v = spec.amplitude * s * g
        front = rate * s * wide
        flows.append(FlowField(w * front * dx, (1.0 - w) * side_v + w * front * dy))
    return flows, spec.base_freq


# ----------------------------
# Rendered video
# ----------------------------

def _square_geometry(spec: SynthSpec) -> Tuple[int, float]:
    side = spec.square_size or min(spec.width, spec.height) // 4
    if side < 1 or side > spec.width or side + spec.amplitude > spec.height - 2:
        raise SynthError(
            f"square of {side} px with {spec.amplitude:g} px bounce does not fit a "
            f"{spec.width}x{spec.height} frame"
        )
    rest_top = (spec.height - side - spec.amplitude) / 2.0
    return side, rest_top


def _background(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    noise = gaussian_filter(rng.random((spec.height, spec.width)), sigma=2.0, mode="wrap")
    span = noise.max() - noise.min()
    noise = (noise - noise.min()) / span if span > 0 else np.zeros_like(noise)
    return 0.1 + 0.2 * noise


def render_square_frame(spec: SynthSpec, top: float, background: Optional[np.ndarray] = None) -> Image:
    """One frame with the bright square's top edge at row `top` (sub-pixel, vertically anti-aliased)"""
    side, _ = _square_geometry(spec)
    frame = _background(spec) if background is None else background.copy()
    rows = np.arange(spec.height, dtype=np.float64)
    coverage = np.clip(np.minimum(rows + 1.0, top + side) - np.maximum(rows, top), 0.0, 1.0)
    left = (spec.width - side) // 2
    cols = slice(left, left + side)
    frame[:, cols] = frame[:, cols] * (1.0 - coverage[:, None]) + 0.9 * coverage[:, None]
    return Image(np.clip(frame, 0.0, 1.0).astype(np.float32))


def gen_bouncing_square_video(spec: SynthSpec) -> Tuple[List[Image], float]:
    """
    Bright square bouncing vertically: top(t) = y0 + A*|sin(pi*f*t)|

    Returns:
        (frames, true_count = f * duration)
    """
    validate_synth_spec(spec)
    _, rest_top = _square_geometry(spec)
    background = _background(spec)
    f = spec.base_freq
    if _accelerated(spec):
        cycles = f * source_times(spec)
        frac = cycles - np.floor(cycles)
    else:
        # n*f is exact for common rates, so the rendering repeats exactly every period
        n = np.arange(spec.n_frames, dtype=np.float64)
        frac = np.mod(n * f, spec.fps) / spec.fps
    tops = rest_top + spec.amplitude * np.abs(np.sin(np.pi * frac))
    frames = [render_square_frame(spec, float(top), background) for top in tops]
    true_count = f * _source_end(spec)
    logger.info(f"[OK] Rendered {len(frames)} frames, true count {true_count:g}")
    return frames, true_count
