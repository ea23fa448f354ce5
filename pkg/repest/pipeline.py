"""
End-to-end repetition estimation
flow -> motion maps -> dense CWT per channel -> power fusion -> segmentation
-> median-pooled frequency -> smoothing -> count integration
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    CHANNEL_NAMES,
    ConfigError,
    CountResult,
    DimensionError,
    FlowField,
    Image,
    MotionMaps,
    PowerMap,
    ScaleMap,
    SegMask,
    ValidationError,
    WaveletConfig,
    stack_channel,
    validate_config,
)
from .diffgeo import motion_maps
from .flow import HSParams, estimate_flow_sequence, validate_hs_params
from .settings import get_thread_count
from .wavelet import (
    MIN_ADMISSIBLE,
    DensePowerResult,
    admissible_scales,
    cwt,
    dense_cwt,
    ridge_frequency,
    scale_to_wavelength,
)

logger = logging.getLogger(__name__)

TARGET_MAX_SIDE = 64
# A frame whose fused power peak is at most this fraction of the clip peak has no motion
STATIC_POWER_RATIO = 1e-12


@dataclass
class PipelineConfig:
    sigma: float = 4.0
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    stride: Optional[int] = None  # None: auto_stride
    median_window: int = 9
    mask_floor: float = 0.01
    hs: HSParams = field(default_factory=HSParams)
    fill_unresolved: bool = True
    channels: Tuple[str, ...] = CHANNEL_NAMES  # motion maps whose power is fused


def validate_pipeline_config(cfg: PipelineConfig) -> PipelineConfig:
    if not (math.isfinite(cfg.sigma) and cfg.sigma > 0):
        raise ConfigError("sigma must be positive")
    if cfg.stride is not None and (int(cfg.stride) != cfg.stride or cfg.stride < 1):
        raise ConfigError("stride must be an integer >= 1")
    if int(cfg.median_window) != cfg.median_window or cfg.median_window < 1 or cfg.median_window % 2 == 0:
        raise ConfigError("median_window must be an odd integer >= 1")
    if not 0.0 <= cfg.mask_floor < 1.0:
        raise ConfigError("mask_floor must lie in [0, 1)")
    if not cfg.channels or len(set(cfg.channels)) != len(cfg.channels) \
            or any(name not in CHANNEL_NAMES for name in cfg.channels):
        raise ConfigError(f"channels must be a non-empty subset of {', '.join(CHANNEL_NAMES)}")
    validate_config(cfg.wavelet)
    validate_hs_params(cfg.hs)
    return cfg


def selected_channels(cfg: PipelineConfig) -> Tuple[str, ...]:
    """Configured channels in canonical order"""
    return tuple(name for name in CHANNEL_NAMES if name in cfg.channels)


# ----------------------------
# Spatial downsampling
# ----------------------------

def auto_stride(height: int, width: int) -> int:
    """Smallest stride bringing the larger side to at most 64 px"""
    return max(1, math.ceil(max(height, width) / TARGET_MAX_SIDE))


def downsample_flow(F: FlowField, stride: int) -> FlowField:
    """Block mean over stride x stride cells; displacements are divided by stride"""
    if stride == 1:
        return F
    h, w = F.shape
    hs, ws = h // stride, w // stride
    if hs < 1 or ws < 1:
        raise DimensionError(f"stride {stride} exceeds flow size {h}x{w}")

    def block_mean(grid):
        cropped = np.asarray(grid, dtype=np.float64)[:hs * stride, :ws * stride]
        return cropped.reshape(hs, stride, ws, stride).mean(axis=(1, 3)) / stride

    return FlowField(block_mean(F.u), block_mean(F.v))


# ----------------------------
# Power fusion
# ----------------------------

@dataclass(frozen=True, eq=False)
class FusedPower:
    """
    Summed power over channels with the scale of the strongest channel.
    Arrays are (T, H, W); channel holds the index of the strongest channel.
    """
    power: np.ndarray
    scale_index: np.ndarray
    channel: np.ndarray
    scales: np.ndarray
    coi: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.power.shape[0]

    def power_map(self, t: int) -> PowerMap:
        return PowerMap(self.power[t])

    def scale_map(self, t: int) -> ScaleMap:
        return ScaleMap(self.scale_index[t], self.scales)


def combine_power(per_channel: Sequence[DensePowerResult]) -> FusedPower:
    """
    Fuse per-channel dense CWT results.

    Power is summed without normalization. The fused scale is taken from the channel
    with maximum power at each (t, x); ties go to the lowest channel index.
    """
    if not per_channel:
        raise DimensionError("no channel results to combine")
    first = per_channel[0]
    for i, result in enumerate(per_channel[1:], start=1):
        if result.power.shape != first.power.shape:
            raise DimensionError(
                f"channel {i} has shape {result.power.shape}, expected {first.power.shape}"
            )
        if result.scales.shape != first.scales.shape or not np.array_equal(result.scales, first.scales):
            raise DimensionError(f"channel {i} uses a different scale grid")

    fused = np.zeros(first.power.shape, dtype=np.float64)
    for result in per_channel:
        fused += result.power

    powers = np.stack([r.power for r in per_channel])
    channel = np.argmax(powers, axis=0)
    indices = np.stack([r.scale_index for r in per_channel])
    scale_index = np.take_along_axis(indices, channel[None], axis=0)[0]
    return FusedPower(
        power=fused,
        scale_index=scale_index.astype(np.int16),
        channel=channel.astype(np.int8),
        scales=first.scales,
        coi=first.coi,
    )


# ----------------------------
# Segmentation
# ----------------------------

def segment(power, floor: float = 0.01, previous: Optional[SegMask] = None) -> SegMask:
    """
    Foreground = power strictly above the frame mean.

    A mask with no foreground, or a foreground fraction below floor, is replaced by
    the previous frame's mask (all-true when there is none).
    """
    data = np.asarray(power.data if isinstance(power, PowerMap) else power, dtype=np.float64)
    mask = data > data.mean()
    if not mask.any() or mask.mean() < floor:
        if previous is not None:
            return previous
        return SegMask(np.ones(data.shape, dtype=bool))
    return SegMask(mask)


def segment_sequence(power_maps, floor: float = 0.01) -> List[SegMask]:
    masks: List[SegMask] = []
    previous = None
    for power in power_maps:
        previous = segment(power, floor, previous)
        masks.append(previous)
    return masks


# ----------------------------
# Frequency extraction
# ----------------------------

def pool_frequency(scale: ScaleMap, mask: SegMask, cfg: WaveletConfig = WaveletConfig()) -> float:
    """Median scale under the mask, as a frequency in Hz"""
    if scale.shape != mask.shape:
        raise DimensionError(f"scale map {scale.shape} and mask {mask.shape} differ in shape")
    selected = scale.values[mask.data]
    if selected.size == 0:
        raise ValidationError("mask has no foreground pixels")
    return cfg.fps / scale_to_wavelength(float(np.median(selected)), cfg.omega0)


def pool_trace(fused: FusedPower, masks: Sequence[SegMask],
               cfg: WaveletConfig = WaveletConfig()) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pooled frequency per frame plus a resolved flag.

    A frame is resolved when at least MIN_ADMISSIBLE scales are admissible and its
    pooled frequency lies strictly between those of the largest admissible scale and
    of s0. Frames whose power peak is negligible next to the clip's report 0 Hz and
    count as resolved.
    """
    if len(masks) != fused.n_frames:
        raise DimensionError(f"{len(masks)} masks for {fused.n_frames} frames")
    scales = np.asarray(fused.scales, dtype=np.float64)
    n_admissible = admissible_scales(scales, fused.coi).sum(axis=0)
    f_s0 = cfg.fps / scale_to_wavelength(float(scales[0]), cfg.omega0)
    floor = STATIC_POWER_RATIO * float(fused.power.max(initial=0.0))

    trace = np.zeros(fused.n_frames, dtype=np.float64)
    resolved = np.zeros(fused.n_frames, dtype=bool)
    for t, mask in enumerate(masks):
        n_adm = int(n_admissible[t])
        if n_adm < MIN_ADMISSIBLE:
            continue
        if fused.power[t].max() <= floor:
            resolved[t] = True
            continue
        trace[t] = pool_frequency(fused.scale_map(t), mask, cfg)
        f_top = cfg.fps / scale_to_wavelength(float(scales[n_adm - 1]), cfg.omega0)
        resolved[t] = f_top < trace[t] < f_s0
    return trace, resolved


def fill_unresolved(trace, resolved) -> np.ndarray:
    """Replace unresolved entries with the nearest resolved value (ties: earlier frame)"""
    trace = np.asarray(trace, dtype=np.float64)
    resolved = np.asarray(resolved, dtype=bool)
    if trace.shape != resolved.shape:
        raise DimensionError("trace and resolved flags differ in length")
    good = np.flatnonzero(resolved)
    if good.size == 0:
        logger.warning("[WARN] No frame escapes the cone of influence; keeping the raw trace")
        return trace.copy()
    if good.size == trace.size:
        return trace.copy()

    t = np.arange(trace.size)
    right = np.clip(np.searchsorted(good, t), 0, good.size - 1)
    left = np.clip(right - 1, 0, good.size - 1)
    take_left = np.abs(t - good[left]) <= np.abs(good[right] - t)
    nearest = np.where(take_left, good[left], good[right])
    return np.where(resolved, trace, trace[nearest])


def smooth_trace(freq_trace, window: int = 9) -> np.ndarray:
    """Sliding median with the window clamped at both ends"""
    trace = np.asarray(freq_trace, dtype=np.float64)
    if trace.ndim != 1 or trace.size == 0:
        raise ValidationError("frequency trace must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(trace)):
        raise ValidationError("frequency trace contains non-finite values")
    if window < 1 or window % 2 == 0:
        raise ConfigError("median_window must be an odd integer >= 1")
    # NaN padding drops out of nanmedian, which shortens the window at the ends
    padded = np.pad(trace, window // 2, mode="constant", constant_values=np.nan)
    return np.nanmedian(sliding_window_view(padded, window), axis=1)


def integrate_count(freq_trace, fps: float, masks: Optional[Sequence[SegMask]] = None) -> CountResult:
    """Cycles per frame summed over the clip; the count is not rounded"""
    trace = np.asarray(freq_trace, dtype=np.float64)
    if not fps > 0:
        raise ValidationError("fps must be positive")
    if np.any(trace < 0):
        raise ValidationError("frequencies must be nonnegative")
    increments = trace / fps
    return CountResult(
        freq_trace=trace,
        increments=increments,
        count=float(increments.sum()),
        masks=tuple(masks) if masks is not None else None,
    )


# ----------------------------
# Per-channel diagnostics
# ----------------------------

def pooled_channel_signals(maps: Sequence[MotionMaps], masks: Sequence[SegMask],
                           channels: Sequence[str] = CHANNEL_NAMES) -> np.ndarray:
    """
    Median of each motion map under the frame's mask, shape (T, 6) in canonical
    channel order. Channels not listed stay zero.
    """
    if len(maps) != len(masks):
        raise DimensionError(f"{len(masks)} masks for {len(maps)} motion maps")
    signals = np.zeros((len(maps), len(CHANNEL_NAMES)), dtype=np.float64)
    columns = [(CHANNEL_NAMES.index(name), name) for name in channels]
    for t, (m, mask) in enumerate(zip(maps, masks)):
        for c, name in columns:
            signals[t, c] = np.median(getattr(m, name)[mask.data])
    return signals


def channel_power_trace(signals: np.ndarray, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Per-frame wavelet power of each pooled channel signal, maximized over admissible scales"""
    signals = np.asarray(signals, dtype=np.float64)
    power = np.zeros_like(signals)
    for c in range(signals.shape[1]):
        if not np.any(signals[:, c]):
            continue
        sc = cwt(signals[:, c], cfg)
        power[:, c] = np.where(admissible_scales(sc.scales, sc.coi), sc.power, 0.0).max(axis=0)
    return power


# ----------------------------
# Orchestration
# ----------------------------

def count_signal(h, cfg: PipelineConfig = PipelineConfig()) -> CountResult:
    """Count repetitions in a 1-D motion signal sampled at cfg.wavelet.fps"""
    validate_pipeline_config(cfg)
    ridge = ridge_frequency(cwt(h, cfg.wavelet), cfg.wavelet)
    trace = fill_unresolved(ridge.frequency, ridge.resolved) if cfg.fill_unresolved else ridge.frequency
    trace = smooth_trace(trace, cfg.median_window)
    return integrate_count(trace, cfg.wavelet.fps)


@dataclass(frozen=True, eq=False)
class VideoAnalysis:
    """Intermediate products of one pipeline run"""
    flows: Tuple[FlowField, ...]
    stride: int
    fused: FusedPower
    channel_signals: np.ndarray  # (T, 6) mask-median of each motion map
    channel_power: np.ndarray  # (T, 6) wavelet power of those signals
    masks: Tuple[SegMask, ...]
    raw_trace: np.ndarray
    resolved: np.ndarray
    result: CountResult

    @property
    def dominant_channel(self) -> List[str]:
        """Channel with the most pooled-signal power per frame (div where no scale is admissible)"""
        return [CHANNEL_NAMES[i] for i in np.argmax(self.channel_power, axis=1)]


def _check_flows(flows: Sequence[FlowField]):
    if not flows:
        raise DimensionError("no flow fields given")
    shape = flows[0].shape
    for i, F in enumerate(flows):
        if F.shape != shape:
            raise DimensionError(f"flow {i} has size {F.shape}, expected {shape}")


def analyze_video(frames: Optional[Sequence[Image]] = None,
                  flows: Optional[Sequence[FlowField]] = None,
                  cfg: PipelineConfig = PipelineConfig(),
                  show_progress: bool = False) -> VideoAnalysis:
    """
    Run the full pipeline on frames (flow is estimated first) or on precomputed flow

    Args:
        frames: N frames of equal size
        flows: N-1 flow fields of equal size, instead of frames
        cfg: Pipeline configuration; cfg.wavelet.fps is the clip frame rate
        show_progress: Progress bar during flow estimation

    Returns:
        VideoAnalysis whose result holds the count over N-1 steps
    """
    if (frames is None) == (flows is None):
        raise ValueError("give exactly one of frames or flows")
    validate_pipeline_config(cfg)

    if frames is not None:
        flows = estimate_flow_sequence(frames, cfg.hs, show_progress=show_progress)
    flows = list(flows)
    _check_flows(flows)

    height, width = flows[0].shape
    stride = cfg.stride if cfg.stride is not None else auto_stride(height, width)
    flows = [downsample_flow(F, stride) for F in flows]
    logger.info(f"[INFO] {len(flows)} flow fields at {flows[0].height}x{flows[0].width} (stride {stride})")

    maps = [motion_maps(F, cfg.sigma) for F in flows]
    channels = selected_channels(cfg)
    workers = min(len(channels), get_thread_count())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_channel = list(pool.map(
            lambda name: dense_cwt(stack_channel(maps, name), cfg.wavelet), channels
        ))

    fused = combine_power(per_channel)
    if channels != CHANNEL_NAMES:
        canonical = np.array([CHANNEL_NAMES.index(name) for name in channels], dtype=np.int8)
        fused = replace(fused, channel=canonical[fused.channel])
    masks = segment_sequence(fused.power, cfg.mask_floor)
    raw_trace, resolved = pool_trace(fused, masks, cfg.wavelet)
    trace = fill_unresolved(raw_trace, resolved) if cfg.fill_unresolved else raw_trace
    trace = smooth_trace(trace, cfg.median_window)
    result = integrate_count(trace, cfg.wavelet.fps, masks)
    logger.info(f"[OK] Counted {result.count:.2f} repetitions over {len(flows)} steps "
                f"({', '.join(channels)})")

    channel_signals = pooled_channel_signals(maps, masks, channels)
    return VideoAnalysis(
        flows=tuple(flows),
        stride=stride,
        fused=fused,
        channel_signals=channel_signals,
        channel_power=channel_power_trace(channel_signals, cfg.wavelet),
        masks=tuple(masks),
        raw_trace=raw_trace,
        resolved=resolved,
        result=result,
    )


def count_video(frames: Optional[Sequence[Image]] = None,
                flows: Optional[Sequence[FlowField]] = None,
                cfg: PipelineConfig = PipelineConfig(),
                show_progress: bool = False) -> CountResult:
    return analyze_video(frames=frames, flows=flows, cfg=cfg, show_progress=show_progress).result
