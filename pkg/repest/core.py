"""
Core domain types shared by every repest module
Frames, flow fields, motion maps, wavelet power and counting results
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


class RepestError(Exception):
    """Base class for all repest errors"""
    pass


class ValidationError(RepestError, ValueError):
    """Raised when a domain type is constructed from invalid data"""
    pass


class ConfigError(RepestError, ValueError):
    """Raised when a configuration violates one of its invariants"""
    pass


class FormatError(RepestError, ValueError):
    """Raised when a byte or text format cannot be decoded"""
    pass


class ManifestError(RepestError, ValueError):
    """Raised for malformed dataset manifests"""
    pass


class ClipTooShortError(RepestError, ValueError):
    """Raised when a clip cannot host the configured scale grid"""
    pass


class DimensionError(RepestError, ValueError):
    """Raised when grids that must share a shape do not"""
    pass


class SynthError(RepestError, ValueError):
    """Raised when a synthetic generator spec is infeasible"""
    pass


CHANNEL_NAMES = ("div", "curl", "gxfx", "gyfy", "fx", "fy")


def _frozen_grid(values, name: str, dtype=np.float32, ndim: int = 2) -> np.ndarray:
    """Copy values into a read-only array, rejecting non-finite entries"""
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """Single-channel luminance frame, values in [0, 1]"""
    data: np.ndarray

    def __post_init__(self):
        data = _frozen_grid(self.data, "image data")
        if data.size == 0:
            raise ValidationError("image must have positive width and height")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValidationError("image luminance must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-frame motion field in pixels/frame; u horizontal (Fx), v vertical (Fy)"""
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _frozen_grid(self.u, "flow u")
        v = _frozen_grid(self.v, "flow v")
        if u.shape != v.shape:
            raise ValidationError(f"flow components differ in shape: {u.shape} vs {v.shape}")
        if u.size == 0:
            raise ValidationError("flow field must have positive width and height")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape

    def scaled(self, k: float) -> "FlowField":
        return FlowField(self.u * np.float32(k), self.v * np.float32(k))

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        z = np.zeros((height, width), dtype=np.float32)
        return cls(z, z)


@dataclass(frozen=True, eq=False)
class MotionMaps:
    """The six differential representations of one flow field"""
    div: np.ndarray
    curl: np.ndarray
    gxfx: np.ndarray
    gyfy: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    sigma: float

    def __post_init__(self):
        shape = None
        for name in CHANNEL_NAMES:
            grid = _frozen_grid(getattr(self, name), name)
            if shape is None:
                shape = grid.shape
            elif grid.shape != shape:
                raise ValidationError(f"motion map {name} has shape {grid.shape}, expected {shape}")
            object.__setattr__(self, name, grid)
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")

    def channels(self) -> Tuple[np.ndarray, ...]:
        """Channels in canonical order: div, curl, gxfx, gyfy, fx, fy"""
        return tuple(getattr(self, name) for name in CHANNEL_NAMES)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.div.shape


@dataclass(frozen=True)
class WaveletConfig:
    """
    Morlet CWT parameters. Scales are expressed in frames (dt = 1 frame internally);
    fps only enters when converting to seconds or Hz.
    """
    omega0: float = 6.0
    dj: float = 0.125
    s0: float = 2.0
    min_cycles: Optional[float] = 4.0
    fps: float = 30.0

    def __post_init__(self):
        for name in ("omega0", "dj", "s0", "fps"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.min_cycles is not None and not math.isfinite(self.min_cycles):
            raise ValidationError("min_cycles must be finite")

    @property
    def dt(self) -> float:
        """Seconds per frame"""
        return 1.0 / self.fps


def validate_config(cfg: WaveletConfig) -> WaveletConfig:
    """Return cfg unchanged if every invariant holds, otherwise name the first violation"""
    if not cfg.omega0 >= 5.0:
        raise ConfigError("omega0 must be >= 5")
    if not cfg.dj > 0.0:
        raise ConfigError("dj must be positive")
    if not cfg.s0 >= 2.0:
        raise ConfigError("s0 must be at least 2 frames")
    if cfg.min_cycles is not None and not cfg.min_cycles >= 1.0:
        raise ConfigError("min_cycles must be >= 1")
    if not cfg.fps > 0.0:
        raise ConfigError("fps must be positive")
    return cfg


@dataclass(frozen=True, eq=False)
class Scalogram:
    """
    Wavelet power |W_n(s)|^2 of one signal over (scale, time).
    Arrays are float64 in memory; RSCL files store them as f32.
    """
    scales: np.ndarray
    power: np.ndarray
    coi: np.ndarray
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        scales = _frozen_grid(self.scales, "scales", dtype=np.float64, ndim=1)
        power = _frozen_grid(self.power, "power", dtype=np.float64)
        coi = _frozen_grid(self.coi, "coi", dtype=np.float64, ndim=1)
        if scales.size == 0 or np.any(np.diff(scales) <= 0):
            raise ValidationError("scales must be non-empty and strictly increasing")
        if power.shape != (scales.size, coi.size):
            raise ValidationError(
                f"power shape {power.shape} does not match {scales.size} scales x {coi.size} times"
            )
        if np.any(power < 0):
            raise ValidationError("power must be nonnegative")
        times = np.arange(coi.size, dtype=np.int64)
        times.setflags(write=False)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "coi", coi)
        object.__setattr__(self, "times", times)

    @property
    def n_scales(self) -> int:
        return self.scales.size

    @property
    def n_times(self) -> int:
        return self.coi.size


@dataclass(frozen=True, eq=False)
class PowerMap:
    """Per-pixel maximum wavelet power over all scales at one timestep"""
    data: np.ndarray

    def __post_init__(self):
        data = _frozen_grid(self.data, "power map")
        if np.any(data < 0):
            raise ValidationError("power map must be nonnegative")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class ScaleMap:
    """Per-pixel argmax scale at one timestep, stored as indices into the generating grid"""
    index: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        grid = _frozen_grid(self.grid, "scale grid", dtype=np.float64, ndim=1)
        index = _frozen_grid(self.index, "scale index", dtype=np.int16)
        if index.size and (index.min() < 0 or index.max() >= grid.size):
            raise ValidationError("scale index outside the scale grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "index", index)

    @property
    def values(self) -> np.ndarray:
        return self.grid[self.index]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.index.shape


@dataclass(frozen=True, eq=False)
class SegMask:
    """Binary segmentation of repetitive motion"""
    data: np.ndarray

    def __post_init__(self):
        data = _frozen_grid(self.data, "mask", dtype=bool)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def fraction(self) -> float:
        return float(self.data.mean()) if self.data.size else 0.0


@dataclass(frozen=True, eq=False)
class CountResult:
    """Instantaneous frequency trace (Hz) integrated into a repetition count"""
    freq_trace: np.ndarray
    increments: np.ndarray
    count: float
    masks: Optional[Tuple[SegMask, ...]] = None

    def __post_init__(self):
        freq = _frozen_grid(self.freq_trace, "freq_trace", dtype=np.float64, ndim=1)
        inc = _frozen_grid(self.increments, "increments", dtype=np.float64, ndim=1)
        if freq.shape != inc.shape:
            raise ValidationError("freq_trace and increments differ in length")
        if np.any(inc < 0):
            raise ValidationError("increments must be nonnegative")
        if not math.isfinite(self.count):
            raise ValidationError("count must be finite")
        if not math.isclose(self.count, float(inc.sum()), rel_tol=1e-9, abs_tol=1e-9):
            raise ValidationError("count must equal the sum of increments")
        object.__setattr__(self, "freq_trace", freq)
        object.__setattr__(self, "increments", inc)
        if self.masks is not None:
            object.__setattr__(self, "masks", tuple(self.masks))


@dataclass(frozen=True)
class CycleAnnotation:
    """
    Ground-truth repetition count with optional cycle boundaries (frame indices).
    Annotated datasets carry whole counts; synthetic ground truth may be fractional.
    """
    video_id: str
    fps: float
    count: float
    cycle_bounds: Tuple[int, ...] = ()
    n_frames: Optional[int] = None

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.cycle_bounds)
        object.__setattr__(self, "cycle_bounds", bounds)
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ValidationError("fps must be positive")
        if self.count < 0:
            raise ValidationError("count must be nonnegative")
        if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
            raise ValidationError("bounds not increasing")
        if bounds:
            if self.count != max(0, len(bounds) - 1):
                raise ValidationError(
                    f"count {self.count} disagrees with {len(bounds)} cycle bounds"
                )
            if bounds[0] < 0 or (self.n_frames is not None and bounds[-1] >= self.n_frames):
                raise ValidationError("cycle bounds outside the clip")


def stack_channel(maps: Sequence[MotionMaps], name: str) -> np.ndarray:
    """Stack one named channel of a motion-map sequence into a (T, H, W) array"""
    if name not in CHANNEL_NAMES:
        raise ValueError(f"unknown channel {name!r}")
    return np.stack([getattr(m, name) for m in maps]).astype(np.float32, copy=False)
