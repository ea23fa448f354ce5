"""
Continuous wavelet transform with the Morlet wavelet
1-D scalograms, dense per-pixel power/scale maps over motion-map stacks,
and a Fourier periodogram baseline for comparison
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import fft as sp_fft

from .core import (
    ClipTooShortError,
    DimensionError,
    PowerMap,
    ScaleMap,
    Scalogram,
    ValidationError,
    WaveletConfig,
    validate_config,
)
from .settings import get_thread_count

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
# A timestep needs this many admissible scales before its peak counts as resolved
MIN_ADMISSIBLE = 3
COI_RTOL = 1e-9
# Pixels per FFT batch are chosen so one batch holds about this many complex samples
DENSE_CHUNK_SAMPLES = 1 << 20


def fourier_factor(omega0: float = 6.0) -> float:
    """Ratio between Fourier wavelength and wavelet scale"""
    return 4.0 * math.pi / (omega0 + math.sqrt(2.0 + omega0 ** 2))


def scale_to_wavelength(s, omega0: float = 6.0):
    """Fourier wavelength (frames) of scale s (frames)"""
    if np.ndim(s) == 0:
        return float(s) * fourier_factor(omega0)
    return np.asarray(s, dtype=np.float64) * fourier_factor(omega0)


def morlet(eta, omega0: float = 6.0):
    """Morlet mother wavelet: pi^-1/4 * exp(i*omega0*eta) * exp(-eta^2/2)"""
    eta = np.asarray(eta, dtype=np.float64)
    value = np.pi ** -0.25 * np.exp(1j * omega0 * eta) * np.exp(-0.5 * eta ** 2)
    return complex(value) if value.ndim == 0 else value


@dataclass(frozen=True, eq=False)
class ScaleGrid:
    """Logarithmic scale grid s_j = s0 * 2^(j*dj), j = 0..J (frames)"""
    scales: np.ndarray
    s0: float
    dj: float
    n_samples: int

    @property
    def J(self) -> int:
        return self.scales.size - 1

    def __len__(self) -> int:
        return self.scales.size


def scale_grid(n_samples: int, cfg: WaveletConfig = WaveletConfig()) -> ScaleGrid:
    """
    Scale grid for a clip of n_samples frames.

    J = log2(N/s0)/dj, truncated so the largest Fourier wavelength fits
    min_cycles times into the clip.
    """
    validate_config(cfg)
    n = int(n_samples)
    if n < MIN_SAMPLES:
        raise ClipTooShortError(f"clip too short: {n} samples, need at least {MIN_SAMPLES}")
    J = int(math.floor(math.log2(n / cfg.s0) / cfg.dj + 1e-9))
    if cfg.min_cycles is not None:
        s_cap = n / (cfg.min_cycles * fourier_factor(cfg.omega0))
        if s_cap < cfg.s0:
            raise ClipTooShortError(
                f"clip too short: {n} samples cannot host {cfg.min_cycles:g} cycles at s0={cfg.s0:g}"
            )
        J = min(J, int(math.floor(math.log2(s_cap / cfg.s0) / cfg.dj + 1e-9)))
    if J < 0:
        raise ClipTooShortError(f"clip too short: {n} samples")
    scales = cfg.s0 * 2.0 ** (np.arange(J + 1) * cfg.dj)
    scales.setflags(write=False)
    return ScaleGrid(scales=scales, s0=cfg.s0, dj=cfg.dj, n_samples=n)


def cone_of_influence(n_samples: int) -> np.ndarray:
    """Largest scale (frames) per timestep whose e-folding time sqrt(2)*s stays inside the clip"""
    t = np.arange(n_samples, dtype=np.float64)
    return np.minimum(t, n_samples - 1 - t) / math.sqrt(2.0)


def admissible_scales(scales, coi) -> np.ndarray:
    """(S, T) flags: scale j fits inside the cone of influence at time t"""
    scales = np.asarray(scales, dtype=np.float64)
    coi = np.asarray(coi, dtype=np.float64)
    return scales[:, None] <= coi[None, :] * (1.0 + COI_RTOL)


def resolved_scale(scale, scales, n_admissible) -> np.ndarray:
    """
    True where a peak scale is an interior estimate: at least MIN_ADMISSIBLE scales
    are admissible and the peak lies strictly between the smallest scale and the
    largest admissible one.
    """
    scales = np.asarray(scales, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    n_admissible = np.asarray(n_admissible)
    top = scales[np.clip(n_admissible - 1, 0, scales.size - 1)]
    return (n_admissible >= MIN_ADMISSIBLE) & (scale > scales[0]) & (scale < top)


def _padded_length(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _angular_frequencies(n_pad: int) -> np.ndarray:
    k = np.arange(n_pad, dtype=np.float64)
    k[n_pad // 2 + 1:] -= n_pad
    return 2.0 * np.pi * k / n_pad


def _daughter_spectra(scales: np.ndarray, omega0: float, n_pad: int) -> np.ndarray:
    """Unit-energy Morlet daughters in the frequency domain, shape (S, n_pad); zero for negative frequencies"""
    omega = _angular_frequencies(n_pad)
    s = np.asarray(scales, dtype=np.float64)[:, None]
    norm = np.sqrt(2.0 * np.pi * s) * np.pi ** -0.25
    spectra = norm * np.exp(-0.5 * (s * omega[None, :] - omega0) ** 2)
    spectra[:, omega <= 0] = 0.0
    return spectra


def _check_signal(h) -> np.ndarray:
    x = np.asarray(h, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"signal must be 1-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("signal contains non-finite values")
    if x.size < MIN_SAMPLES:
        raise ClipTooShortError(f"clip too short: {x.size} samples, need at least {MIN_SAMPLES}")
    return x


def cwt(h, cfg: WaveletConfig = WaveletConfig()) -> Scalogram:
    """
    Wavelet power spectrum of a 1-D signal

    Args:
        h: Finite samples, one per frame, length >= 8
        cfg: Wavelet configuration

    Returns:
        Scalogram with power |W_n(s)|^2 over the configured scale grid
    """
    x = _check_signal(h)
    grid = scale_grid(x.size, cfg)
    n = x.size
    n_pad = _padded_length(n)

    padded = np.zeros(n_pad)
    padded[:n] = x - x.mean()
    x_hat = sp_fft.fft(padded, workers=get_thread_count())
    daughters = _daughter_spectra(grid.scales, cfg.omega0, n_pad)
    W = sp_fft.ifft(x_hat[None, :] * daughters, axis=1, workers=get_thread_count())[:, :n]
    power = W.real ** 2 + W.imag ** 2
    return Scalogram(scales=grid.scales, power=power, coi=cone_of_influence(n))


@dataclass(frozen=True, eq=False)
class Ridge:
    """Per-timestep dominant scale of a scalogram"""
    scales: np.ndarray     # frames, sub-grid refined
    frequency: np.ndarray  # Hz
    resolved: np.ndarray   # False where the cone of influence limits the estimate


def ridge_frequency(scalogram: Scalogram, cfg: WaveletConfig = WaveletConfig(), refine: bool = True) -> Ridge:
    """
    Instantaneous frequency along the power ridge.

    At each time the peak is searched among scales inside the cone of influence.
    A timestep is resolved when the peak sits strictly inside the admissible range
    (see resolved_scale). The peak is refined by a parabola through the log-power
    of its neighbours on the grid.
    """
    scales = np.asarray(scalogram.scales, dtype=np.float64)
    power = np.asarray(scalogram.power, dtype=np.float64)
    coi = np.asarray(scalogram.coi, dtype=np.float64)
    n_times = power.shape[1]

    admissible = admissible_scales(scales, coi)
    n_admissible = admissible.sum(axis=0)
    masked = np.where(admissible, power, -np.inf)
    peak = np.argmax(masked, axis=0)
    peak[n_admissible == 0] = 0
    resolved = resolved_scale(scales[peak], scales, n_admissible)

    position = peak.astype(np.float64)
    if refine:
        j = peak[resolved]
        c = np.arange(n_times)[resolved]
        tiny = np.finfo(np.float64).tiny
        y_lo = np.log(power[j - 1, c] + tiny)
        y_mid = np.log(power[j, c] + tiny)
        y_hi = np.log(power[j + 1, c] + tiny)
        curvature = y_lo - 2.0 * y_mid + y_hi
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = np.where(curvature < 0, 0.5 * (y_lo - y_hi) / curvature, 0.0)
        position[resolved] += np.clip(delta, -0.5, 0.5)

    ridge_scales = scales[0] * 2.0 ** (position * cfg.dj)
    frequency = cfg.fps / scale_to_wavelength(ridge_scales, cfg.omega0)
    return Ridge(scales=ridge_scales, frequency=frequency, resolved=resolved)


@dataclass(frozen=True, eq=False)
class DensePowerResult:
    """
    Per-frame maximum power and argmax scale for one motion-map channel.
    power is (T, H, W); scale_index indexes into scales.
    """
    power: np.ndarray
    scale_index: np.ndarray
    scales: np.ndarray
    coi: np.ndarray

    def __post_init__(self):
        if self.power.shape != self.scale_index.shape or self.power.ndim != 3:
            raise DimensionError("power and scale_index must share a (T, H, W) shape")
        if self.coi.shape != (self.power.shape[0],):
            raise DimensionError("coi length must equal the number of frames")

    @property
    def n_frames(self) -> int:
        return self.power.shape[0]

    @property
    def frame_shape(self) -> Tuple[int, int]:
        return self.power.shape[1:]

    @property
    def power_maps(self) -> Tuple[PowerMap, ...]:
        return tuple(PowerMap(p) for p in self.power)

    @property
    def scale_maps(self) -> Tuple[ScaleMap, ...]:
        return tuple(ScaleMap(i, self.scales) for i in self.scale_index)


def dense_cwt(channel_stack, cfg: WaveletConfig = WaveletConfig()) -> DensePowerResult:
    """
    Per-pixel CWT of a (T, H, W) stack, reduced on the fly to max power and argmax scale.

    Power at scales outside the cone of influence is zeroed before the reduction.
    Ties keep the smallest scale; a pixel with no power reports scale index 0.
    """
    stack = np.asarray(channel_stack, dtype=np.float64)
    if stack.ndim != 3:
        raise DimensionError(f"channel stack must be (T, H, W), got shape {stack.shape}")
    if not np.all(np.isfinite(stack)):
        raise ValidationError("channel stack contains non-finite values")
    n, h, w = stack.shape
    grid = scale_grid(n, cfg)
    coi = cone_of_influence(n)
    n_pad = _padded_length(n)
    daughters = _daughter_spectra(grid.scales, cfg.omega0, n_pad)
    admissible = admissible_scales(grid.scales, coi)
    workers = get_thread_count()

    series = stack.reshape(n, h * w)
    series = series - series.mean(axis=0, keepdims=True)
    best_power = np.zeros((n, h * w), dtype=np.float64)
    best_index = np.zeros((n, h * w), dtype=np.int16)

    chunk = max(1, DENSE_CHUNK_SAMPLES // n_pad)
    for start in range(0, h * w, chunk):
        stop = min(start + chunk, h * w)
        x_hat = sp_fft.fft(series[:, start:stop], n=n_pad, axis=0, workers=workers)
        best_p = best_power[:, start:stop]
        best_i = best_index[:, start:stop]
        for j in range(grid.scales.size):
            if not admissible[j].any():
                break
            W = sp_fft.ifft(x_hat * daughters[j][:, None], axis=0, workers=workers)[:n]
            p = W.real ** 2 + W.imag ** 2
            p[~admissible[j]] = 0.0
            better = p > best_p
            best_p[better] = p[better]
            best_i[better] = j

    logger.debug(f"[OK] Dense CWT over {h}x{w} pixels, {n} frames, {grid.scales.size} scales")
    return DensePowerResult(
        power=best_power.reshape(n, h, w).astype(np.float32),
        scale_index=best_index.reshape(n, h, w),
        scales=grid.scales,
        coi=coi,
    )


def periodogram_count(h, fps: float) -> float:
    """
    Stationary baseline: the strongest non-DC periodogram bin, converted to a count.
    With f* = k*·fps/N and duration N/fps the count equals the bin index k*.
    """
    x = _check_signal(h)
    if not fps > 0:
        raise ValidationError("fps must be positive")
    spectrum = np.abs(sp_fft.rfft(x - x.mean())) ** 2
    spectrum[0] = 0.0
    if spectrum.max() <= 1e-12:
        return 0.0
    k = int(np.argmax(spectrum))
    f_peak = k * fps / x.size
    return f_peak * x.size / fps
