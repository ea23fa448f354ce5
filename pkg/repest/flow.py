"""
Dense optical flow: coarse-to-fine Horn-Schunck
Gives the pipeline a built-in flow front end; precomputed .flo fields remain first-class
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage
from tqdm import tqdm

from .core import ConfigError, DimensionError, FlowField, Image
from .settings import get_thread_count

logger = logging.getLogger(__name__)

# Kernel for the local flow averages (u-bar, v-bar) of the Horn-Schunck update
HS_AVERAGE_KERNEL = np.array([[1 / 12, 1 / 6, 1 / 12],
                              [1 / 6, 0.0, 1 / 6],
                              [1 / 12, 1 / 6, 1 / 12]], dtype=np.float64)

# alpha is expressed for 8-bit intensities
INTENSITY_RANGE = 255.0
MIN_SIZE = 8


@dataclass(frozen=True)
class HSParams:
    alpha: float = 15.0
    iterations: int = 200
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5


def validate_hs_params(p: HSParams) -> HSParams:
    if not (np.isfinite(p.alpha) and p.alpha > 0):
        raise ConfigError("alpha must be positive")
    if int(p.iterations) != p.iterations or p.iterations < 1:
        raise ConfigError("iterations must be a positive integer")
    if int(p.pyramid_levels) != p.pyramid_levels or p.pyramid_levels < 1:
        raise ConfigError("pyramid_levels must be a positive integer")
    if not 0.0 < p.pyramid_scale < 1.0:
        raise ConfigError("pyramid_scale must lie in (0, 1)")
    return p


def _derivatives(im1: np.ndarray, im2: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Spatio-temporal derivatives estimated over the 2x2x2 cube of each pixel,
    with replicated borders (Neumann)
    """
    p1 = np.pad(im1, ((0, 1), (0, 1)), mode="edge")
    p2 = np.pad(im2, ((0, 1), (0, 1)), mode="edge")

    def dx(p):
        return (p[:-1, 1:] - p[:-1, :-1]) + (p[1:, 1:] - p[1:, :-1])

    def dy(p):
        return (p[1:, :-1] - p[:-1, :-1]) + (p[1:, 1:] - p[:-1, 1:])

    def block_sum(p):
        return p[:-1, :-1] + p[:-1, 1:] + p[1:, :-1] + p[1:, 1:]

    fx = 0.25 * (dx(p1) + dx(p2))
    fy = 0.25 * (dy(p1) + dy(p2))
    ft = 0.25 * (block_sum(p2) - block_sum(p1))
    return fx, fy, ft


def _horn_schunck(im1: np.ndarray, im2: np.ndarray, alpha: float, iterations: int) -> Tuple[np.ndarray, np.ndarray]:
    """Single-level Horn-Schunck with checkerboard (red-black) Gauss-Seidel sweeps"""
    fx, fy, ft = _derivatives(im1, im2)
    u = np.zeros_like(im1)
    v = np.zeros_like(im1)
    if not (np.any(ft) and (np.any(fx) or np.any(fy))):
        return u, v

    denom = alpha ** 2 + fx ** 2 + fy ** 2
    rows, cols = np.indices(im1.shape)
    red = (rows + cols) % 2 == 0
    colors = (red, ~red)

    for _ in range(iterations):
        for color in colors:
            u_avg = ndimage.correlate(u, HS_AVERAGE_KERNEL, mode="nearest")
            v_avg = ndimage.correlate(v, HS_AVERAGE_KERNEL, mode="nearest")
            der = (fx * u_avg + fy * v_avg + ft) / denom
            u = np.where(color, u_avg - fx * der, u)
            v = np.where(color, v_avg - fy * der, v)
    return u, v


def _pyramid(img: np.ndarray, levels: int, scale: float) -> List[np.ndarray]:
    """Gaussian pyramid, finest level first; stops before a side drops below MIN_SIZE"""
    pyramid = [img]
    sigma = 0.5 * np.sqrt(1.0 / scale ** 2 - 1.0)
    for _ in range(levels - 1):
        prev = pyramid[-1]
        h, w = prev.shape
        nh, nw = int(round(h * scale)), int(round(w * scale))
        if min(nh, nw) < MIN_SIZE:
            break
        smoothed = ndimage.gaussian_filter(prev, sigma, mode="nearest")
        pyramid.append(ndimage.zoom(smoothed, (nh / h, nw / w), order=1, mode="nearest", grid_mode=True))
    return pyramid


def _resize_flow(u: np.ndarray, v: np.ndarray, shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    h, w = shape
    hc, wc = u.shape
    zoom = (h / hc, w / wc)
    u_up = ndimage.zoom(u, zoom, order=1, mode="nearest", grid_mode=True) * (w / wc)
    v_up = ndimage.zoom(v, zoom, order=1, mode="nearest", grid_mode=True) * (h / hc)
    return u_up, v_up


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample img at (x + u, y + v) so that a correct flow maps it back onto the first frame"""
    rows, cols = np.indices(img.shape, dtype=np.float64)
    return ndimage.map_coordinates(img, [rows + v, cols + u], order=1, mode="nearest")


def estimate_flow(prev: Image, next: Image, p: HSParams = HSParams()) -> FlowField:
    """
    Estimate the motion between two consecutive frames

    Args:
        prev: Frame at time t
        next: Frame at time t+1, same dimensions, at least 8x8
        p: Horn-Schunck parameters

    Returns:
        FlowField such that next(x + u, y + v) ~ prev(x, y)
    """
    validate_hs_params(p)
    if prev.data.shape != next.data.shape:
        raise DimensionError(f"frame sizes differ: {prev.data.shape} vs {next.data.shape}")
    if min(prev.data.shape) < MIN_SIZE:
        raise DimensionError(f"frames must be at least {MIN_SIZE}x{MIN_SIZE}")

    im1 = prev.data.astype(np.float64) * INTENSITY_RANGE
    im2 = next.data.astype(np.float64) * INTENSITY_RANGE
    pyr1 = _pyramid(im1, int(p.pyramid_levels), p.pyramid_scale)
    pyr2 = _pyramid(im2, int(p.pyramid_levels), p.pyramid_scale)

    u = np.zeros_like(pyr1[-1])
    v = np.zeros_like(pyr1[-1])
    for level in reversed(range(len(pyr1))):
        a, b = pyr1[level], pyr2[level]
        if u.shape != a.shape:
            u, v = _resize_flow(u, v, a.shape)
        warped = _warp(b, u, v) if (np.any(u) or np.any(v)) else b
        du, dv = _horn_schunck(a, warped, p.alpha, int(p.iterations))
        u = u + du
        v = v + dv
    return FlowField(u.astype(np.float32), v.astype(np.float32))


def estimate_flow_sequence(frames: Sequence[Image], p: HSParams = HSParams(),
                           show_progress: bool = False) -> List[FlowField]:
    """Flow between every consecutive frame pair: N frames give N-1 fields, in order"""
    if len(frames) < 2:
        raise DimensionError("at least two frames are needed to estimate flow")
    shape = frames[0].data.shape
    for i, frame in enumerate(frames):
        if frame.data.shape != shape:
            raise DimensionError(f"frame {i} has size {frame.data.shape}, expected {shape}")
    validate_hs_params(p)

    pairs = list(zip(frames[:-1], frames[1:]))
    workers = min(get_thread_count(), len(pairs))
    logger.info(f"[INFO] Estimating flow for {len(pairs)} frame pairs ({workers} workers)")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(lambda pair: estimate_flow(pair[0], pair[1], p), pairs)
        flows = list(tqdm(results, total=len(pairs), unit=" pairs", desc="[repest] Flow",
                          disable=not show_progress))
    logger.info(f"[OK] Estimated {len(flows)} flow fields")
    return flows
