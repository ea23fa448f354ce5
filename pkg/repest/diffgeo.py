"""
Gaussian-derivative filtering of flow fields
Builds the six differential motion maps and classifies the basic motion type
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import convolve1d

from .core import ConfigError, FlowField, MotionMaps

logger = logging.getLogger(__name__)

# Columns are x (axis 1), rows are y (axis 0)
AXES = {"x": 1, "y": 0}


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    """
    Separable 2-D kernel: taps_x runs along columns, taps_y along rows.
    Taps are in convolution order (index m holds the weight of f[n - m]).
    """
    sigma: float
    radius: int
    order: str  # "smooth" | "derivative"
    taps_x: np.ndarray
    taps_y: np.ndarray
    axis: Optional[str] = None

    def as_2d(self) -> np.ndarray:
        """Dense (2r+1, 2r+1) kernel, rows = y"""
        return np.outer(self.taps_y, self.taps_x)


def kernel_radius(sigma: float) -> int:
    return int(math.ceil(3.0 * sigma))


def _check_sigma(sigma: float):
    if not (math.isfinite(sigma) and sigma > 0):
        raise ConfigError("sigma must be positive")


def _sampled_gauss(sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    r = kernel_radius(sigma)
    m = np.arange(-r, r + 1, dtype=np.float64)
    return m, np.exp(-(m ** 2) / (2.0 * sigma ** 2))


def gaussian_smoothing_kernel(sigma: float) -> np.ndarray:
    """1-D sampled Gaussian, taps sum to 1"""
    _check_sigma(sigma)
    _, g = _sampled_gauss(sigma)
    return g / g.sum()


def _derivative_taps(sigma: float) -> np.ndarray:
    # Sampled -m*g(m), scaled so a unit ramp has derivative exactly 1
    m, g = _sampled_gauss(sigma)
    taps = -m * g
    return taps / -(m * taps).sum()


def gaussian_derivative_kernel(sigma: float, axis: str) -> GaussianKernel:
    """First-order Gaussian derivative along axis ("x" or "y"), Gaussian along the other"""
    _check_sigma(sigma)
    if axis not in AXES:
        raise ConfigError(f"axis must be 'x' or 'y', got {axis!r}")
    smooth_taps = gaussian_smoothing_kernel(sigma)
    deriv_taps = _derivative_taps(sigma)
    taps_x, taps_y = (deriv_taps, smooth_taps) if axis == "x" else (smooth_taps, deriv_taps)
    return GaussianKernel(sigma=sigma, radius=kernel_radius(sigma), order="derivative",
                          taps_x=taps_x, taps_y=taps_y, axis=axis)


def smooth(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with replicated borders"""
    taps = gaussian_smoothing_kernel(sigma)
    out = convolve1d(np.asarray(grid, dtype=np.float64), taps, axis=0, mode="nearest")
    return convolve1d(out, taps, axis=1, mode="nearest")


def gradient(grid: np.ndarray, sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gaussian-derivative gradient (d/dx, d/dy) with replicated borders"""
    _check_sigma(sigma)
    grid = np.asarray(grid, dtype=np.float64)
    smooth_taps = gaussian_smoothing_kernel(sigma)
    deriv_taps = _derivative_taps(sigma)
    gx = convolve1d(convolve1d(grid, smooth_taps, axis=0, mode="nearest"), deriv_taps, axis=1, mode="nearest")
    gy = convolve1d(convolve1d(grid, smooth_taps, axis=1, mode="nearest"), deriv_taps, axis=0, mode="nearest")
    return gx, gy


def interior_margin(sigma: float) -> int:
    """Pixels from the border within which derivative responses are unreliable"""
    return kernel_radius(sigma)


def motion_maps(F: FlowField, sigma: float = 4.0) -> MotionMaps:
    """
    The six differential representations of a flow field

    div = dFx/dx + dFy/dy, curl = dFy/dx - dFx/dy, plus the two diagonal
    gradients and the Gaussian-smoothed flow components, all at scale sigma
    """
    _check_sigma(sigma)
    ux, uy = gradient(F.u, sigma)
    vx, vy = gradient(F.v, sigma)
    return MotionMaps(
        div=ux + vy,
        curl=vx - uy,
        gxfx=ux,
        gyfy=vy,
        fx=smooth(F.u, sigma),
        fy=smooth(F.v, sigma),
        sigma=sigma,
    )


class MotionType(str, Enum):
    TRANSLATION = "translation"
    ROTATION = "rotation"
    EXPANSION = "expansion"
    MIXED = "mixed"
    NONE = "none"


def _interior(grid: np.ndarray, margin: int) -> np.ndarray:
    h, w = grid.shape
    if h > 2 * margin and w > 2 * margin:
        return grid[margin:h - margin, margin:w - margin]
    return grid


def classify_motion_type(m: MotionMaps, tau: float = 0.5) -> MotionType:
    """
    Basic motion type of one frame from the relative energy of flow, divergence and curl.

    Divergence and curl are rates (1/frame); they are multiplied by the interior
    half-size so all three energies are displacements in px/frame.
    """
    if not 0.0 < tau < 1.0:
        raise ConfigError("tau must lie in (0, 1)")
    margin = interior_margin(m.sigma)
    fx = _interior(np.asarray(m.fx, dtype=np.float64), margin)
    fy = _interior(np.asarray(m.fy, dtype=np.float64), margin)
    div = _interior(np.asarray(m.div, dtype=np.float64), margin)
    curl = _interior(np.asarray(m.curl, dtype=np.float64), margin)
    rho = min(fx.shape) / 2.0

    e_flow = float(np.mean(np.hypot(fx, fy)))
    e_div = float(np.mean(np.abs(div))) * rho
    e_curl = float(np.mean(np.abs(curl))) * rho
    total = e_flow + e_div + e_curl
    if total <= 1e-9:
        return MotionType.NONE

    flow_on = e_flow / total > tau
    div_on = e_div / total > tau
    curl_on = e_curl / total > tau
    logger.debug(f"[INFO] Motion energies flow={e_flow:.4g} div={e_div:.4g} curl={e_curl:.4g}")

    if curl_on and not div_on:
        return MotionType.ROTATION
    if div_on and not curl_on:
        return MotionType.EXPANSION
    if flow_on:
        return MotionType.TRANSLATION
    return MotionType.MIXED
