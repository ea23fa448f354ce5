"""
Frame image decoding
Reads PGM/RIMG natively and common raster formats through Pillow,
always returning single-channel luminance in [0, 1]
"""

import logging
import os
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image as PILImage

from .core import FormatError, Image
from .io import read_pgm, read_rimg

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

PILLOW_FORMATS = {'.png', '.jpg', '.jpeg', '.bmp', '.webp', '.tiff', '.tif'}


def is_image_file(filepath: Union[str, os.PathLike]) -> bool:
    """Check if file is a supported frame format"""
    _, ext = os.path.splitext(str(filepath))
    return ext.lower() in PILLOW_FORMATS | {'.pgm', '.rimg'}


def pil_to_luminance(img: PILImage.Image) -> np.ndarray:
    """Convert a Pillow image to float luminance in [0, 1]"""
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        data = np.asarray(img, dtype=np.float64)
        return np.clip(data / 65535.0, 0.0, 1.0)
    if img.mode in ("L", "1"):
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return rgb @ LUMA_WEIGHTS


def load_image(filepath: Union[str, os.PathLike]) -> Image:
    """
    Load one frame as a luminance image

    Args:
        filepath: Path to a .pgm, .rimg or Pillow-readable image

    Returns:
        Image with values normalized to [0, 1]
    """
    path = Path(filepath)
    ext = path.suffix.lower()
    if ext == '.pgm':
        return read_pgm(path.read_bytes())
    if ext == '.rimg':
        return read_rimg(path.read_bytes())
    if ext not in PILLOW_FORMATS:
        raise FormatError(f"unsupported frame format: {path.name}")
    try:
        with PILImage.open(path) as img:
            img.load()
            luminance = pil_to_luminance(img)
    except (OSError, PILImage.DecompressionBombError) as e:
        logger.error(f"[ERROR] Failed to decode frame {path.name}: {e}")
        raise FormatError(f"cannot decode {path.name}: {e}") from e
    return Image(np.clip(luminance, 0.0, 1.0).astype(np.float32))
