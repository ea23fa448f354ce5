"""
repest - repetition estimation in video
Counts repetitive motion from optical flow with dense wavelet analysis of
differential motion maps
"""
from .core import (
    CountResult,
    CycleAnnotation,
    FlowField,
    Image,
    MotionMaps,
    RepestError,
    WaveletConfig,
)
from .pipeline import PipelineConfig, count_signal, count_video

__all__ = [
    "CountResult",
    "CycleAnnotation",
    "FlowField",
    "Image",
    "MotionMaps",
    "PipelineConfig",
    "RepestError",
    "WaveletConfig",
    "count_signal",
    "count_video",
]
