"""
Bit-exact readers and writers for frames, flow fields, scalograms, signals and manifests.
All binary layouts are little-endian except 16-bit PGM samples, which follow the
PGM convention (big-endian).
"""
import json
import logging
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .core import (
    CycleAnnotation,
    FlowField,
    FormatError,
    Image,
    ManifestError,
    Scalogram,
    SegMask,
    ValidationError,
)

logger = logging.getLogger(__name__)

FLO_MAGIC = 202021.25
RIMG_MAGIC = b"RIMG"
RSCL_MAGIC = b"RSCL"

PathLike = Union[str, os.PathLike]

_PGM_HEADER = re.compile(rb"\A(P\d)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


# ----------------------------
# PGM
# ----------------------------

def read_pgm(data: bytes) -> Image:
    """Decode a binary (P5) PGM into a luminance image normalized to [0, 1]"""
    if len(data) < 2 or data[:1] != b"P":
        raise FormatError("malformed PGM magic")
    if data[:2] != b"P5":
        raise FormatError("unsupported PGM variant")
    match = _PGM_HEADER.match(data)
    if match is None:
        raise FormatError("malformed PGM header")
    width, height, maxval = (int(g) for g in match.groups()[1:])
    if width <= 0 or height <= 0:
        raise FormatError("PGM dimensions must be positive")
    if maxval == 0 or maxval > 65535:
        raise FormatError(f"invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    offset = match.end()
    expected = width * height * dtype.itemsize
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise FormatError(f"truncated PGM payload: {len(payload)} of {expected} bytes")
    samples = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if samples.max(initial=0) > maxval:
        raise FormatError("PGM sample exceeds maxval")
    return Image((samples.astype(np.float64) / maxval).astype(np.float32))


def write_pgm(image: Union[Image, np.ndarray], maxval: int = 255) -> bytes:
    """Encode luminance in [0, 1] as a binary PGM with the given maxval"""
    grid = image.data if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    if not 0 < maxval <= 65535:
        raise FormatError(f"invalid PGM maxval {maxval}")
    height, width = grid.shape
    samples = np.rint(np.clip(grid, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + samples.astype(dtype).tobytes()


def write_mask_pgm(mask: SegMask) -> bytes:
    """Binary mask as an 8-bit PGM with values 0/255"""
    return write_pgm(mask.data.astype(np.float64), maxval=255)


# ----------------------------
# RIMG (raw float32 image)
# ----------------------------

def write_rimg(image: Image) -> bytes:
    header = RIMG_MAGIC + struct.pack("<II", image.width, image.height)
    return header + image.data.astype("<f4").tobytes()


def read_rimg(data: bytes) -> Image:
    if data[:4] != RIMG_MAGIC:
        raise FormatError("bad RIMG magic")
    if len(data) < 12:
        raise FormatError("truncated RIMG header")
    width, height = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * width * height
    if len(data) != expected:
        raise FormatError(f"RIMG size mismatch: expected {expected} bytes, got {len(data)}")
    grid = np.frombuffer(data, dtype="<f4", offset=12).reshape(height, width)
    return Image(grid.astype(np.float32))


# ----------------------------
# Middlebury .flo
# ----------------------------

def read_flo(data: bytes) -> FlowField:
    """Decode a Middlebury .flo buffer (magic, width, height, interleaved u/v float32)"""
    if len(data) < 12:
        raise FormatError("truncated .flo header")
    magic = np.frombuffer(data, dtype="<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FormatError("bad .flo magic")
    width, height = struct.unpack_from("<ii", data, 4)
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid .flo dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise FormatError(
            f".flo size mismatch: header says {width}x{height} ({expected} bytes), got {len(data)}"
        )
    uv = np.frombuffer(data, dtype="<f4", offset=12).reshape(height, width, 2)
    return FlowField(uv[..., 0].astype(np.float32), uv[..., 1].astype(np.float32))


def write_flo(flow: FlowField) -> bytes:
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes() + struct.pack("<ii", flow.width, flow.height)
    uv = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    return header + uv.tobytes()


# ----------------------------
# RSCL scalogram dump
# ----------------------------

def write_scalogram(s: Scalogram) -> bytes:
    header = RSCL_MAGIC + struct.pack("<II", s.n_scales, s.n_times)
    return (
        header
        + s.scales.astype("<f4").tobytes()
        + s.coi.astype("<f4").tobytes()
        + s.power.astype("<f4").tobytes()
    )


def read_scalogram(data: bytes) -> Scalogram:
    if data[:4] != RSCL_MAGIC:
        raise FormatError("bad RSCL magic")
    if len(data) < 12:
        raise FormatError("truncated RSCL header")
    n_scales, n_times = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * (n_scales + n_times + n_scales * n_times)
    if len(data) != expected:
        raise FormatError(
            f"RSCL dimension mismatch: {n_scales}x{n_times} needs {expected} bytes, got {len(data)}"
        )
    offset = 12
    scales = np.frombuffer(data, dtype="<f4", count=n_scales, offset=offset)
    offset += 4 * n_scales
    coi = np.frombuffer(data, dtype="<f4", count=n_times, offset=offset)
    offset += 4 * n_times
    power = np.frombuffer(data, dtype="<f4", count=n_scales * n_times, offset=offset)
    try:
        return Scalogram(
            scales=scales.astype(np.float64),
            power=power.reshape(n_scales, n_times).astype(np.float64),
            coi=coi.astype(np.float64),
        )
    except ValidationError as e:
        raise FormatError(f"invalid RSCL content: {e}") from e


# ----------------------------
# 1-D signals (text, one value per line)
# ----------------------------

def read_signal(text: str) -> np.ndarray:
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise FormatError(f"signal line {lineno}: not a number: {line!r}") from None
    signal = np.asarray(values, dtype=np.float64)
    if signal.size == 0:
        raise FormatError("signal file holds no samples")
    if not np.all(np.isfinite(signal)):
        raise FormatError("signal contains non-finite samples")
    return signal


def write_signal(signal: Sequence[float], comment: Optional[str] = None) -> str:
    lines = [f"# {comment}"] if comment else []
    lines.extend(repr(float(x)) for x in np.asarray(signal, dtype=np.float64))
    return "\n".join(lines) + "\n"


# ----------------------------
# Manifest
# ----------------------------

@dataclass(frozen=True)
class ManifestEntry:
    """One dataset item; exactly one of frames_dir / flow_dir / signal is set"""
    id: str
    fps: float
    annotation: CycleAnnotation
    frames_dir: Optional[str] = None
    flow_dir: Optional[str] = None
    signal: Optional[str] = None

    @property
    def source_kind(self) -> str:
        if self.frames_dir is not None:
            return "frames"
        if self.flow_dir is not None:
            return "flow"
        return "signal"

    @property
    def source_key(self) -> str:
        """Manifest JSON key holding the source path"""
        return "signal" if self.signal is not None else f"{self.source_kind}_dir"

    @property
    def source(self) -> str:
        return self.frames_dir or self.flow_dir or self.signal


@dataclass(frozen=True)
class Manifest:
    videos: tuple
    root: Optional[str] = None

    def resolve(self, entry: ManifestEntry) -> Path:
        """Resolve an entry's source path relative to the manifest's directory"""
        path = Path(entry.source)
        if not path.is_absolute() and self.root is not None:
            path = Path(self.root) / path
        return path


_SOURCE_KEYS = ("frames_dir", "flow_dir", "signal")


def read_manifest(text: str, root: Optional[PathLike] = None) -> Manifest:
    """Parse and validate a manifest JSON document"""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("videos"), list):
        raise ManifestError("manifest must be an object with a 'videos' list")

    entries = []
    for i, item in enumerate(doc["videos"]):
        if not isinstance(item, dict):
            raise ManifestError(f"videos[{i}] must be an object")
        for key in ("id", "fps", "count"):
            if key not in item:
                raise ManifestError(f"videos[{i}] is missing required field '{key}'")
        sources = [key for key in _SOURCE_KEYS if item.get(key) is not None]
        if len(sources) != 1:
            raise ManifestError(
                f"videos[{i}] must have exactly one of frames_dir/flow_dir/signal, got {sources or 'none'}"
            )
        try:
            fps = float(item["fps"])
            count = float(item["count"])
        except (TypeError, ValueError):
            raise ManifestError(f"videos[{i}]: fps and count must be numbers") from None
        if not fps > 0:
            raise ManifestError(f"videos[{i}]: fps must be positive")
        bounds = item.get("cycle_bounds") or ()
        try:
            annotation = CycleAnnotation(
                video_id=str(item["id"]),
                fps=fps,
                count=count,
                cycle_bounds=tuple(bounds),
                n_frames=item.get("n_frames"),
            )
        except ValidationError as e:
            raise ManifestError(f"videos[{i}] ({item['id']}): {e}") from e
        entries.append(ManifestEntry(
            id=str(item["id"]),
            fps=fps,
            annotation=annotation,
            **{key: str(item[key]) for key in sources},
        ))
    return Manifest(videos=tuple(entries), root=str(root) if root is not None else None)


def load_manifest(path: PathLike) -> Manifest:
    path = Path(path)
    return read_manifest(path.read_text(encoding="utf-8"), root=path.parent)


def write_manifest(manifest: Manifest) -> str:
    videos = []
    for entry in manifest.videos:
        item: Dict = {"id": entry.id, entry.source_key: entry.source, "fps": entry.fps}
        count = entry.annotation.count
        item["count"] = int(count) if float(count).is_integer() else count
        if entry.annotation.cycle_bounds:
            item["cycle_bounds"] = list(entry.annotation.cycle_bounds)
        if entry.annotation.n_frames is not None:
            item["n_frames"] = entry.annotation.n_frames
        videos.append(item)
    return json.dumps({"videos": videos}, indent=2)


# ----------------------------
# Directories
# ----------------------------

FRAME_SUFFIXES = {".pgm", ".rimg", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


def list_frame_files(folder: PathLike, suffixes=None) -> List[Path]:
    """Files of the given kinds in lexicographic filename order"""
    folder = Path(folder)
    if not folder.is_dir():
        raise FileNotFoundError(f"not a directory: {folder}")
    suffixes = FRAME_SUFFIXES if suffixes is None else {s.lower() for s in suffixes}
    names = sorted(
        name for name in os.listdir(folder)
        if Path(name).suffix.lower() in suffixes and (folder / name).is_file()
    )
    return [folder / name for name in names]


def load_frames(folder: PathLike) -> List[Image]:
    from .frames import load_image

    files = list_frame_files(folder)
    if not files:
        raise FileNotFoundError(f"no frames found in {folder}")
    frames = [load_image(path) for path in files]
    logger.info(f"[OK] Loaded {len(frames)} frames from {folder}")
    return frames


def load_flows(folder: PathLike) -> List[FlowField]:
    files = list_frame_files(folder, suffixes={".flo"})
    if not files:
        raise FileNotFoundError(f"no .flo files found in {folder}")
    flows = [read_flo(path.read_bytes()) for path in files]
    logger.info(f"[OK] Loaded {len(flows)} flow fields from {folder}")
    return flows


def write_frames(folder: PathLike, frames: Sequence[Image], fmt: str = "pgm") -> List[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    encode = {"pgm": write_pgm, "rimg": write_rimg}.get(fmt)
    if encode is None:
        raise ValueError(f"unsupported frame format {fmt!r}")
    paths = []
    for i, frame in enumerate(frames):
        path = folder / f"{i:05d}.{fmt}"
        path.write_bytes(encode(frame))
        paths.append(path)
    return paths


def write_flows(folder: PathLike, flows: Sequence[FlowField]) -> List[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, flow in enumerate(flows):
        path = folder / f"{i:05d}.flo"
        path.write_bytes(write_flo(flow))
        paths.append(path)
    return paths


def write_masks(folder: PathLike, masks: Sequence[SegMask]) -> List[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, mask in enumerate(masks):
        path = folder / f"{i:05d}.pgm"
        path.write_bytes(write_mask_pgm(mask))
        paths.append(path)
    return paths
