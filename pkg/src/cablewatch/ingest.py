"""Frame loading and validation.

Sources are either a directory of lexicographically ordered PGM/PNG images or
a packed 8-bit luma file (``.y8``) with a JSON sidecar naming width, height
and fps. Both yield immutable grayscale :class:`Frame` objects in index order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from cablewatch.errors import SequenceError

MIN_DIM = 8

# BT.601 luma weights, used when color test inputs are fed in.
_LUMA = (0.299, 0.587, 0.114)


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round nonnegative values half-away-from-zero (used for all 8-bit quantization)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half-up to uint8."""
    return round_half_up(np.clip(values, 0.0, 255.0)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Frame:
    """One grayscale video frame; ``pixels`` is a read-only (height, width) uint8 array."""

    index: int
    timestamp_ms: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 2:
            raise ValueError("pixels must be a 2-D uint8 array")
        if px.shape[0] < MIN_DIM or px.shape[1] < MIN_DIM:
            raise ValueError(f"frame must be at least {MIN_DIM}x{MIN_DIM}, got {px.shape[1]}x{px.shape[0]}")
        if self.index < 0 or self.timestamp_ms < 0:
            raise ValueError("index and timestamp_ms must be nonnegative")
        px = px.copy() if px.flags.writeable else px
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class SequenceMeta:
    frame_count: int
    width: int
    height: int
    fps: float
    source_id: str = ""

    def __post_init__(self):
        if self.frame_count <= 0:
            raise SequenceError("sequence has no frames")
        if self.width < MIN_DIM or self.height < MIN_DIM:
            raise SequenceError(f"sequence dimensions below minimum {MIN_DIM}")
        if not self.fps > 0:
            raise SequenceError("fps must be positive")


def timestamp_for(index: int, fps: float) -> int:
    return int(round_half_up(np.float64(1000.0 * index / fps)))


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an 8-bit RGB raster (h, w, 3) to luma, rounded to uint8."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 raster")
    luma = (
        _LUMA[0] * rgb[:, :, 0].astype(np.float64)
        + _LUMA[1] * rgb[:, :, 1].astype(np.float64)
        + _LUMA[2] * rgb[:, :, 2].astype(np.float64)
    )
    return quantize_u8(luma)


# --- PGM (binary P5, maxval 255) ------------------------------------------

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def write_pgm(path: Path | str, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path: Path | str) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise SequenceError(f"{path}: malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise SequenceError(f"{path}: only binary (P5) PGM is supported")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise SequenceError(f"{path}: expected maxval 255, got {maxval}")
    raster = data[pos + 1 : pos + 1 + w * h]
    if len(raster) != w * h:
        raise SequenceError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def _read_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        if img.mode in ("RGB", "RGBA"):
            rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
            return to_grayscale(rgb)
        raise SequenceError(f"{path}: unsupported image mode {img.mode}")


# --- raw .y8 + sidecar ------------------------------------------------------

def sidecar_path(y8_path: Path) -> Path:
    return y8_path.with_suffix(".json")


def write_y8(path: Path | str, frames: np.ndarray, fps: float, source_id: str = "") -> None:
    """Write packed luma frames (n, h, w) plus the JSON sidecar."""
    path = Path(path)
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    n, h, w = frames.shape
    path.write_bytes(frames.tobytes())
    meta = {"width": w, "height": h, "fps": float(fps)}
    if source_id:
        meta["source_id"] = source_id
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


class FrameSequence:
    """Iterable frame source. Each iteration re-reads from disk, so two passes
    yield identical bytes; a single iterator must not be shared across threads.
    """

    def __init__(self, meta: SequenceMeta, loader):
        self.meta = meta
        self._loader = loader

    def __len__(self) -> int:
        return self.meta.frame_count

    def __iter__(self) -> Iterator[Frame]:
        fps = self.meta.fps
        for index, pixels in enumerate(self._loader()):
            yield Frame(index=index, timestamp_ms=timestamp_for(index, fps), pixels=pixels)


_IMAGE_SUFFIXES = (".pgm", ".png")


def _open_directory(path: Path, fps_default: float) -> FrameSequence:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise SequenceError(f"{path}: no PGM/PNG frames found")
    fps = fps_default
    source_id = path.name
    meta_file = path / "sequence.json"
    if meta_file.exists():
        info = json.loads(meta_file.read_text())
        fps = float(info.get("fps", fps))
        source_id = info.get("source_id", source_id)
    first = _read_image(files[0])
    h, w = first.shape

    def loader():
        for f in files:
            pixels = _read_image(f)
            if pixels.shape != (h, w):
                raise SequenceError(
                    f"{f}: dimensions {pixels.shape[1]}x{pixels.shape[0]} differ from first frame {w}x{h}"
                )
            yield pixels

    meta = SequenceMeta(frame_count=len(files), width=w, height=h, fps=fps, source_id=source_id)
    return FrameSequence(meta, loader)


def _open_y8(path: Path) -> FrameSequence:
    side = sidecar_path(path)
    if not side.exists():
        raise SequenceError(f"{side}: sidecar not found for {path}")
    info = json.loads(side.read_text())
    try:
        w, h, fps = int(info["width"]), int(info["height"]), float(info["fps"])
    except KeyError as exc:
        raise SequenceError(f"{side}: sidecar missing field {exc}") from exc
    size = path.stat().st_size
    frame_bytes = w * h
    if frame_bytes <= 0 or size % frame_bytes != 0:
        raise SequenceError(
            f"{path}: size {size} is not a whole number of {w}x{h} frames (truncated?)"
        )
    count = size // frame_bytes

    def loader():
        with open(path, "rb") as fh:
            for _ in range(count):
                raw = fh.read(frame_bytes)
                if len(raw) != frame_bytes:
                    raise SequenceError(f"{path}: truncated read")
                yield np.frombuffer(raw, dtype=np.uint8).reshape(h, w)

    meta = SequenceMeta(
        frame_count=count, width=w, height=h, fps=fps, source_id=info.get("source_id", path.stem)
    )
    return FrameSequence(meta, loader)


def open_sequence(path: Path | str, fps_default: float = 30.0) -> FrameSequence:
    """Open a frame directory or a .y8 raw file and return an iterable handle."""
    path = Path(path)
    if not path.exists():
        raise SequenceError(f"{path}: no such file or directory")
    if path.is_dir():
        return _open_directory(path, fps_default)
    if path.suffix == ".y8":
        return _open_y8(path)
    raise SequenceError(f"{path}: expected a directory of frames or a .y8 file")
