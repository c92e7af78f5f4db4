"""Region-of-interest polygons and their rasterized pixel masks.

The slack region is an operator decision: each camera view carries its own
polygon set in a JSON config, and all polygons for a view are unioned into a
single boolean mask. Fill follows the even-odd rule sampled at pixel centers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cablewatch.errors import ConfigError
from cablewatch.ingest import Frame


@dataclass(frozen=True)
class RoiPolygon:
    """Ordered polygon vertices in pixel coordinates."""

    vertices: tuple[tuple[float, float], ...]
    name: str = ""

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ConfigError("polygon needs at least 3 vertices", {"vertices": "fewer than 3 vertices"})
        for a, b in zip(verts, verts[1:] + verts[:1]):
            if a == b:
                raise ConfigError(
                    "polygon has two identical consecutive vertices",
                    {"vertices": f"repeated vertex {a}"},
                )
        object.__setattr__(self, "vertices", verts)

    def bounds_ok(self, width: int, height: int) -> bool:
        return all(0 <= x <= width and 0 <= y <= height for x, y in self.vertices)

    def translated(self, dx: float, dy: float) -> "RoiPolygon":
        return RoiPolygon(tuple((x + dx, y + dy) for x, y in self.vertices), self.name)


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Boolean raster of the region; immutable after rasterization."""

    bits: np.ndarray
    inside_count: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        bits = bits.copy() if bits.flags.writeable else bits
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        if self.inside_count != int(bits.sum()):
            raise ConfigError("inside_count does not match mask bits")
        if self.inside_count < 1:
            raise ConfigError("mask selects no pixels", {"polygons": "mask selects no pixels"})

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def point_in_polygon(point: tuple[float, float], poly: RoiPolygon) -> bool:
    """Even-odd test: count edges crossed by the horizontal ray from ``point``."""
    px, py = float(point[0]), float(point[1])
    verts = poly.vertices
    inside = False
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        if (y0 <= py) != (y1 <= py):
            x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            if px < x_cross:
                inside = not inside
    return inside


def _rasterize_one(poly: RoiPolygon, width: int, height: int) -> np.ndarray:
    cx = np.arange(width, dtype=np.float64) + 0.5
    cy = np.arange(height, dtype=np.float64) + 0.5
    crossings = np.zeros((height, width), dtype=np.int64)
    verts = poly.vertices
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        straddles = (y0 <= cy) != (y1 <= cy)  # per-row ray test
        if not straddles.any():
            continue
        x_cross = x0 + (cy[straddles] - y0) * (x1 - x0) / (y1 - y0)
        crossings[straddles] += cx[None, :] < x_cross[:, None]
    return (crossings % 2).astype(bool)


def rasterize(polys: RoiPolygon | Iterable[RoiPolygon], width: int, height: int) -> RoiMask:
    """Union one or more polygons into a mask sampled at pixel centers."""
    if isinstance(polys, RoiPolygon):
        polys = [polys]
    polys = list(polys)
    if not polys:
        raise ConfigError("no polygons given", {"polygons": "empty"})
    bits = np.zeros((height, width), dtype=bool)
    for poly in polys:
        if not poly.bounds_ok(width, height):
            raise ConfigError(
                f"polygon {poly.name!r} has vertices outside {width}x{height}",
                {"polygons": f"{poly.name!r} out of bounds for {width}x{height}"},
            )
        bits |= _rasterize_one(poly, width, height)
    count = int(bits.sum())
    if count == 0:
        raise ConfigError(
            "mask selects no pixels (polygon too thin to cover any pixel center)",
            {"polygons": "mask selects no pixels"},
        )
    return RoiMask(bits=bits, inside_count=count)


def mask_apply(frame: Frame, mask: RoiMask) -> np.ndarray:
    """Zero everything outside the mask; the result only feeds counting/statistics."""
    if frame.pixels.shape != mask.bits.shape:
        raise ValueError(
            f"frame {frame.width}x{frame.height} does not match mask {mask.width}x{mask.height}"
        )
    return np.where(mask.bits, frame.pixels, np.uint8(0))


# --- per-view config --------------------------------------------------------

def polygons_from_config(config: dict) -> list[RoiPolygon]:
    """Parse {"source_id": ..., "polygons": [{"name", "vertices"}]} into polygons."""
    try:
        raw = config["polygons"]
    except (KeyError, TypeError):
        raise ConfigError("ROI config missing 'polygons'", {"polygons": "missing"})
    if not isinstance(raw, list) or not raw:
        raise ConfigError("ROI config 'polygons' must be a non-empty list", {"polygons": "empty"})
    polys = []
    for i, entry in enumerate(raw):
        try:
            verts = [(float(x), float(y)) for x, y in entry["vertices"]]
        except (KeyError, TypeError, ValueError):
            raise ConfigError(
                f"polygon #{i} has malformed vertices", {"polygons": f"#{i} malformed vertices"}
            )
        polys.append(RoiPolygon(tuple(verts), name=str(entry.get("name", f"roi{i}"))))
    return polys


def polygons_to_config(polys: Sequence[RoiPolygon], source_id: str = "") -> dict:
    return {
        "source_id": source_id,
        "polygons": [
            {"name": p.name, "vertices": [[x, y] for x, y in p.vertices]} for p in polys
        ],
    }


def load_roi_config(path: Path | str) -> tuple[list[RoiPolygon], str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"ROI config not found: {path}")
    config = json.loads(path.read_text())
    return polygons_from_config(config), str(config.get("source_id", ""))
