"""Operator-facing output: red change overlays, ROI outlines, run exports."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from cablewatch.change_detect import ChangeMap, PipelineResult, format_score_csv
from cablewatch.ingest import Frame, round_half_up
from cablewatch.roi import RoiPolygon

ROI_OUTLINE_COLOR = (80, 200, 255)
CHANGED_CHANNEL_KEEP = 0.3  # G/B retain this share of luminance under the red


def overlay_changes(frame: Frame, change: ChangeMap) -> np.ndarray:
    """Grayscale frame as RGB with changed pixels tinted red.

    Changed pixels keep a fraction of their luminance in G/B so structure stays
    visible on dark regions instead of turning into flat red.
    """
    if change.bits.shape != frame.pixels.shape:
        raise ValueError("change map dimensions do not match frame")
    v = frame.pixels
    rgb = np.repeat(v[:, :, None], 3, axis=2).astype(np.uint8)
    dimmed = round_half_up(v.astype(np.float64) * CHANGED_CHANNEL_KEEP).astype(np.uint8)
    rgb[change.bits, 0] = 255
    rgb[change.bits, 1] = dimmed[change.bits]
    rgb[change.bits, 2] = dimmed[change.bits]
    return rgb


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line pixels from (x0, y0) to (x1, y1), endpoints included."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def draw_roi_outline(raster: np.ndarray, poly: RoiPolygon) -> np.ndarray:
    """Draw the polygon's closed outline (1 px) in the accent color."""
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise ValueError("expected an RGB raster")
    out = raster.copy()
    h, w = out.shape[:2]
    verts = [(int(round_half_up(np.float64(x))), int(round_half_up(np.float64(y)))) for x, y in poly.vertices]
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        for x, y in bresenham_line(x0, y0, x1, y1):
            if 0 <= x < w and 0 <= y < h:
                out[y, x] = ROI_OUTLINE_COLOR
    return out


def write_png(path: Path | str, raster: np.ndarray) -> None:
    """Fixed encoder settings so identical rasters produce identical bytes."""
    img = Image.fromarray(raster)
    img.save(path, format="PNG", optimize=False, compress_level=6)


def export_run(
    result: PipelineResult,
    out_dir: Path | str,
    polygons: Sequence[RoiPolygon] = (),
) -> dict[str, Path]:
    """Write scores.csv, events.json, and one peak overlay PNG per event."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "scores.csv"
        csv_path.write_text(format_score_csv(result.series.snapshot(), result.events))
        events_path = out_dir / "events.json"
        events_path.write_text(
            json.dumps([e.to_dict() for e in result.events], sort_keys=True, indent=2) + "\n"
        )
        paths = {"scores": csv_path, "events": events_path}
        for event in result.events:
            snap = result.peaks.get(event.id)
            if snap is None:
                continue
            raster = overlay_changes(snap.frame, snap.change)
            for poly in polygons:
                raster = draw_roi_outline(raster, poly)
            png_path = out_dir / f"event_{event.id}_frame_{event.peak_frame}.png"
            write_png(png_path, raster)
            paths[f"event_{event.id}"] = png_path
        return paths
    except OSError as exc:
        raise OSError(f"export to {out_dir} failed: {exc}") from exc
