"""Synthetic cable scenes with ground truth, for desk-scale validation.

Real drum footage is not distributable, so every detector is exercised against
rendered scenes: a quadratic cable over a flat background, optional sensor
noise and global flicker, and scripted slack events that sag the cable inside
an x-span with a raised-cosine ramp in time. Rendering is seed-deterministic
down to the byte, frame by frame, so parallel rendering cannot reorder noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from cablewatch.ingest import Frame, FrameSequence, SequenceMeta, write_y8

RAMP_FRACTION = 0.1  # raised-cosine ramp occupies this share of an event's span


@dataclass(frozen=True)
class SlackSpec:
    """One scripted slack episode: the cable sags ``sag_px`` inside ``span``."""

    start_frame: int
    end_frame: int
    sag_px: float
    span: tuple[float, float]

    def __post_init__(self):
        if self.end_frame < self.start_frame:
            raise ValueError("slack event ends before it starts")
        if self.sag_px < 0:
            raise ValueError("sag_px must be nonnegative")
        if self.span[1] <= self.span[0]:
            raise ValueError("span must be a nonempty x range")


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    frame_count: int = 300
    fps: float = 30.0
    cable_points: tuple[tuple[float, float], ...] = ((0.0, 118.0), (160.0, 126.0), (319.0, 118.0))
    cable_thickness: float = 3.0
    cable_intensity: float = 200.0
    background_intensity: float = 30.0
    noise_sigma: float = 0.0
    flicker_amplitude: float = 0.0
    flicker_period: float = 50.0
    slack_events: tuple[SlackSpec, ...] = ()
    rng_seed: int = 0
    name: str = "scene"

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "frame_count": self.frame_count,
            "fps": self.fps,
            "cable_points": [list(p) for p in self.cable_points],
            "cable_thickness": self.cable_thickness,
            "cable_intensity": self.cable_intensity,
            "background_intensity": self.background_intensity,
            "noise_sigma": self.noise_sigma,
            "flicker_amplitude": self.flicker_amplitude,
            "flicker_period": self.flicker_period,
            "slack_events": [
                {
                    "start_frame": e.start_frame,
                    "end_frame": e.end_frame,
                    "sag_px": e.sag_px,
                    "span": list(e.span),
                }
                for e in self.slack_events
            ],
            "rng_seed": self.rng_seed,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        events = tuple(
            SlackSpec(
                start_frame=int(e["start_frame"]),
                end_frame=int(e["end_frame"]),
                sag_px=float(e["sag_px"]),
                span=(float(e["span"][0]), float(e["span"][1])),
            )
            for e in data.get("slack_events", [])
        )
        base = cls()
        return cls(
            width=int(data.get("width", base.width)),
            height=int(data.get("height", base.height)),
            frame_count=int(data.get("frame_count", base.frame_count)),
            fps=float(data.get("fps", base.fps)),
            cable_points=tuple(
                (float(x), float(y)) for x, y in data.get("cable_points", base.cable_points)
            ),
            cable_thickness=float(data.get("cable_thickness", base.cable_thickness)),
            cable_intensity=float(data.get("cable_intensity", base.cable_intensity)),
            background_intensity=float(data.get("background_intensity", base.background_intensity)),
            noise_sigma=float(data.get("noise_sigma", base.noise_sigma)),
            flicker_amplitude=float(data.get("flicker_amplitude", base.flicker_amplitude)),
            flicker_period=float(data.get("flicker_period", base.flicker_period)),
            slack_events=events,
            rng_seed=int(data.get("rng_seed", base.rng_seed)),
            name=str(data.get("name", base.name)),
        )


def _quadratic_coeffs(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (3, 2):
        raise ValueError("cable needs exactly 3 control points")
    vander = np.vander(pts[:, 0], 3, increasing=True)
    return np.linalg.solve(vander, pts[:, 1])


def ramp_value(n: int, start: int, end: int) -> float:
    """Raised-cosine envelope over [start, end]; zero at both endpoints."""
    if n < start or n > end or end == start:
        return 0.0
    t = (n - start) / (end - start)
    if t < RAMP_FRACTION:
        return 0.5 * (1.0 - math.cos(math.pi * t / RAMP_FRACTION))
    if t > 1.0 - RAMP_FRACTION:
        return 0.5 * (1.0 - math.cos(math.pi * (1.0 - t) / RAMP_FRACTION))
    return 1.0


def per_frame_sag(spec: SceneSpec) -> np.ndarray:
    """Peak cable displacement per frame (the temporal envelope, in pixels)."""
    sag = np.zeros(spec.frame_count)
    for event in spec.slack_events:
        for n in range(max(0, event.start_frame), min(spec.frame_count - 1, event.end_frame) + 1):
            sag[n] = max(sag[n], event.sag_px * ramp_value(n, event.start_frame, event.end_frame))
    return sag


def ground_truth(spec: SceneSpec) -> dict:
    """Event intervals derived from rendered sag: exactly the frames with sag > 0."""
    sag = per_frame_sag(spec)
    events = []
    start = None
    for n, value in enumerate(sag):
        if value > 0 and start is None:
            start = n
        elif value == 0 and start is not None:
            events.append({"start": start, "end": n - 1, "sag_px": float(sag[start : n].max())})
            start = None
    if start is not None:
        events.append({"start": start, "end": len(sag) - 1, "sag_px": float(sag[start:].max())})
    return {"events": events, "per_frame_sag": [float(v) for v in sag]}


def _render_frame(
    spec: SceneSpec,
    n: int,
    coeffs: np.ndarray,
    xs: np.ndarray,
    rows: np.ndarray,
) -> np.ndarray:
    curve = coeffs[0] + coeffs[1] * xs + coeffs[2] * xs * xs
    displaced = curve.copy()
    for event in spec.slack_events:
        amp = event.sag_px * ramp_value(n, event.start_frame, event.end_frame)
        if amp <= 0:
            continue
        x0, x1 = event.span
        inside = (xs >= x0) & (xs <= x1)
        profile = np.sin(math.pi * (xs[inside] - x0) / (x1 - x0)) ** 2
        displaced[inside] += amp * profile
    coverage = np.clip(
        spec.cable_thickness / 2.0 + 0.5 - np.abs(rows[:, None] - displaced[None, :]), 0.0, 1.0
    )
    values = spec.background_intensity + (spec.cable_intensity - spec.background_intensity) * coverage
    if spec.flicker_amplitude:
        values = values * (
            1.0 + spec.flicker_amplitude * math.sin(2.0 * math.pi * n / spec.flicker_period)
        )
    if spec.noise_sigma > 0:
        rng = np.random.default_rng((spec.rng_seed, n))
        values = values + rng.normal(0.0, spec.noise_sigma, size=values.shape)
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def _prepare_geometry(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coeffs = _quadratic_coeffs(spec.cable_points)
    xs = np.arange(spec.width, dtype=np.float64)
    rows = np.arange(spec.height, dtype=np.float64)
    curve = coeffs[0] + coeffs[1] * xs + coeffs[2] * xs * xs
    max_sag = max((e.sag_px for e in spec.slack_events), default=0.0)
    margin = spec.cable_thickness / 2.0 + 1.0
    if curve.min() - margin < 0 or curve.max() + max_sag + margin > spec.height:
        raise ValueError("cable (including sag) leaves the image bounds")
    return coeffs, xs, rows


def render_scene(spec: SceneSpec) -> tuple[np.ndarray, dict]:
    """Render all frames (n, h, w) uint8 plus the ground-truth dict."""
    coeffs, xs, rows = _prepare_geometry(spec)
    frames = np.empty((spec.frame_count, spec.height, spec.width), dtype=np.uint8)
    for n in range(spec.frame_count):
        frames[n] = _render_frame(spec, n, coeffs, xs, rows)
    return frames, ground_truth(spec)


def iter_frames(spec: SceneSpec) -> Iterator[Frame]:
    """Render lazily, one Frame at a time (identical bytes to render_scene)."""
    from cablewatch.ingest import timestamp_for

    coeffs, xs, rows = _prepare_geometry(spec)
    for n in range(spec.frame_count):
        yield Frame(
            index=n,
            timestamp_ms=timestamp_for(n, spec.fps),
            pixels=_render_frame(spec, n, coeffs, xs, rows),
        )


def as_sequence(spec: SceneSpec) -> FrameSequence:
    """Expose a scene through the same handle interface as on-disk footage."""
    coeffs, xs, rows = _prepare_geometry(spec)
    meta = SequenceMeta(
        frame_count=spec.frame_count,
        width=spec.width,
        height=spec.height,
        fps=spec.fps,
        source_id=spec.name,
    )

    def loader():
        for n in range(spec.frame_count):
            yield _render_frame(spec, n, coeffs, xs, rows)

    return FrameSequence(meta, loader)


def write_scene(spec: SceneSpec, out_dir: Path | str) -> dict[str, Path]:
    """Write <name>.y8, <name>.json sidecar, and <name>_truth.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames, truth = render_scene(spec)
    stem = spec.name.lower()
    y8 = out_dir / f"{stem}.y8"
    write_y8(y8, frames, spec.fps, source_id=spec.name)
    truth_path = out_dir / f"{stem}_truth.json"
    truth_path.write_text(json.dumps(truth, sort_keys=True) + "\n")
    return {"y8": y8, "sidecar": y8.with_suffix(".json"), "truth": truth_path}


# --- the standard validation scenarios ---------------------------------------

def scenario_suite() -> dict[str, SceneSpec]:
    """Deterministic named scenes.

    S1 one medium slack episode; S2 three propagating episodes then a severe
    wide one; S3 sensor noise only; S4 global flicker nuisance; S5 slack
    confined outside the default region of interest.
    """
    base = SceneSpec(noise_sigma=2.0)
    return {
        "S1": replace(
            base,
            name="S1",
            frame_count=330,
            rng_seed=101,
            slack_events=(SlackSpec(230, 310, 12.0, (70.0, 190.0)),),
        ),
        "S2": replace(
            base,
            name="S2",
            frame_count=760,
            rng_seed=102,
            slack_events=(
                SlackSpec(150, 210, 8.0, (50.0, 120.0)),
                SlackSpec(320, 380, 9.0, (90.0, 160.0)),
                SlackSpec(490, 550, 10.0, (130.0, 200.0)),
                SlackSpec(660, 750, 40.0, (45.0, 200.0)),
            ),
        ),
        "S3": replace(base, name="S3", frame_count=2000, rng_seed=103, noise_sigma=4.0),
        "S4": replace(
            base,
            name="S4",
            frame_count=600,
            rng_seed=104,
            flicker_amplitude=0.04,
            flicker_period=37.0,
        ),
        "S5": replace(
            base,
            name="S5",
            frame_count=330,
            rng_seed=105,
            slack_events=(SlackSpec(230, 310, 15.0, (230.0, 300.0)),),
        ),
    }


def scenario_roi(name: str = "", cover_motion: bool = False) -> dict:
    """ROI config for the standard scenes: the cable's central stretch.

    ``cover_motion`` widens the region to include S5's out-of-region span.
    """
    right = 310.0 if cover_motion else 200.0
    return {
        "source_id": name or "synthetic",
        "polygons": [
            {
                "name": "drum",
                "vertices": [[40.0, 75.0], [right, 75.0], [right, 185.0], [40.0, 185.0]],
            }
        ],
    }
