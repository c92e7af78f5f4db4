"""Core slack detector: lagged background subtraction, counting, scoring, events.

Per frame the detector blurs, differences against a reference (the previous
frame during warmup, a lagged frame or lagged mean afterwards), thresholds the
absolute difference inside the ROI, counts changed pixels, and smooths the
counts with a running average. Score threshold crossings with hysteresis and a
minimum duration become slack events.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cablewatch.alt_detect import EdgeFitDetector, EdgeFitParams, GmmDetector, GmmParams
from cablewatch.errors import ConfigError
from cablewatch.ingest import Frame, FrameSequence
from cablewatch.preprocess import BlurSpec, apply_blur
from cablewatch.roi import RoiMask, RoiPolygon, rasterize

DETECTOR_NAMES = ("diff", "gmm", "edgefit")


@dataclass(frozen=True)
class ReferencePolicy:
    """Which earlier frame the current one is subtracted against.

    The first ``warmup_frames`` frames difference against their immediate
    predecessor; later frames reach back ``lag`` frames (scene change is slow,
    so a short lag would hide gradual slack). ``lagged_mean`` replaces the
    single lagged frame with the mean of the last ``lag`` frames.
    """

    warmup_frames: int = 100
    lag: int = 100
    mode: str = "lagged_frame"

    def __post_init__(self):
        errors = {}
        if self.warmup_frames < 1:
            errors["reference.warmup_frames"] = "warmup_frames must be positive"
        if self.lag < 1:
            errors["reference.lag"] = "lag must be positive"
        elif self.lag > self.warmup_frames + 1:
            # Keeps every reference index nonnegative.
            errors["reference.lag"] = "lag may exceed warmup_frames by at most 1"
        if self.mode not in ("lagged_frame", "lagged_mean"):
            errors["reference.mode"] = f"unknown mode {self.mode!r}"
        if errors:
            raise ConfigError("invalid reference policy", errors)


def reference_index(n: int, policy: ReferencePolicy) -> int:
    """Index of the reference frame for frame ``n`` (lagged_frame mode)."""
    if n < 1:
        raise ValueError("frame 0 has no reference")
    if n <= policy.warmup_frames:
        return n - 1
    return n - policy.lag


def reference_frame(buffer: Sequence[Frame], n: int, policy: ReferencePolicy) -> Frame:
    """Resolve the reference from a buffer holding the blurred frames
    ``n - len(buffer) .. n - 1`` (most recent last)."""
    if n < 1:
        raise ValueError("frame 0 has no reference")
    if not buffer:
        raise ValueError("empty history buffer")

    def frame_at(idx: int) -> Frame:
        offset = idx - (n - len(buffer))
        if not 0 <= offset < len(buffer):
            raise ValueError(
                f"history buffer too small: frame {idx} needed for frame {n}, "
                f"buffer holds {n - len(buffer)}..{n - 1}"
            )
        return buffer[offset]

    if n <= policy.warmup_frames or policy.mode == "lagged_frame":
        return frame_at(reference_index(n, policy))
    # lagged_mean: pixelwise mean of the `lag` frames preceding n, rounded.
    frames = [frame_at(i) for i in range(n - policy.lag, n)]
    acc = np.zeros(frames[0].pixels.shape, dtype=np.float64)
    for f in frames:
        acc += f.pixels
    mean = np.floor(acc / len(frames) + 0.5).astype(np.uint8)
    return Frame(index=frames[-1].index, timestamp_ms=frames[-1].timestamp_ms, pixels=mean)


@dataclass(frozen=True, eq=False)
class ChangeMap:
    """Changed-pixel raster for one frame; bits are true only inside the ROI."""

    frame_index: int
    bits: np.ndarray
    count: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        bits = bits.copy() if bits.flags.writeable else bits
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        if self.count != int(bits.sum()):
            raise ValueError("count does not match bits")


def subtract_and_threshold(
    current: Frame, reference: Frame, mask: RoiMask, tau: int
) -> ChangeMap:
    """Mark in-mask pixels whose absolute difference reaches ``tau``."""
    if current.pixels.shape != reference.pixels.shape:
        raise ValueError("current and reference dimensions differ")
    if current.pixels.shape != mask.bits.shape:
        raise ValueError("frame dimensions do not match mask")
    diff = np.abs(current.pixels.astype(np.int16) - reference.pixels.astype(np.int16))
    bits = mask.bits & (diff >= tau)
    return ChangeMap(frame_index=current.index, bits=bits, count=int(np.count_nonzero(bits)))


# --- scoring -----------------------------------------------------------------

@dataclass(frozen=True)
class ScoreRecord:
    frame_index: int
    timestamp_ms: int
    count: float  # int for pixel-count detectors, float for edge deviation
    score: float


class ScoreSeries:
    """Per-frame counts and their running average over the last ``window`` counts.

    One writer; readers take :meth:`snapshot`, which is a consistent prefix.
    """

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be positive")
        self.window = window
        self._records: list[ScoreRecord] = []
        self._tail: deque = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[ScoreRecord]:
        return self._records

    def append(self, frame_index: int, timestamp_ms: int, count) -> ScoreRecord:
        if self._records and frame_index <= self._records[-1].frame_index:
            raise ValueError(
                f"out-of-order frame {frame_index} after {self._records[-1].frame_index}"
            )
        self._tail.append(count)
        score = float(sum(self._tail)) / len(self._tail)
        record = ScoreRecord(frame_index, timestamp_ms, count, score)
        self._records.append(record)
        return record

    def snapshot(self) -> tuple[ScoreRecord, ...]:
        return tuple(self._records)


@dataclass(frozen=True)
class SlackEvent:
    """A contiguous interval where the score stayed above the hysteresis band."""

    id: int
    start_frame: int
    end_frame: int
    peak_score: float
    peak_frame: int
    start_ms: int
    end_ms: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "peak_score": self.peak_score,
            "peak_frame": self.peak_frame,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlackEvent":
        return cls(
            id=int(d["id"]),
            start_frame=int(d["start_frame"]),
            end_frame=int(d["end_frame"]),
            peak_score=float(d["peak_score"]),
            peak_frame=int(d["peak_frame"]),
            start_ms=int(d["start_ms"]),
            end_ms=int(d["end_ms"]),
        )


class EventTracker:
    """Hysteresis automaton: open at score >= on, close when score < off.

    Events shorter than ``min_frames`` are dropped. The peak is the earliest
    frame attaining the maximum score inside the event.
    """

    def __init__(self, score_on: float, score_off: float, min_frames: int):
        self.score_on = score_on
        self.score_off = score_off
        self.min_frames = min_frames
        self.open_since: ScoreRecord | None = None
        self.peak: ScoreRecord | None = None
        self.last: ScoreRecord | None = None
        self._next_id = 1

    @property
    def is_open(self) -> bool:
        return self.open_since is not None

    def _close(self) -> SlackEvent | None:
        start, end, peak = self.open_since, self.last, self.peak
        self.open_since = self.peak = None
        if end.frame_index - start.frame_index + 1 < self.min_frames:
            return None
        event = SlackEvent(
            id=self._next_id,
            start_frame=start.frame_index,
            end_frame=end.frame_index,
            peak_score=peak.score,
            peak_frame=peak.frame_index,
            start_ms=start.timestamp_ms,
            end_ms=end.timestamp_ms,
        )
        self._next_id += 1
        return event

    def update(self, record: ScoreRecord) -> SlackEvent | None:
        """Feed one record; returns an event when one closes at this record."""
        closed = None
        if self.is_open:
            if record.score < self.score_off:
                closed = self._close()
            else:
                if record.score > self.peak.score:
                    self.peak = record
                self.last = record
                return None
        if record.score >= self.score_on:
            self.open_since = record
            self.peak = record
        self.last = record
        return closed

    def finish(self) -> SlackEvent | None:
        """Close any still-open event at the last seen record."""
        if self.is_open:
            return self._close()
        return None


def extract_events(
    series: ScoreSeries | Iterable[ScoreRecord],
    score_on: float,
    score_off: float,
    min_event_frames: int,
) -> list[SlackEvent]:
    records = series.snapshot() if isinstance(series, ScoreSeries) else tuple(series)
    tracker = EventTracker(score_on, score_off, min_event_frames)
    events = []
    for record in records:
        closed = tracker.update(record)
        if closed is not None:
            events.append(closed)
    closed = tracker.finish()
    if closed is not None:
        events.append(closed)
    return events


# --- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    detector: str = "diff"
    blur: BlurSpec = field(default_factory=BlurSpec)
    tau: int = 25
    reference: ReferencePolicy = field(default_factory=ReferencePolicy)
    avg_window: int = 15
    score_on: float = 50.0
    score_off: float = 25.0
    min_event_frames: int = 3
    gmm: GmmParams = field(default_factory=GmmParams)
    edgefit: EdgeFitParams = field(default_factory=EdgeFitParams)

    def __post_init__(self):
        errors = {}
        if self.detector not in DETECTOR_NAMES:
            errors["detector"] = f"detector must be one of {', '.join(DETECTOR_NAMES)}"
        if not 1 <= self.tau <= 255:
            errors["tau"] = "tau must be in [1, 255]"
        if self.avg_window < 1:
            errors["avg_window"] = "avg_window must be positive"
        if self.score_off > self.score_on:
            errors["score_off"] = "score_off must not exceed score_on"
        if self.min_event_frames < 1:
            errors["min_event_frames"] = "min_event_frames must be positive"
        if errors:
            raise ConfigError("invalid detector config", errors)

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "blur": {
                "kind": self.blur.kind,
                "radius": self.blur.radius,
                "sigma_spatial": self.blur.sigma_spatial,
                "sigma_range": self.blur.sigma_range,
            },
            "tau": self.tau,
            "reference": {
                "warmup_frames": self.reference.warmup_frames,
                "lag": self.reference.lag,
                "mode": self.reference.mode,
            },
            "avg_window": self.avg_window,
            "score_on": self.score_on,
            "score_off": self.score_off,
            "min_event_frames": self.min_event_frames,
            "gmm": {
                "components": self.gmm.components,
                "learning_rate": self.gmm.learning_rate,
                "background_ratio": self.gmm.background_ratio,
                "match_distance": self.gmm.match_distance,
                "variance_floor": self.gmm.variance_floor,
                "initial_variance": self.gmm.initial_variance,
                "replacement_weight": self.gmm.replacement_weight,
            },
            "edgefit": {
                "degree": self.edgefit.degree,
                "canny_low": self.edgefit.canny_low,
                "canny_high": self.edgefit.canny_high,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", {"config": "not an object"})
        known = {
            "detector", "blur", "tau", "reference", "avg_window",
            "score_on", "score_off", "min_event_frames", "gmm", "edgefit",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(
                "unknown config fields", {k: "unknown field" for k in sorted(unknown)}
            )
        base = cls()
        try:
            blur = replace(base.blur, **data.get("blur", {}))
            reference = replace(base.reference, **data.get("reference", {}))
            gmm = replace(base.gmm, **data.get("gmm", {}))
            edgefit = replace(base.edgefit, **data.get("edgefit", {}))
            return cls(
                detector=data.get("detector", base.detector),
                blur=blur,
                tau=int(data.get("tau", base.tau)),
                reference=reference,
                avg_window=int(data.get("avg_window", base.avg_window)),
                score_on=float(data.get("score_on", base.score_on)),
                score_off=float(data.get("score_off", base.score_off)),
                min_event_frames=int(data.get("min_event_frames", base.min_event_frames)),
                gmm=gmm,
                edgefit=edgefit,
            )
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}", {"config": str(exc)}) from exc
        except (ValueError,) as exc:
            raise ConfigError(f"malformed config value: {exc}", {"config": str(exc)}) from exc

    @classmethod
    def from_json(cls, text: str) -> "DetectorConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", {"config": "invalid JSON"}) from exc

    @classmethod
    def load(cls, path: Path | str) -> "DetectorConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config not found: {path}")
        return cls.from_json(path.read_text())


# --- score CSV ----------------------------------------------------------------

SCORE_CSV_HEADER = "frame,timestamp_ms,count,score,event_id"


def _format_count(count) -> str:
    if isinstance(count, float) and not count.is_integer():
        return repr(count)
    return str(int(count))


def format_score_csv(records: Iterable[ScoreRecord], events: Sequence[SlackEvent] = ()) -> str:
    """Render records as CSV; rows inside an event interval carry its id."""
    intervals = [(e.start_frame, e.end_frame, e.id) for e in events]
    lines = [SCORE_CSV_HEADER]
    for r in records:
        event_id = ""
        for a, b, eid in intervals:
            if a <= r.frame_index <= b:
                event_id = str(eid)
                break
        lines.append(
            f"{r.frame_index},{r.timestamp_ms},{_format_count(r.count)},{r.score!r},{event_id}"
        )
    return "\n".join(lines) + "\n"


def parse_score_csv(text: str) -> list[ScoreRecord]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != SCORE_CSV_HEADER:
        raise ValueError("missing or unexpected score CSV header")
    records = []
    for ln in lines[1:]:
        frame, ts, count, score, _event = ln.split(",")
        value = float(count) if "." in count or "e" in count else int(count)
        records.append(ScoreRecord(int(frame), int(ts), value, float(score)))
    return records


# --- pipeline -----------------------------------------------------------------

class DiffDetector:
    """The lagged-difference change counter (blur, subtract, threshold, count)."""

    name = "diff"

    def __init__(self, config: DetectorConfig, mask: RoiMask):
        self.config = config
        self.mask = mask
        # Holds the last `lag` blurred frames; enough for warmup (lag 1),
        # the lagged reference, and the lagged mean.
        self._history: deque[Frame] = deque(maxlen=config.reference.lag)
        self._frames_seen = 0

    def set_mask(self, mask: RoiMask) -> None:
        self.mask = mask

    def set_config(self, config: DetectorConfig) -> None:
        if config.reference.lag != self.config.reference.lag:
            history = list(self._history)[-config.reference.lag :]
            self._history = deque(history, maxlen=config.reference.lag)
        self.config = config

    def process(self, frame: Frame):
        blurred = apply_blur(frame, self.config.blur)
        n = self._frames_seen
        self._frames_seen += 1
        if n == 0:
            self._history.append(blurred)
            return None
        reference = reference_frame(self._history, n, self.config.reference)
        change = subtract_and_threshold(blurred, reference, self.mask, self.config.tau)
        self._history.append(blurred)
        return change.count, change.bits


def _make_detector(config: DetectorConfig, mask: RoiMask):
    if config.detector == "diff":
        return DiffDetector(config, mask)
    if config.detector == "gmm":
        return GmmDetector(config.gmm, config.blur, mask)
    if config.detector == "edgefit":
        return EdgeFitDetector(config.edgefit, config.blur, mask)
    raise ConfigError(f"unknown detector {config.detector!r}", {"detector": "unknown"})


@dataclass
class EventSnapshot:
    """Raw frame and change bits at an event's peak, kept for overlay export."""

    frame: Frame
    change: ChangeMap


@dataclass
class PipelineResult:
    config: DetectorConfig
    series: ScoreSeries
    events: list[SlackEvent]
    peaks: dict[int, EventSnapshot]
    frame_count: int


class Pipeline:
    """Streams frames through one detector, scoring and tracking events online.

    Memory stays bounded: the detector keeps at most ``lag`` blurred frames,
    and only per-event peak snapshots are retained. Configuration and mask may
    be swapped between ``process`` calls; the swap never splits a frame.
    """

    def __init__(self, config: DetectorConfig, mask: RoiMask):
        self.config = config
        self.mask = mask
        self.detector = _make_detector(config, mask)
        self.series = ScoreSeries(config.avg_window)
        self.tracker = EventTracker(config.score_on, config.score_off, config.min_event_frames)
        self.events: list[SlackEvent] = []
        self.peaks: dict[int, EventSnapshot] = {}
        self.frame_count = 0
        self.last_change: ChangeMap | None = None
        self._open_peak: EventSnapshot | None = None

    def set_config(self, config: DetectorConfig) -> None:
        """Swap tunables; takes effect from the next frame.

        Changing the detector kind rebuilds detector state; tau, thresholds and
        blur apply in place. The scoring window length applies to new records.
        """
        if config.detector != self.config.detector:
            self.detector = _make_detector(config, self.mask)
        elif isinstance(self.detector, DiffDetector):
            self.detector.set_config(config)
        elif config.detector == "gmm" and config.gmm != self.config.gmm:
            self.detector = _make_detector(config, self.mask)
        elif config.detector == "edgefit" and config.edgefit != self.config.edgefit:
            self.detector = _make_detector(config, self.mask)
        else:
            self.detector.blur = config.blur
        if config.avg_window != self.config.avg_window:
            tail = deque(self.series._tail, maxlen=config.avg_window)
            self.series.window = config.avg_window
            self.series._tail = tail
        self.tracker.score_on = config.score_on
        self.tracker.score_off = config.score_off
        self.tracker.min_frames = config.min_event_frames
        self.config = config

    def set_mask(self, mask: RoiMask, polygons: Sequence[RoiPolygon] | None = None) -> None:
        if mask.bits.shape != self.mask.bits.shape:
            raise ConfigError("mask dimensions do not match the stream")
        self.mask = mask
        self.detector.set_mask(mask)

    def process(self, frame: Frame) -> ScoreRecord | None:
        """Run one frame; returns its score record (None for bootstrap frames)."""
        result = self.detector.process(frame)
        self.frame_count += 1
        if result is None:
            return None
        value, bits = result
        change = ChangeMap(frame_index=frame.index, bits=bits, count=int(np.count_nonzero(bits)))
        self.last_change = change
        record = self.series.append(frame.index, frame.timestamp_ms, value)

        closed = self.tracker.update(record)
        if self.tracker.is_open and self.tracker.peak.frame_index == record.frame_index:
            self._open_peak = EventSnapshot(frame=frame, change=change)
        self._register_close(closed)
        if not self.tracker.is_open:
            self._open_peak = None
        return record

    def _register_close(self, closed: SlackEvent | None) -> None:
        if closed is None:
            return
        self.events.append(closed)
        if self._open_peak is not None and (
            self._open_peak.change.frame_index == closed.peak_frame
        ):
            self.peaks[closed.id] = self._open_peak

    def finish(self) -> None:
        self._register_close(self.tracker.finish())
        self._open_peak = None

    def result(self) -> PipelineResult:
        return PipelineResult(
            config=self.config,
            series=self.series,
            events=list(self.events),
            peaks=dict(self.peaks),
            frame_count=self.frame_count,
        )


def run_pipeline(
    source: FrameSequence | Iterable[Frame],
    roi: RoiPolygon | Sequence[RoiPolygon] | RoiMask,
    config: DetectorConfig,
) -> PipelineResult:
    """Run the full flow over a frame source and return series, events, peaks."""
    frames = iter(source)
    try:
        first = next(frames)
    except StopIteration:
        raise ValueError("empty frame source")
    if isinstance(roi, RoiMask):
        mask = roi
    else:
        mask = rasterize(roi, first.width, first.height)
    pipeline = Pipeline(config, mask)
    pipeline.process(first)
    for frame in frames:
        pipeline.process(frame)
    pipeline.finish()
    return pipeline.result()
