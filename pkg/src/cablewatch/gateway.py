"""HTTP gateway: replays footage through a live pipeline for the operator console.

One runner thread owns the pipeline; handlers read snapshots and enqueue
mutations, which the runner applies between frames so no frame ever sees a
half-applied configuration. Every accepted mutation lands in the audit log.
"""

from __future__ import annotations

import io
import json
import queue
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Iterator

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from PIL import Image

from cablewatch.change_detect import (
    DetectorConfig,
    Pipeline,
    SlackEvent,
    format_score_csv,
)
from cablewatch.errors import ConfigError
from cablewatch.ingest import Frame, FrameSequence
from cablewatch.render import draw_roi_outline, overlay_changes
from cablewatch.roi import (
    RoiPolygon,
    polygons_from_config,
    polygons_to_config,
    rasterize,
)

FRAME_CACHE_SIZE = 512


class PipelineRunner:
    """Drives one pipeline over a frame sequence, one `step()` per frame.

    `run()` loops `step()` with replay pacing on a worker thread; tests may
    call `step()`/`step_until()` directly for deterministic interleaving.
    """

    def __init__(
        self,
        sequence: FrameSequence,
        polygons: list[RoiPolygon],
        config: DetectorConfig,
        speed: float = 1.0,
        source_id: str = "",
        audit_path: Path | str | None = None,
    ):
        meta = sequence.meta
        self.sequence = sequence
        self.speed = speed
        self.source_id = source_id or meta.source_id
        mask = rasterize(polygons, meta.width, meta.height)
        self.pipeline = Pipeline(config, mask)
        self._lock = threading.Lock()
        self._iter: Iterator[Frame] = iter(sequence)
        self.accepted_config = config
        self.accepted_polygons = list(polygons)
        self._pending_config: DetectorConfig | None = None
        self._pending_polygons: list[RoiPolygon] | None = None
        self._frames: dict[int, Frame] = {}
        self._changes: dict[int, np.ndarray] = {}
        self._subscribers: list[queue.SimpleQueue] = []
        self.audit: list[dict] = []
        self._audit_path = Path(audit_path) if audit_path else None
        self.finished = threading.Event()
        self._stop = threading.Event()

    # -- mutations (called from HTTP handlers) --------------------------------

    def _audit_entry(self, field: str, old, new) -> None:
        entry = {"ts_ms": int(time.time() * 1000), "field": field, "old": old, "new": new}
        self.audit.append(entry)
        if self._audit_path:
            with open(self._audit_path, "a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def submit_config(self, config: DetectorConfig) -> None:
        with self._lock:
            old, new = self.accepted_config.to_dict(), config.to_dict()
            for key in new:
                if old[key] != new[key]:
                    self._audit_entry(key, old[key], new[key])
            self.accepted_config = config
            self._pending_config = config

    def submit_roi(self, polygons: list[RoiPolygon]) -> None:
        meta = self.sequence.meta
        rasterize(polygons, meta.width, meta.height)  # validate before accepting
        with self._lock:
            self._audit_entry(
                "roi",
                polygons_to_config(self.accepted_polygons, self.source_id),
                polygons_to_config(polygons, self.source_id),
            )
            self.accepted_polygons = list(polygons)
            self._pending_polygons = list(polygons)

    def mark(self, frame: int, label: str) -> dict:
        with self._lock:
            self._audit_entry("mark", None, {"frame": frame, "label": label})
            return self.audit[-1]

    # -- frame loop ------------------------------------------------------------

    def _apply_pending(self) -> None:
        with self._lock:
            if self._pending_config is not None:
                self.pipeline.set_config(self._pending_config)
                self._pending_config = None
            if self._pending_polygons is not None:
                meta = self.sequence.meta
                mask = rasterize(self._pending_polygons, meta.width, meta.height)
                self.pipeline.set_mask(mask, self._pending_polygons)
                self._pending_polygons = None

    def step(self) -> bool:
        """Process one frame; returns False once the sequence is exhausted."""
        if self.finished.is_set():
            return False
        try:
            frame = next(self._iter)
        except StopIteration:
            self._finish()
            return False
        self._apply_pending()
        record = self.pipeline.process(frame)
        with self._lock:
            self._frames[frame.index] = frame
            if record is not None and self.pipeline.last_change is not None:
                self._changes[frame.index] = self.pipeline.last_change.bits
            evict = frame.index - FRAME_CACHE_SIZE
            self._frames.pop(evict, None)
            self._changes.pop(evict, None)
        if record is not None:
            payload = {
                "frame": record.frame_index,
                "count": record.count,
                "score": record.score,
                "event_open": self.pipeline.tracker.is_open,
            }
            for sub in list(self._subscribers):
                sub.put(payload)
        return True

    def step_until(self, frame_index: int) -> None:
        while self.pipeline.frame_count <= frame_index:
            if not self.step():
                break

    def _finish(self) -> None:
        if not self.finished.is_set():
            self.pipeline.finish()
            self.finished.set()
            for sub in list(self._subscribers):
                sub.put(None)

    def run(self) -> None:
        delay = 0.0
        meta = self.sequence.meta
        if self.speed > 0:
            delay = 1.0 / (meta.fps * self.speed)
        while not self._stop.is_set():
            if not self.step():
                break
            if delay:
                time.sleep(delay)
        self._finish()

    def stop(self) -> None:
        self._stop.set()
        self._finish()

    # -- reader snapshots --------------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            records = self.pipeline.series.snapshot()
            return {
                "frame": self.pipeline.frame_count,
                "detector": self.accepted_config.detector,
                "events_open": 1 if self.pipeline.tracker.is_open else 0,
                "last_score": records[-1].score if records else None,
            }

    def events_snapshot(self, include_open: bool = False) -> list[SlackEvent]:
        with self._lock:
            events = list(self.pipeline.events)
            tracker = self.pipeline.tracker
            if include_open and tracker.is_open:
                events.append(
                    SlackEvent(
                        id=len(self.pipeline.events) + 1,
                        start_frame=tracker.open_since.frame_index,
                        end_frame=tracker.last.frame_index,
                        peak_score=tracker.peak.score,
                        peak_frame=tracker.peak.frame_index,
                        start_ms=tracker.open_since.timestamp_ms,
                        end_ms=tracker.last.timestamp_ms,
                    )
                )
            return events

    def frame_png(self, index: int, overlay: bool) -> bytes | None:
        with self._lock:
            frame = self._frames.get(index)
            if frame is None:
                snap = None
                for eid, s in self.pipeline.peaks.items():
                    if s.frame.index == index:
                        snap = s
                        break
                if snap is None:
                    return None
                frame = snap.frame
                bits = snap.change.bits
            else:
                bits = self._changes.get(index)
            polygons = list(self.accepted_polygons)
        if overlay:
            if bits is None:
                bits = np.zeros(frame.pixels.shape, dtype=bool)
            from cablewatch.change_detect import ChangeMap

            raster = overlay_changes(frame, ChangeMap(index, bits, int(bits.sum())))
            for poly in polygons:
                raster = draw_roi_outline(raster, poly)
            img = Image.fromarray(raster)
        else:
            img = Image.fromarray(frame.pixels)
        buf = io.BytesIO()
        img.save(buf, format="PNG", optimize=False, compress_level=6)
        return buf.getvalue()

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._lock:
            self._subscribers.append(q)
            if self.finished.is_set():
                q.put(None)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


def _config_error_response(exc: ConfigError) -> JSONResponse:
    errors = exc.field_errors or {"config": str(exc)}
    return JSONResponse(status_code=422, content={"errors": errors})


def create_app(runner: PipelineRunner, autostart: bool = False, ui_dir: str | None = None) -> FastAPI:
    thread: threading.Thread | None = None

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        nonlocal thread
        if autostart:
            thread = threading.Thread(target=runner.run, name="pipeline", daemon=True)
            thread.start()
        yield
        runner.stop()

    app = FastAPI(title="cablewatch gateway", lifespan=lifespan)
    app.state.runner = runner

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/api/status")
    def get_status():
        return runner.status()

    @app.get("/api/config")
    def get_config():
        return runner.accepted_config.to_dict()

    @app.put("/api/config")
    async def put_config(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse(status_code=422, content={"errors": {"config": "invalid JSON"}})
        try:
            config = DetectorConfig.from_dict(body)
        except ConfigError as exc:
            return _config_error_response(exc)
        runner.submit_config(config)
        return config.to_dict()

    @app.get("/api/roi")
    def get_roi():
        return polygons_to_config(runner.accepted_polygons, runner.source_id)

    @app.put("/api/roi")
    async def put_roi(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse(status_code=422, content={"errors": {"roi": "invalid JSON"}})
        try:
            polygons = polygons_from_config(body)
            runner.submit_roi(polygons)
        except ConfigError as exc:
            return _config_error_response(exc)
        return polygons_to_config(runner.accepted_polygons, runner.source_id)

    @app.get("/api/events")
    def get_events():
        return [e.to_dict() for e in runner.events_snapshot(include_open=True)]

    @app.get("/api/scores")
    def get_scores(
        from_frame: int = Query(default=0, alias="from"),
        to_frame: int | None = Query(default=None, alias="to"),
    ):
        records = runner.pipeline.series.snapshot()
        events = runner.events_snapshot(include_open=True)
        selected = [
            r
            for r in records
            if r.frame_index >= from_frame and (to_frame is None or r.frame_index <= to_frame)
        ]
        return Response(content=format_score_csv(selected, events), media_type="text/csv")

    @app.get("/api/frame/{index}")
    def get_frame(index: int, overlay: bool = False):
        png = runner.frame_png(index, overlay)
        if png is None:
            return JSONResponse(status_code=404, content={"error": f"frame {index} not cached"})
        return Response(content=png, media_type="image/png")

    @app.get("/api/stream")
    def get_stream():
        q = runner.subscribe()

        def gen():
            try:
                while True:
                    item = q.get()
                    if item is None:
                        return
                    yield f"data: {json.dumps(item, sort_keys=True)}\n\n"
            finally:
                runner.unsubscribe(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.post("/api/mark")
    def post_mark(frame: int, label: str = ""):
        return runner.mark(frame, label)

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(args) -> int:
    """CLI driver: build the runner from args and serve over HTTP."""
    import uvicorn

    from cablewatch.cli import resolve_input
    from cablewatch.roi import load_roi_config

    sequence = resolve_input(args.input)
    polygons, source_id = load_roi_config(args.roi)
    config = DetectorConfig.load(args.config) if args.config else DetectorConfig()
    runner = PipelineRunner(
        sequence,
        polygons,
        config,
        speed=args.speed,
        source_id=source_id,
        audit_path=args.audit_log,
    )
    app = create_app(runner, autostart=True, ui_dir=args.ui)
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0
