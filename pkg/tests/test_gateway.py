from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from cablewatch.change_detect import DetectorConfig, parse_score_csv
from cablewatch.gateway import PipelineRunner, create_app
from cablewatch.roi import polygons_from_config
from cablewatch.synth import SceneSpec, SlackSpec, as_sequence, scenario_roi, scenario_suite

MINI = SceneSpec(
    width=64, height=64, frame_count=60, noise_sigma=1.0, rng_seed=6,
    cable_points=((0.0, 28.0), (32.0, 32.0), (63.0, 28.0)),
    slack_events=(SlackSpec(25, 45, 6.0, (10.0, 54.0)),), name="gwmini",
)
MINI_ROI = {"source_id": "gwmini", "polygons": [
    {"name": "main", "vertices": [[4, 16], [60, 16], [60, 52], [4, 52]]}]}
MINI_CONFIG = DetectorConfig.from_dict(
    {"tau": 12, "reference": {"warmup_frames": 20, "lag": 20},
     "score_on": 20.0, "score_off": 10.0}
)


def make_runner(spec=MINI, roi=MINI_ROI, config=MINI_CONFIG, **kwargs):
    return PipelineRunner(
        as_sequence(spec), polygons_from_config(roi), config, speed=0.0, **kwargs
    )


@pytest.fixture
def client_runner():
    runner = make_runner()
    app = create_app(runner)
    with TestClient(app) as client:
        yield client, runner


class TestStatus:
    def test_fresh_state(self, client_runner):
        client, _ = client_runner
        body = client.get("/api/status").json()
        assert body == {"frame": 0, "detector": "diff", "events_open": 0, "last_score": None}

    def test_advances_with_frames(self, client_runner):
        client, runner = client_runner
        runner.step_until(10)
        body = client.get("/api/status").json()
        assert body["frame"] == 11
        assert body["last_score"] is not None


class TestConfigEndpoint:
    def test_put_then_get_round_trip(self, client_runner):
        client, _ = client_runner
        data = client.get("/api/config").json()
        data["tau"] = 40
        response = client.put("/api/config", json=data)
        assert response.status_code == 200
        assert client.get("/api/config").json()["tau"] == 40

    def test_invalid_put_is_422_and_state_unchanged(self, client_runner):
        client, _ = client_runner
        before = client.get("/api/config").json()
        bad = {**before, "score_on": 5.0, "score_off": 10.0}
        response = client.put("/api/config", json=bad)
        assert response.status_code == 422
        assert "score_off" in response.json()["errors"]
        assert client.get("/api/config").json() == before

    def test_unknown_field_is_422(self, client_runner):
        client, _ = client_runner
        response = client.put("/api/config", json={"taau": 12})
        assert response.status_code == 422

    def test_mutation_applies_to_next_frames(self, client_runner):
        client, runner = client_runner
        runner.step_until(30)  # inside the slack event: counts are high
        mid = runner.pipeline.series.records[-1]
        assert mid.count > 0
        client.put("/api/config", json={**client.get("/api/config").json(), "tau": 255})
        runner.step_until(35)
        assert runner.pipeline.series.records[-1].count == 0

    def test_audit_log_records_mutations(self, client_runner):
        client, runner = client_runner
        client.put("/api/config", json={**client.get("/api/config").json(), "tau": 99})
        entries = [e for e in runner.audit if e["field"] == "tau"]
        assert entries and entries[-1]["old"] == 12 and entries[-1]["new"] == 99


class TestRoiEndpoint:
    def test_put_then_get_round_trip(self, client_runner):
        client, _ = client_runner
        triangle = {"source_id": "gwmini", "polygons": [
            {"name": "tri", "vertices": [[10.0, 10.0], [40.0, 10.0], [25.0, 40.0]]}]}
        assert client.put("/api/roi", json=triangle).status_code == 200
        got = client.get("/api/roi").json()
        assert got["polygons"][0]["vertices"] == triangle["polygons"][0]["vertices"]

    def test_invalid_roi_is_422(self, client_runner):
        client, _ = client_runner
        before = client.get("/api/roi").json()
        bad = {"polygons": [{"name": "x", "vertices": [[0, 0], [5, 5]]}]}
        assert client.put("/api/roi", json=bad).status_code == 422
        out_of_bounds = {"polygons": [{"name": "x", "vertices": [[0, 0], [999, 0], [0, 999]]}]}
        assert client.put("/api/roi", json=out_of_bounds).status_code == 422
        assert client.get("/api/roi").json() == before

    def test_remask_changes_subsequent_counts(self, client_runner):
        client, runner = client_runner
        runner.step_until(30)
        during = runner.pipeline.series.records[-1].count
        assert during > 0
        corner = {"source_id": "gwmini", "polygons": [
            {"name": "corner", "vertices": [[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0]]}]}
        client.put("/api/roi", json=corner)
        runner.step_until(40)  # still inside the ground-truth event
        tail = [r.count for r in runner.pipeline.series.records[-8:]]
        assert all(c == 0 for c in tail)


class TestScoresEndpoint:
    def test_round_trips_to_pipeline_series(self, client_runner):
        client, runner = client_runner
        while runner.step():
            pass
        text = client.get("/api/scores").text
        assert parse_score_csv(text) == list(runner.pipeline.series.snapshot())

    def test_range_filter(self, client_runner):
        client, runner = client_runner
        runner.step_until(20)
        text = client.get("/api/scores", params={"from": 5, "to": 10}).text
        rows = parse_score_csv(text)
        assert [r.frame_index for r in rows] == list(range(5, 11))


class TestEventsEndpoint:
    def test_events_after_run(self, client_runner):
        client, runner = client_runner
        while runner.step():
            pass
        events = client.get("/api/events").json()
        assert len(events) == 1
        assert events[0]["id"] == 1
        assert events[0]["start_frame"] <= 45 and events[0]["end_frame"] >= 25


class TestFrameEndpoint:
    def test_png_round_trip(self, client_runner):
        import io

        import numpy as np
        from PIL import Image

        client, runner = client_runner
        runner.step_until(5)
        response = client.get("/api/frame/3")
        assert response.status_code == 200
        img = Image.open(io.BytesIO(response.content))
        assert img.size == (64, 64)
        frames = list(as_sequence(MINI))
        assert np.array_equal(np.asarray(img), frames[3].pixels)

    def test_overlay_variant(self, client_runner):
        import io

        from PIL import Image

        client, runner = client_runner
        runner.step_until(30)
        response = client.get("/api/frame/30", params={"overlay": "true"})
        img = Image.open(io.BytesIO(response.content))
        assert img.mode == "RGB"

    def test_unknown_frame_is_404(self, client_runner):
        client, _ = client_runner
        assert client.get("/api/frame/999").status_code == 404


class TestStream:
    def test_stream_yields_record_per_frame(self):
        runner = make_runner()
        app = create_app(runner)
        with TestClient(app) as client:
            while runner.step():
                pass
            with client.stream("GET", "/api/stream") as response:
                lines = [ln for ln in response.iter_lines() if ln.startswith("data: ")]
        # Subscribing after the run finished yields an immediately closed stream.
        assert lines == []

    def test_stream_records_shape(self):
        runner = make_runner()
        app = create_app(runner)
        with TestClient(app) as client:
            q = runner.subscribe()
            runner.step_until(5)
            runner.stop()
            records = []
            while True:
                item = q.get()
                if item is None:
                    break
                records.append(item)
        assert len(records) == 5  # frames 1..5 produced records
        assert set(records[0]) == {"frame", "count", "score", "event_open"}


class TestMark:
    def test_mark_appends_audit_entry(self, client_runner):
        client, runner = client_runner
        response = client.post("/api/mark", params={"frame": 7, "label": "sme says slack"})
        assert response.status_code == 200
        marks = [e for e in runner.audit if e["field"] == "mark"]
        assert marks[-1]["new"] == {"frame": 7, "label": "sme says slack"}


def test_audit_file_written(tmp_path):
    runner = make_runner(audit_path=tmp_path / "audit.jsonl")
    app = create_app(runner)
    with TestClient(app) as client:
        client.post("/api/mark", params={"frame": 1, "label": "x"})
    lines = (tmp_path / "audit.jsonl").read_text().strip().splitlines()
    assert json.loads(lines[0])["field"] == "mark"
