from __future__ import annotations

import json

import numpy as np
import pytest

from cablewatch.change_detect import ChangeMap, DetectorConfig, parse_score_csv, run_pipeline
from cablewatch.render import (
    bresenham_line,
    draw_roi_outline,
    export_run,
    overlay_changes,
    write_png,
)
from cablewatch.roi import RoiPolygon
from cablewatch.synth import SceneSpec, SlackSpec, iter_frames
from conftest import make_frame


def _change(bits):
    bits = np.asarray(bits, dtype=bool)
    return ChangeMap(frame_index=1, bits=bits, count=int(bits.sum()))


class TestOverlay:
    def test_empty_map_is_pure_grayscale(self):
        rng = np.random.default_rng(1)
        frame = make_frame(rng.integers(0, 256, (16, 16), dtype=np.uint8))
        rgb = overlay_changes(frame, _change(np.zeros((16, 16))))
        assert np.array_equal(rgb[:, :, 0], frame.pixels)
        assert np.array_equal(rgb[:, :, 1], frame.pixels)
        assert np.array_equal(rgb[:, :, 2], frame.pixels)

    def test_all_changed_is_red_dominant(self):
        frame = make_frame(np.full((16, 16), 100, dtype=np.uint8))
        rgb = overlay_changes(frame, _change(np.ones((16, 16))))
        assert np.all(rgb[:, :, 0] == 255)
        assert np.all(rgb[:, :, 1] == 30)  # 100 * 0.3

    def test_red_set_equals_change_bits(self):
        rng = np.random.default_rng(2)
        frame = make_frame(rng.integers(0, 200, (16, 16), dtype=np.uint8))
        bits = rng.uniform(size=(16, 16)) < 0.3
        rgb = overlay_changes(frame, _change(bits))
        red = (rgb[:, :, 0] == 255) & (rgb[:, :, 1] != rgb[:, :, 0])
        # Compare against the bits directly: red exactly where changed.
        for j in range(16):
            for i in range(16):
                if bits[j, i]:
                    assert rgb[j, i, 0] == 255
                else:
                    assert np.array_equal(rgb[j, i], np.full(3, frame.pixels[j, i]))

    def test_dimension_mismatch(self):
        frame = make_frame(np.zeros((16, 16), dtype=np.uint8))
        with pytest.raises(ValueError):
            overlay_changes(frame, _change(np.zeros((8, 8))))


class TestOutline:
    def test_axis_aligned_rectangle(self):
        raster = np.zeros((16, 16, 3), dtype=np.uint8)
        poly = RoiPolygon(((2, 2), (10, 2), (10, 8), (2, 8)))
        out = draw_roi_outline(raster, poly)
        drawn = np.nonzero((out != 0).any(axis=2))
        ys, xs = drawn
        assert set(zip(ys.tolist(), xs.tolist())) == {
            (y, x)
            for x in range(2, 11)
            for y in range(2, 9)
            if x in (2, 10) or y in (2, 8)
        }

    def test_triangle_outline_pixel_count(self):
        raster = np.zeros((32, 32, 3), dtype=np.uint8)
        verts = ((3, 3), (25, 7), (10, 22))
        poly = RoiPolygon(verts)
        out = draw_roi_outline(raster, poly)
        drawn = int((out != 0).any(axis=2).sum())
        # Sum of per-segment Bresenham lengths minus the 3 shared endpoints.
        seg_total = 0
        pts = set()
        for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
            seg = bresenham_line(x0, y0, x1, y1)
            seg_total += len(seg)
            pts.update(seg)
        assert drawn == len(pts) == seg_total - 3

    def test_original_raster_untouched(self):
        raster = np.zeros((16, 16, 3), dtype=np.uint8)
        draw_roi_outline(raster, RoiPolygon(((1, 1), (10, 1), (10, 10))))
        assert not raster.any()


SCENE = SceneSpec(
    width=64, height=64, frame_count=50, noise_sigma=1.0, rng_seed=4,
    cable_points=((0.0, 28.0), (32.0, 32.0), (63.0, 28.0)),
    slack_events=(SlackSpec(20, 40, 6.0, (10.0, 54.0)),), name="export",
)
ROI = RoiPolygon(((4, 16), (60, 16), (60, 50), (4, 50)))
CONFIG = DetectorConfig.from_dict(
    {"tau": 12, "reference": {"warmup_frames": 10, "lag": 10},
     "score_on": 20.0, "score_off": 10.0}
)


class TestExportRun:
    def test_run_without_events(self, tmp_path):
        quiet = SceneSpec(width=64, height=64, frame_count=30,
                          cable_points=SCENE.cable_points, name="noev")
        result = run_pipeline(iter_frames(quiet), ROI, CONFIG)
        paths = export_run(result, tmp_path / "out")
        csv_rows = parse_score_csv(paths["scores"].read_text())
        assert len(csv_rows) == quiet.frame_count - 1
        assert json.loads(paths["events"].read_text()) == []
        assert not list((tmp_path / "out").glob("*.png"))

    def test_event_run_exports_named_overlay(self, tmp_path):
        result = run_pipeline(iter_frames(SCENE), ROI, CONFIG)
        assert len(result.events) == 1
        event = result.events[0]
        paths = export_run(result, tmp_path / "out", [ROI])
        png = tmp_path / "out" / f"event_{event.id}_frame_{event.peak_frame}.png"
        assert png.exists()
        events = json.loads(paths["events"].read_text())
        assert events[0]["start_frame"] == event.start_frame
        assert events[0]["start_ms"] == event.start_ms

    def test_csv_reparses_to_identical_series(self, tmp_path):
        result = run_pipeline(iter_frames(SCENE), ROI, CONFIG)
        paths = export_run(result, tmp_path / "out")
        assert parse_score_csv(paths["scores"].read_text()) == list(result.series.snapshot())

    def test_export_is_idempotent_and_byte_identical(self, tmp_path):
        result = run_pipeline(iter_frames(SCENE), ROI, CONFIG)
        export_run(result, tmp_path / "a", [ROI])
        export_run(result, tmp_path / "b", [ROI])
        files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
        files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_write_png_deterministic(tmp_path):
    rng = np.random.default_rng(8)
    raster = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    write_png(tmp_path / "a.png", raster)
    write_png(tmp_path / "b.png", raster)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
