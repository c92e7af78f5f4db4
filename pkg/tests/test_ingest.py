from __future__ import annotations

import json

import numpy as np
import pytest

from cablewatch.errors import SequenceError
from cablewatch.ingest import (
    Frame,
    open_sequence,
    read_pgm,
    to_grayscale,
    write_pgm,
    write_y8,
)
from oracles import luminance_exact


def _rand_pixels(rng, h=48, w=64):
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)


def test_directory_of_pgms_yields_frames_in_order(tmp_path):
    rng = np.random.default_rng(1)
    rasters = [_rand_pixels(rng) for _ in range(3)]
    for i, px in enumerate(rasters):
        write_pgm(tmp_path / f"frame_{i:03d}.pgm", px)
    seq = open_sequence(tmp_path)
    frames = list(seq)
    assert [f.index for f in frames] == [0, 1, 2]
    assert seq.meta.frame_count == 3
    for f, px in zip(frames, rasters):
        assert np.array_equal(f.pixels, px)


def test_y8_timestamps_from_fps(tmp_path):
    frames = np.zeros((2, 48, 64), dtype=np.uint8)
    path = tmp_path / "clip.y8"
    write_y8(path, frames, fps=30.0)
    seq = open_sequence(path)
    stamps = [f.timestamp_ms for f in seq]
    assert stamps == [0, 33]  # round(1000*1/30)
    assert seq.meta.width == 64 and seq.meta.height == 48


def test_truncated_y8_is_an_error(tmp_path):
    path = tmp_path / "clip.y8"
    write_y8(path, np.zeros((2, 48, 64), dtype=np.uint8), fps=30.0)
    with open(path, "ab") as fh:
        fh.write(b"\x00" * 10)
    with pytest.raises(SequenceError, match="truncated|whole number"):
        open_sequence(path)


def test_missing_path_is_an_error(tmp_path):
    with pytest.raises(SequenceError, match="no such"):
        open_sequence(tmp_path / "nope")


def test_missing_sidecar_is_an_error(tmp_path):
    path = tmp_path / "clip.y8"
    path.write_bytes(b"\x00" * 64 * 48)
    with pytest.raises(SequenceError, match="sidecar"):
        open_sequence(path)


def test_mixed_dimensions_in_directory(tmp_path):
    write_pgm(tmp_path / "a.pgm", np.zeros((48, 64), dtype=np.uint8))
    write_pgm(tmp_path / "b.pgm", np.zeros((32, 64), dtype=np.uint8))
    seq = open_sequence(tmp_path)
    with pytest.raises(SequenceError, match="differ"):
        list(seq)


def test_two_passes_yield_identical_bytes(tmp_path):
    rng = np.random.default_rng(7)
    write_y8(tmp_path / "clip.y8", rng.integers(0, 256, (4, 16, 16), dtype=np.uint8), fps=10)
    seq = open_sequence(tmp_path / "clip.y8")
    first = [f.pixels.tobytes() for f in seq]
    second = [f.pixels.tobytes() for f in seq]
    assert first == second


def test_pgm_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    px = _rand_pixels(rng)
    write_pgm(tmp_path / "f.pgm", px)
    assert np.array_equal(read_pgm(tmp_path / "f.pgm"), px)


def test_pgm_header_comments(tmp_path):
    px = np.arange(64, dtype=np.uint8).reshape(8, 8)
    data = b"P5\n# a comment\n8 8\n255\n" + px.tobytes()
    (tmp_path / "c.pgm").write_bytes(data)
    assert np.array_equal(read_pgm(tmp_path / "c.pgm"), px)


def test_png_gray_and_rgb(tmp_path):
    from PIL import Image

    rng = np.random.default_rng(5)
    gray = _rand_pixels(rng, 16, 16)
    Image.fromarray(gray).save(tmp_path / "a.png")
    rgb = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    Image.fromarray(rgb).save(tmp_path / "b.png")
    seq = open_sequence(tmp_path)
    frames = list(seq)
    assert np.array_equal(frames[0].pixels, gray)
    assert np.array_equal(frames[1].pixels, to_grayscale(rgb))


def test_to_grayscale_known_values():
    rgb = np.array([[[255, 255, 255], [255, 0, 0], [0, 0, 0]]] * 8, dtype=np.uint8)
    rgb = np.tile(rgb, (1, 3, 1))  # widen to satisfy no dimension checks here
    out = to_grayscale(rgb)
    assert out[0, 0] == 255
    assert out[0, 1] == 76  # round(0.299*255)
    assert out[0, 2] == 0


def test_to_grayscale_matches_exact_luminance():
    rng = np.random.default_rng(11)
    rgb = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    out = to_grayscale(rgb)
    for y in range(0, 32, 5):
        for x in range(0, 32, 5):
            exact = luminance_exact(*(int(c) for c in rgb[y, x]))
            assert abs(float(out[y, x]) - float(exact)) <= 1.0


def test_frame_invariants():
    with pytest.raises(ValueError):
        Frame(0, 0, np.zeros((4, 4), dtype=np.uint8))  # below minimum size
    with pytest.raises(ValueError):
        Frame(-1, 0, np.zeros((16, 16), dtype=np.uint8))
    f = Frame(0, 0, np.zeros((16, 16), dtype=np.uint8))
    with pytest.raises(ValueError):
        f.pixels[0, 0] = 1  # immutable
