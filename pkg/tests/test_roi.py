from __future__ import annotations

import numpy as np
import pytest

from cablewatch.errors import ConfigError
from cablewatch.roi import (
    RoiPolygon,
    mask_apply,
    point_in_polygon,
    polygons_from_config,
    polygons_to_config,
    rasterize,
)
from conftest import make_frame
from oracles import winding_number_inside

SQUARE = RoiPolygon(((0, 0), (10, 0), (10, 10), (0, 10)), "square")

# L-shape: the notch is the top-right quadrant [5,10]x[0,5].
L_SHAPE = RoiPolygon(((0, 0), (5, 0), (5, 5), (10, 5), (10, 10), (0, 10)), "ell")


def test_point_in_polygon_square():
    assert point_in_polygon((5.5, 5.5), SQUARE)
    assert not point_in_polygon((15.5, 5.5), SQUARE)


def test_point_in_polygon_concave_notch():
    notch_point = (7.5, 2.5)
    assert not point_in_polygon(notch_point, L_SHAPE)
    assert point_in_polygon((2.5, 2.5), L_SHAPE)
    assert winding_number_inside(notch_point, L_SHAPE.vertices) == point_in_polygon(
        notch_point, L_SHAPE
    )


def test_point_in_polygon_agrees_with_winding_on_random_simple_polygons():
    rng = np.random.default_rng(42)
    for _ in range(25):
        # Star-shaped polygons around a center are always simple.
        n = rng.integers(3, 9)
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
        radii = rng.uniform(2.0, 6.0, n)
        cx, cy = rng.uniform(6, 10, 2)
        verts = tuple((cx + r * np.cos(a), cy + r * np.sin(a)) for a, r in zip(angles, radii))
        poly = RoiPolygon(verts)
        for _ in range(40):
            p = (rng.uniform(0, 16), rng.uniform(0, 16))
            assert point_in_polygon(p, poly) == winding_number_inside(p, poly.vertices)


def test_rasterize_axis_aligned_rectangle():
    poly = RoiPolygon(((2, 2), (6, 2), (6, 5), (2, 5)))
    mask = rasterize(poly, 8, 8)
    assert mask.inside_count == 12
    expected = np.zeros((8, 8), dtype=bool)
    expected[2:5, 2:6] = True
    assert np.array_equal(mask.bits, expected)


def test_rasterize_full_image():
    poly = RoiPolygon(((0, 0), (8, 0), (8, 8), (0, 8)))
    assert rasterize(poly, 8, 8).inside_count == 64


def test_rasterize_sliver_between_centers_is_empty_mask_error():
    poly = RoiPolygon(((1.1, 1.1), (6.9, 1.1), (6.9, 1.4), (1.1, 1.4)))
    with pytest.raises(ConfigError, match="no pixels"):
        rasterize(poly, 8, 8)


def test_rasterize_out_of_bounds_vertex_rejected():
    poly = RoiPolygon(((-1, 0), (8, 0), (8, 8)))
    with pytest.raises(ConfigError, match="outside"):
        rasterize(poly, 8, 8)


def test_rasterize_matches_per_pixel_test_exhaustively():
    rng = np.random.default_rng(9)
    for _ in range(5):
        n = rng.integers(3, 8)
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
        radii = rng.uniform(5.0, 14.0, n)
        verts = tuple(
            (16 + r * np.cos(a), 16 + r * np.sin(a)) for a, r in zip(angles, radii)
        )
        poly = RoiPolygon(verts)
        mask = rasterize(poly, 32, 32)
        for j in range(32):
            for i in range(32):
                assert mask.bits[j, i] == point_in_polygon((i + 0.5, j + 0.5), poly)


def test_translation_moves_mask_exactly():
    poly = RoiPolygon(((2.3, 2.7), (9.1, 3.2), (7.5, 9.8), (3.0, 8.1)))
    mask = rasterize(poly, 24, 24)
    moved = rasterize(poly.translated(5, 3), 24, 24)
    expected = np.zeros_like(mask.bits)
    expected[3:, 5:] = mask.bits[:-3, :-5]
    assert np.array_equal(moved.bits, expected)


def test_inside_count_invariant_under_vertex_rotation():
    verts = ((2.3, 2.7), (9.1, 3.2), (7.5, 9.8), (3.0, 8.1))
    counts = set()
    for shift in range(len(verts)):
        rotated = verts[shift:] + verts[:shift]
        counts.add(rasterize(RoiPolygon(rotated), 16, 16).inside_count)
    assert len(counts) == 1


def test_union_of_polygons():
    a = RoiPolygon(((0, 0), (4, 0), (4, 4), (0, 4)))
    b = RoiPolygon(((8, 8), (12, 8), (12, 12), (8, 12)))
    mask = rasterize([a, b], 16, 16)
    assert mask.inside_count == 32


def test_mask_apply_linearity_and_identity():
    frame = make_frame(np.full((8, 8), 255, dtype=np.uint8))
    half = rasterize(RoiPolygon(((0, 0), (4, 0), (4, 8), (0, 8))), 8, 8)
    assert int(mask_apply(frame, half).sum()) == 255 * half.inside_count
    full = rasterize(RoiPolygon(((0, 0), (8, 0), (8, 8), (0, 8))), 8, 8)
    assert np.array_equal(mask_apply(frame, full), frame.pixels)


def test_mask_apply_matches_brute_force_loop():
    rng = np.random.default_rng(13)
    frame = make_frame(rng.integers(0, 256, (12, 12), dtype=np.uint8))
    poly = RoiPolygon(((1.2, 1.7), (10.4, 2.9), (9.3, 10.6), (2.2, 9.1)))
    mask = rasterize(poly, 12, 12)
    out = mask_apply(frame, mask)
    for j in range(12):
        for i in range(12):
            expected = frame.pixels[j, i] if mask.bits[j, i] else 0
            assert out[j, i] == expected


def test_mask_apply_dimension_mismatch():
    frame = make_frame(np.zeros((8, 8), dtype=np.uint8))
    mask = rasterize(RoiPolygon(((0, 0), (12, 0), (12, 12), (0, 12))), 12, 12)
    with pytest.raises(ValueError):
        mask_apply(frame, mask)


def test_polygon_invariants():
    with pytest.raises(ConfigError):
        RoiPolygon(((0, 0), (1, 1)))
    with pytest.raises(ConfigError):
        RoiPolygon(((0, 0), (0, 0), (1, 1), (2, 0)))


def test_config_round_trip():
    polys = [RoiPolygon(((0, 0), (4, 0), (4, 4)), "a"), RoiPolygon(((5, 5), (9, 5), (9, 9)), "b")]
    config = polygons_to_config(polys, "cam1")
    parsed = polygons_from_config(config)
    assert [p.vertices for p in parsed] == [p.vertices for p in polys]
    assert [p.name for p in parsed] == ["a", "b"]


def test_config_errors():
    with pytest.raises(ConfigError):
        polygons_from_config({"source_id": "x"})
    with pytest.raises(ConfigError):
        polygons_from_config({"polygons": []})
    with pytest.raises(ConfigError):
        polygons_from_config({"polygons": [{"vertices": [[0, 0], [1]]}]})
