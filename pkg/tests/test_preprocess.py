from __future__ import annotations

import math

import numpy as np
import pytest

from cablewatch.errors import ConfigError
from cablewatch.preprocess import (
    BlurSpec,
    bilateral_filter,
    blur_pixels,
    estimate_noise_sigma,
    gaussian_blur,
    gaussian_kernel,
    tau_from_sigma,
)
from cablewatch.roi import RoiPolygon, rasterize
from conftest import make_frame
from oracles import (
    bilateral_pixel_loop,
    dense_bilateral_reference,
    dense_gaussian_reference,
    inverse_normal_bisect,
)

GAUSS = BlurSpec(kind="gaussian", radius=2, sigma_spatial=1.5)


def test_constant_frame_is_preserved():
    frame = make_frame(np.full((16, 16), 128, dtype=np.uint8))
    assert np.array_equal(gaussian_blur(frame, GAUSS).pixels, frame.pixels)


def test_impulse_center_value():
    px = np.zeros((9, 9), dtype=np.uint8)
    px[4, 4] = 255
    spec = BlurSpec(kind="gaussian", radius=1, sigma_spatial=0.8)
    out = gaussian_blur(make_frame(px), spec)
    k0 = gaussian_kernel(1, 0.8)[1]
    assert out.pixels[4, 4] == round(255 * k0 * k0)  # = 69


def test_tiny_sigma_is_identity():
    rng = np.random.default_rng(2)
    px = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    spec = BlurSpec(kind="gaussian", radius=1, sigma_spatial=1e-3)
    assert np.array_equal(gaussian_blur(make_frame(px), spec).pixels, px)


def test_gaussian_commutes_with_mirroring():
    rng = np.random.default_rng(3)
    px = rng.integers(0, 256, (24, 31), dtype=np.uint8)
    blurred = blur_pixels(px, GAUSS)
    assert np.array_equal(blur_pixels(px[:, ::-1], GAUSS), blurred[:, ::-1])
    assert np.array_equal(blur_pixels(px[::-1, :], GAUSS), blurred[::-1, :])


def test_gaussian_within_one_of_dense_reference():
    rng = np.random.default_rng(4)
    for _ in range(5):
        px = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        out = blur_pixels(px, GAUSS).astype(np.float64)
        ref = dense_gaussian_reference(px, GAUSS.radius, GAUSS.sigma_spatial)
        assert np.max(np.abs(out - ref)) <= 1.0


def test_gaussian_determinism():
    rng = np.random.default_rng(5)
    px = rng.integers(0, 256, (20, 20), dtype=np.uint8)
    assert np.array_equal(blur_pixels(px, GAUSS), blur_pixels(px, GAUSS))


BILAT = BlurSpec(kind="bilateral", radius=2, sigma_spatial=1.5, sigma_range=10.0)


def test_bilateral_constant_frame():
    frame = make_frame(np.full((16, 16), 77, dtype=np.uint8))
    assert np.array_equal(bilateral_filter(frame, BILAT).pixels, frame.pixels)


def test_bilateral_preserves_step_edge():
    px = np.zeros((16, 16), dtype=np.uint8)
    px[:, 8:] = 255
    out = bilateral_filter(make_frame(px), BILAT)
    assert np.max(np.abs(out.pixels.astype(int) - px.astype(int))) <= 1


def test_bilateral_degenerates_to_gaussian_for_huge_sigma_range():
    rng = np.random.default_rng(6)
    px = rng.integers(0, 256, (24, 24), dtype=np.uint8)
    wide = BlurSpec(kind="bilateral", radius=2, sigma_spatial=1.5, sigma_range=1e6)
    blurred = blur_pixels(px, GAUSS).astype(int)
    bilat = blur_pixels(px, wide).astype(int)
    assert np.max(np.abs(blurred - bilat)) <= 1


def test_bilateral_within_one_of_dense_reference():
    rng = np.random.default_rng(7)
    px = rng.integers(0, 256, (24, 24), dtype=np.uint8)
    out = blur_pixels(px, BILAT).astype(np.float64)
    ref = dense_bilateral_reference(px, BILAT.radius, BILAT.sigma_spatial, BILAT.sigma_range)
    assert np.max(np.abs(out - ref)) <= 1.0
    # Spot-check the dense reference itself against a pure-Python loop.
    for y, x in ((0, 0), (5, 12), (23, 23)):
        direct = bilateral_pixel_loop(px, x, y, BILAT.radius, BILAT.sigma_spatial, BILAT.sigma_range)
        assert abs(ref[y, x] - direct) < 1e-9


def test_bilateral_bounded_by_window_extremes():
    rng = np.random.default_rng(8)
    px = rng.integers(0, 256, (20, 20), dtype=np.uint8)
    out = blur_pixels(px, BILAT)
    padded = np.pad(px, BILAT.radius, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (5, 5))
    lo = windows.min(axis=(2, 3))
    hi = windows.max(axis=(2, 3))
    assert np.all(out >= lo) and np.all(out <= hi)


FULL_16 = rasterize(RoiPolygon(((0, 0), (16, 0), (16, 16), (0, 16))), 16, 16)


def test_noise_sigma_of_identical_frames_is_zero():
    frame = make_frame(np.full((16, 16), 50, dtype=np.uint8))
    other = make_frame(np.full((16, 16), 50, dtype=np.uint8), index=1)
    assert estimate_noise_sigma([frame, other], FULL_16) == 0.0


def test_noise_sigma_ignores_constant_offset():
    base = np.full((16, 16), 50, dtype=np.uint8)
    a = make_frame(base)
    b = make_frame(base + 10, index=1)
    assert estimate_noise_sigma([a, b], FULL_16) == 0.0


def test_noise_sigma_recovers_gaussian_noise():
    rng = np.random.default_rng(9)
    mask = rasterize(RoiPolygon(((0, 0), (100, 0), (100, 100), (0, 100))), 100, 100)
    base = np.full((100, 100), 120.0)
    a = np.clip(base + rng.normal(0, 4, base.shape), 0, 255).astype(np.uint8)
    b = np.clip(base + rng.normal(0, 4, base.shape), 0, 255).astype(np.uint8)
    sigma = estimate_noise_sigma([make_frame(a), make_frame(b, index=1)], mask)
    assert 3.4 <= sigma <= 4.6


def test_noise_sigma_needs_two_frames():
    with pytest.raises(ValueError):
        estimate_noise_sigma([make_frame(np.zeros((16, 16), dtype=np.uint8))], FULL_16)


def test_tau_from_sigma_default_margin():
    assert tau_from_sigma(0.0) == 1
    assert tau_from_sigma(4.0) == math.ceil(5 * math.sqrt(2) * 4.0)  # 29


def test_tau_from_sigma_target_far_matches_tail_oracle():
    p = 1e-6
    z_oracle = inverse_normal_bisect(1 - p / 2)
    expected = math.ceil(math.sqrt(2) * 4.0 * z_oracle)
    assert tau_from_sigma(4.0, target_far=p) == expected


def test_blur_spec_validation():
    with pytest.raises(ConfigError):
        BlurSpec(kind="box")
    with pytest.raises(ConfigError):
        BlurSpec(radius=0)
    with pytest.raises(ConfigError):
        BlurSpec(radius=16)
    with pytest.raises(ConfigError):
        BlurSpec(kind="bilateral", sigma_range=0.0)
