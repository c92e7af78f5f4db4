"""Noise reduction ahead of frame differencing.

Lighting and ambient reflections show up as per-pixel change between frames,
so the detector blurs before subtracting. A separable Gaussian is the default;
an edge-preserving bilateral filter is available where blur would smear the
cable boundary. Both replicate edge pixels at the border, accumulate in
float64, and quantize once at the end (half-away-from-zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from cablewatch.errors import ConfigError
from cablewatch.ingest import Frame, quantize_u8
from cablewatch.roi import RoiMask

MAX_RADIUS = 15


@dataclass(frozen=True)
class BlurSpec:
    kind: str = "gaussian"  # gaussian | bilateral | none
    radius: int = 2
    sigma_spatial: float = 1.5
    sigma_range: float = 25.0  # bilateral only, intensity units

    def __post_init__(self):
        errors = {}
        if self.kind not in ("gaussian", "bilateral", "none"):
            errors["blur.kind"] = f"unknown blur kind {self.kind!r}"
        if not 1 <= self.radius <= MAX_RADIUS:
            errors["blur.radius"] = f"radius must be in [1, {MAX_RADIUS}]"
        if not self.sigma_spatial > 0:
            errors["blur.sigma_spatial"] = "sigma_spatial must be positive"
        if self.kind == "bilateral" and not self.sigma_range > 0:
            errors["blur.sigma_range"] = "sigma_range must be positive"
        if errors:
            raise ConfigError("invalid blur spec", errors)


def gaussian_kernel(radius: int, sigma: float) -> np.ndarray:
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_rows(img: np.ndarray, kernel: np.ndarray, radius: int) -> np.ndarray:
    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.size, axis=1)
    return windows @ kernel


def blur_pixels(pixels: np.ndarray, spec: BlurSpec) -> np.ndarray:
    """Apply ``spec`` to a raw uint8 raster."""
    if spec.kind == "none":
        return np.asarray(pixels, dtype=np.uint8)
    if spec.kind == "gaussian":
        kernel = gaussian_kernel(spec.radius, spec.sigma_spatial)
        acc = _convolve_rows(pixels.astype(np.float64), kernel, spec.radius)
        acc = _convolve_rows(acc.T, kernel, spec.radius).T
        return quantize_u8(acc)
    if spec.kind == "bilateral":
        return _bilateral_pixels(pixels, spec)
    raise ConfigError(f"unknown blur kind {spec.kind!r}")


def _bilateral_pixels(pixels: np.ndarray, spec: BlurSpec) -> np.ndarray:
    r = spec.radius
    img = pixels.astype(np.float64)
    padded = np.pad(img, r, mode="edge")
    h, w = img.shape
    inv_2ss = 1.0 / (2.0 * spec.sigma_spatial**2)
    inv_2sr = 1.0 / (2.0 * spec.sigma_range**2)
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            w_spatial = math.exp(-(dx * dx + dy * dy) * inv_2ss)
            w_range = np.exp(-((img - shifted) ** 2) * inv_2sr)
            weight = w_spatial * w_range
            num += weight * shifted
            den += weight
    return quantize_u8(num / den)


def gaussian_blur(frame: Frame, spec: BlurSpec) -> Frame:
    if spec.kind != "gaussian":
        raise ValueError("gaussian_blur requires spec.kind == 'gaussian'")
    return Frame(frame.index, frame.timestamp_ms, blur_pixels(frame.pixels, spec))


def bilateral_filter(frame: Frame, spec: BlurSpec) -> Frame:
    if spec.kind != "bilateral":
        raise ValueError("bilateral_filter requires spec.kind == 'bilateral'")
    return Frame(frame.index, frame.timestamp_ms, blur_pixels(frame.pixels, spec))


def apply_blur(frame: Frame, spec: BlurSpec) -> Frame:
    if spec.kind == "none":
        return frame
    return Frame(frame.index, frame.timestamp_ms, blur_pixels(frame.pixels, spec))


# MAD of a zero-mean Gaussian sample is 0.674489...*sigma; 1.4826 inverts it.
_MAD_TO_SIGMA = 1.4826


def estimate_noise_sigma(frames: Sequence[Frame], mask: RoiMask) -> float:
    """Robust per-frame noise sigma from in-mask temporal differences.

    Differences of consecutive static frames carry twice the per-frame noise
    variance, so the MAD-based sigma of the differences is divided by sqrt(2).
    A constant offset between frames (global lighting step) cancels because
    the MAD is taken about the median.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to estimate noise")
    diffs = []
    for a, b in zip(frames, frames[1:]):
        if a.pixels.shape != mask.bits.shape:
            raise ValueError("frame dimensions do not match mask")
        d = b.pixels.astype(np.float64) - a.pixels.astype(np.float64)
        diffs.append(d[mask.bits])
    d = np.concatenate(diffs)
    mad = np.median(np.abs(d - np.median(d)))
    return float(_MAD_TO_SIGMA * mad / math.sqrt(2.0))


# Default margin: five sigma on the frame-difference scale (sigma * sqrt(2)).
TAU_SIGMA_MARGIN = 5.0


def tau_from_sigma(sigma: float, target_far: float | None = None) -> int:
    """Change threshold from the per-frame noise sigma.

    Without a target, tau = ceil(margin * sqrt(2) * sigma). With a per-pixel
    false-alarm probability p, tau is the two-sided Gaussian tail point of the
    frame difference: ceil(sqrt(2) * sigma * Phi^-1(1 - p/2)). Floors at 1.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if target_far is None:
        tau = math.ceil(TAU_SIGMA_MARGIN * math.sqrt(2.0) * sigma)
    else:
        if not 0 < target_far < 1:
            raise ValueError("target false-alarm probability must be in (0, 1)")
        z = NormalDist().inv_cdf(1.0 - target_far / 2.0)
        tau = math.ceil(math.sqrt(2.0) * sigma * z)
    return max(1, min(255, tau))
