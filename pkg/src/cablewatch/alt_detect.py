"""Comparison detectors: edge-fit deviation and adaptive Gaussian mixtures.

Both were evaluated alongside the lagged-difference method and are kept as
alternatives behind the same per-frame scoring surface, so event extraction,
benchmarking, and the operator console treat every detector identically.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from cablewatch.errors import ConfigError
from cablewatch.ingest import Frame
from cablewatch.preprocess import BlurSpec, blur_pixels
from cablewatch.roi import RoiMask


# --- Canny edge detection ---------------------------------------------------

_SMOOTH = np.array([1.0, 2.0, 1.0])
_DIFF = np.array([-1.0, 0.0, 1.0])


def _correlate_1d(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    padded = np.pad(img, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, 3, axis=axis)
    return windows @ kernel


def sobel_gradients(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (gx, gy) with replicated borders."""
    img = np.asarray(pixels, dtype=np.float64)
    gx = _correlate_1d(_correlate_1d(img, _DIFF, axis=1), _SMOOTH, axis=0)
    gy = _correlate_1d(_correlate_1d(img, _DIFF, axis=0), _SMOOTH, axis=1)
    return gx, gy


# Offsets (dy, dx) of the forward neighbor for each quantized gradient bin:
# 0deg = horizontal gradient, 45deg, 90deg = vertical gradient, 135deg.
_BIN_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def quantize_direction(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = np.zeros(angle.shape, dtype=np.int8)
    bins[(angle >= 22.5) & (angle < 67.5)] = 1
    bins[(angle >= 67.5) & (angle < 112.5)] = 2
    bins[(angle >= 112.5) & (angle < 157.5)] = 3
    return bins


def _shifted(mag: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Magnitude of the neighbor at (dy, dx); out-of-bounds neighbors read 0."""
    h, w = mag.shape
    out = np.zeros_like(mag)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    out[ys, xs] = mag[max(0, dy) : h + min(0, dy), max(0, dx) : w + min(0, dx)]
    return out


def non_maximum_suppression(mag: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """Zero out pixels that do not top their neighbors along the gradient.

    The comparison is strict toward the forward neighbor and non-strict toward
    the backward one so that a symmetric two-pixel ridge keeps exactly one side.
    """
    keep = np.zeros(mag.shape, dtype=bool)
    for b, (dy, dx) in enumerate(_BIN_OFFSETS):
        fwd = _shifted(mag, dy, dx)
        back = _shifted(mag, -dy, -dx)
        keep |= (bins == b) & (mag > fwd) & (mag >= back)
    return np.where(keep, mag, 0.0)


def hysteresis_link(mag: np.ndarray, low: float, high: float) -> np.ndarray:
    """Keep strong pixels (>= high) and weak pixels (>= low) 8-connected to them."""
    strong = mag >= high
    weak = (mag >= low) & ~strong
    kept = strong.copy()
    h, w = mag.shape
    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not kept[ny, nx]:
                    kept[ny, nx] = True
                    queue.append((ny, nx))
    return kept


def canny(frame: Frame | np.ndarray, low: float, high: float, blur: BlurSpec) -> np.ndarray:
    """Boolean edge raster: blur, Sobel, 4-bin NMS, double-threshold linking."""
    if not 0 < low <= high:
        raise ValueError("canny thresholds require 0 < low <= high")
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.uint8)
    smoothed = blur_pixels(pixels, blur) if blur.kind != "none" else pixels
    gx, gy = sobel_gradients(smoothed)
    mag = np.hypot(gx, gy)
    suppressed = non_maximum_suppression(mag, quantize_direction(gx, gy))
    return hysteresis_link(suppressed, low, high)


# --- least-squares polynomial fit -------------------------------------------

@dataclass(frozen=True)
class EdgeFitModel:
    """Polynomial y(x) = sum a_k x^k fit to edge-pixel coordinates."""

    degree: int
    coefficients: tuple[float, ...]
    rms_residual: float

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        out = np.zeros_like(xs)
        for a in reversed(self.coefficients):
            out = out * xs + a
        return out


def polyfit_least_squares(points: Sequence[tuple[float, float]], degree: int) -> EdgeFitModel:
    """Fit by normal equations on x rescaled to [-1, 1] for conditioning."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    x, y = pts[:, 0], pts[:, 1]
    distinct = np.unique(x).size
    if distinct <= degree:
        raise ValueError(f"rank-deficient fit: {distinct} distinct x values for degree {degree}")
    xmin, xmax = float(x.min()), float(x.max())
    if xmax > xmin:
        scale = 2.0 / (xmax - xmin)
        offset = -(xmax + xmin) / (xmax - xmin)
    else:
        scale, offset = 0.0, 0.0
    u = scale * x + offset
    vander = np.vander(u, degree + 1, increasing=True)
    gram = vander.T @ vander
    rhs = vander.T @ y
    b = np.linalg.solve(gram, rhs)
    resid = vander @ b - y
    rms = float(math.sqrt(float(np.mean(resid * resid))))
    # Compose b(u(x)) back into the original x basis.
    coeffs = np.zeros(degree + 1)
    coeffs[0] = b[0]
    base = np.array([offset, scale])
    power = np.array([1.0])
    for k in range(1, degree + 1):
        power = np.convolve(power, base)
        coeffs[: k + 1] += b[k] * power
    return EdgeFitModel(degree=degree, coefficients=tuple(coeffs), rms_residual=rms)


class EdgeDeviation(NamedTuple):
    score: float
    edge_pixels: int  # 0 means "no-edge": the score is vacuous


def edge_centerline(edges: np.ndarray, mask: RoiMask) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-column mean y of in-mask edge pixels.

    Collapsing the cable's top and bottom edges to one centerline point per
    column makes a no-slack frame score near zero against its own baseline,
    while a sag of d pixels moves the centerline by d.
    """
    inside = np.asarray(edges, dtype=bool) & mask.bits
    ys, xs = np.nonzero(inside)
    if xs.size == 0:
        return np.empty(0), np.empty(0), 0
    width = mask.width
    counts = np.bincount(xs, minlength=width)
    sums = np.bincount(xs, weights=ys.astype(np.float64), minlength=width)
    columns = np.nonzero(counts)[0]
    return columns.astype(np.float64), sums[columns] / counts[columns], int(xs.size)


def edge_deviation_score(
    edges: np.ndarray, baseline: EdgeFitModel, mask: RoiMask
) -> EdgeDeviation:
    """Mean |centerline(x) - y_baseline(x)| over columns holding in-mask edges."""
    columns, centers, pixel_count = edge_centerline(edges, mask)
    if pixel_count == 0:
        return EdgeDeviation(0.0, 0)
    dev = np.abs(centers - baseline.evaluate(columns))
    return EdgeDeviation(float(dev.mean()), pixel_count)


# --- adaptive Gaussian mixture background model -----------------------------

@dataclass(frozen=True)
class GmmParams:
    components: int = 3
    learning_rate: float = 0.02
    background_ratio: float = 0.7
    match_distance: float = 2.5
    variance_floor: float = 4.0
    initial_variance: float = 225.0
    replacement_weight: float = 0.05

    def __post_init__(self):
        errors = {}
        if not 2 <= self.components <= 8:
            errors["gmm.components"] = "components must be in [2, 8]"
        if not 0 < self.learning_rate < 1:
            errors["gmm.learning_rate"] = "learning_rate must be in (0, 1)"
        if not 0 < self.background_ratio < 1:
            errors["gmm.background_ratio"] = "background_ratio must be in (0, 1)"
        if not self.match_distance > 0:
            errors["gmm.match_distance"] = "match_distance must be positive"
        if not self.variance_floor > 0:
            errors["gmm.variance_floor"] = "variance_floor must be positive"
        if errors:
            raise ConfigError("invalid GMM parameters", errors)


_WEIGHT_FLOOR = 1e-6


class GmmPixelModel:
    """Per-pixel mixture of K Gaussians over intensity, updated online.

    Single-writer: frames must arrive in order. The first frame seeds
    component 0 at each pixel (weight 1, wide variance) and classifies as
    background; zero-weight slots never match and only enter via replacement.
    """

    def __init__(self, params: GmmParams):
        self.params = params
        self.weights: np.ndarray | None = None
        self.means: np.ndarray | None = None
        self.variances: np.ndarray | None = None

    def _seed(self, x: np.ndarray) -> None:
        k = self.params.components
        shape = (*x.shape, k)
        self.weights = np.zeros(shape)
        self.means = np.zeros(shape)
        self.variances = np.full(shape, self.params.initial_variance)
        self.weights[..., 0] = 1.0
        self.means[..., 0] = x

    def update_and_classify(self, pixels: np.ndarray) -> np.ndarray:
        """Absorb one frame, return the boolean foreground raster."""
        p = self.params
        x = np.asarray(pixels, dtype=np.float64)
        if self.weights is None:
            self._seed(x)
            return np.zeros(x.shape, dtype=bool)
        w, mu, var = self.weights, self.means, self.variances

        sigma = np.sqrt(var)
        order = np.argsort(-(w / sigma), axis=-1, kind="stable")
        w_sorted = np.take_along_axis(w, order, axis=-1)
        mu_sorted = np.take_along_axis(mu, order, axis=-1)
        sig_sorted = np.take_along_axis(sigma, order, axis=-1)
        matches = (np.abs(x[..., None] - mu_sorted) <= p.match_distance * sig_sorted) & (
            w_sorted > 0.0
        )
        has_match = matches.any(axis=-1)
        first_pos = np.argmax(matches, axis=-1)
        matched_k = np.take_along_axis(order, first_pos[..., None], axis=-1)[..., 0]

        # Background = matched component sits inside the smallest fitness-sorted
        # prefix whose cumulative weight reaches the background ratio.
        cum = np.cumsum(w_sorted, axis=-1)
        prefix_end = np.argmax(cum >= p.background_ratio, axis=-1)
        background = has_match & (first_pos <= prefix_end)

        onehot = np.arange(p.components) == matched_k[..., None]
        alpha = p.learning_rate

        # Matched pixels: decay all weights, boost the matched one, then adapt
        # the matched mean/variance at rate alpha / new weight.
        w_new = np.where(has_match[..., None], (1.0 - alpha) * w + alpha * onehot, w)
        rho = np.minimum(alpha / np.maximum(w_new, _WEIGHT_FLOOR), 1.0)
        adapt = has_match[..., None] & onehot
        mu_new = np.where(adapt, (1.0 - rho) * mu + rho * x[..., None], mu)
        var_new = np.where(adapt, (1.0 - rho) * var + rho * (x[..., None] - mu_new) ** 2, var)
        var_new = np.where(adapt, np.maximum(var_new, p.variance_floor), var_new)

        # Unmatched pixels: overwrite the lowest-weight slot with a fresh component.
        lowest = np.argmin(w, axis=-1)
        replace = ~has_match[..., None] & (np.arange(p.components) == lowest[..., None])
        w_new = np.where(replace, p.replacement_weight, w_new)
        mu_new = np.where(replace, x[..., None], mu_new)
        var_new = np.where(replace, p.initial_variance, var_new)

        w_new = w_new / np.sum(w_new, axis=-1, keepdims=True)

        self.weights, self.means, self.variances = w_new, mu_new, var_new
        return ~background


def gmm_update_and_classify(model: GmmPixelModel, frame: Frame | np.ndarray) -> np.ndarray:
    pixels = frame.pixels if isinstance(frame, Frame) else frame
    return model.update_and_classify(pixels)


# --- detector adapters sharing the scoring surface --------------------------

@dataclass(frozen=True)
class EdgeFitParams:
    degree: int = 2
    canny_low: float = 40.0
    canny_high: float = 80.0

    def __post_init__(self):
        errors = {}
        if not 0 <= self.degree <= 5:
            errors["edgefit.degree"] = "degree must be in [0, 5]"
        if not 0 < self.canny_low <= self.canny_high:
            errors["edgefit.canny_low"] = "need 0 < canny_low <= canny_high"
        if errors:
            raise ConfigError("invalid edge-fit parameters", errors)


class GmmDetector:
    """Foreground-pixel counter: per-frame value is the in-mask foreground count."""

    name = "gmm"

    def __init__(self, params: GmmParams, blur: BlurSpec, mask: RoiMask):
        self.blur = blur
        self.mask = mask
        self.model = GmmPixelModel(params)

    def set_mask(self, mask: RoiMask) -> None:
        self.mask = mask

    def process(self, frame: Frame):
        blurred = blur_pixels(frame.pixels, self.blur) if self.blur.kind != "none" else frame.pixels
        seeded = self.model.weights is not None
        foreground = self.model.update_and_classify(blurred)
        if not seeded:
            return None
        bits = foreground & self.mask.bits
        return int(np.count_nonzero(bits)), bits


class EdgeFitDetector:
    """Edge deviation scorer: per-frame value is the mean edge displacement in px.

    The first frame establishes the no-slack baseline fit; a mask change marks
    the baseline stale and the next frame re-fits instead of scoring.
    """

    name = "edgefit"

    def __init__(self, params: EdgeFitParams, blur: BlurSpec, mask: RoiMask):
        self.params = params
        self.blur = blur
        self.mask = mask
        self.baseline: EdgeFitModel | None = None

    def set_mask(self, mask: RoiMask) -> None:
        self.mask = mask
        self.baseline = None

    def _fit_baseline(self, edges: np.ndarray) -> None:
        columns, centers, pixel_count = edge_centerline(edges, self.mask)
        if columns.size <= self.params.degree:
            raise ConfigError(
                "edge-fit baseline failed: too few edge pixels inside the ROI",
                {"edgefit": "baseline frame has too few in-ROI edge pixels"},
            )
        self.baseline = polyfit_least_squares(
            np.column_stack([columns, centers]), self.params.degree
        )

    def process(self, frame: Frame):
        edges = canny(frame, self.params.canny_low, self.params.canny_high, self.blur)
        if self.baseline is None:
            self._fit_baseline(edges)
            return None
        bits = edges & self.mask.bits
        deviation = edge_deviation_score(edges, self.baseline, self.mask)
        return deviation.score, bits
