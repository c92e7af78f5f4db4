"""Cable slack monitoring via video change detection.

A camera watching a cable drum produces a grayscale frame stream. The core
detector masks each frame to an operator-drawn region of interest, blurs it,
differences it against a lagged reference frame, counts changed pixels, and
smooths the counts into a score whose threshold crossings become slack events.
Alternative detectors (edge-fit deviation, adaptive Gaussian mixtures) share
the same scoring and event machinery so they can be compared on equal terms.
"""

from cablewatch.errors import CablewatchError, ConfigError, SequenceError
from cablewatch.ingest import Frame, SequenceMeta, open_sequence, to_grayscale
from cablewatch.roi import RoiMask, RoiPolygon, mask_apply, point_in_polygon, rasterize
from cablewatch.preprocess import (
    BlurSpec,
    bilateral_filter,
    estimate_noise_sigma,
    gaussian_blur,
)
from cablewatch.change_detect import (
    ChangeMap,
    DetectorConfig,
    ReferencePolicy,
    ScoreRecord,
    ScoreSeries,
    SlackEvent,
    extract_events,
    reference_index,
    run_pipeline,
    subtract_and_threshold,
)
from cablewatch.synth import SceneSpec, render_scene, scenario_suite

__version__ = "0.1.0"

__all__ = [
    "BlurSpec",
    "CablewatchError",
    "ChangeMap",
    "ConfigError",
    "DetectorConfig",
    "Frame",
    "ReferencePolicy",
    "RoiMask",
    "RoiPolygon",
    "SceneSpec",
    "ScoreRecord",
    "ScoreSeries",
    "SequenceError",
    "SequenceMeta",
    "SlackEvent",
    "bilateral_filter",
    "estimate_noise_sigma",
    "extract_events",
    "gaussian_blur",
    "mask_apply",
    "open_sequence",
    "point_in_polygon",
    "rasterize",
    "reference_index",
    "render_scene",
    "run_pipeline",
    "scenario_suite",
    "subtract_and_threshold",
    "to_grayscale",
]
