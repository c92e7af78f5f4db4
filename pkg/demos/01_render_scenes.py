"""Render the standard synthetic scenarios and look at what each one contains.

Every detector in this package is validated against these desk-scale scenes:
a quadratic cable over a flat background, sensor noise, optional global
flicker, and scripted sag episodes with exact per-frame ground truth.
"""

from pathlib import Path

import numpy as np

from cablewatch.synth import ground_truth, render_scene, scenario_suite

OUT = Path(__file__).parent / "output" / "scenes"
OUT.mkdir(parents=True, exist_ok=True)

for name, spec in scenario_suite().items():
    truth = ground_truth(spec)
    print(f"{name}: {spec.frame_count} frames, noise sigma {spec.noise_sigma}, "
          f"flicker {spec.flicker_amplitude}, {len(truth['events'])} slack events")
    for event in truth["events"]:
        print(f"    frames {event['start']}..{event['end']} sag {event['sag_px']:.1f} px")

# Save a strip of frames from S2 around its severe final event.
spec = scenario_suite()["S2"]
frames, truth = render_scene(spec)
final = truth["events"][-1]
picks = [final["start"] - 20, final["start"] + 10, (final["start"] + final["end"]) // 2]

from PIL import Image

for n in picks:
    Image.fromarray(frames[n]).save(OUT / f"s2_frame_{n}.png")
    print(f"wrote {OUT / f's2_frame_{n}.png'}")

# The ground truth is exact: with noise disabled, a frame differs from the
# quiet baseline exactly when its recorded sag is positive.
from dataclasses import replace

clean_frames, clean_truth = render_scene(replace(spec, noise_sigma=0.0))
quiet = clean_frames[0]
sag = clean_truth["per_frame_sag"]
mismatches = sum(
    1
    for n in range(spec.frame_count)
    if (not np.array_equal(clean_frames[n], quiet)) != (sag[n] > 0)
)
print("frames disagreeing with ground truth:", mismatches)
