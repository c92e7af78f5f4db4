"""Batch entry points: analyze footage, calibrate thresholds, render scenes, bench.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 invalid configuration.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from cablewatch.change_detect import DetectorConfig, SlackEvent, run_pipeline
from cablewatch.errors import ConfigError, SequenceError
from cablewatch.ingest import FrameSequence, open_sequence
from cablewatch.preprocess import estimate_noise_sigma, tau_from_sigma
from cablewatch.render import export_run
from cablewatch.roi import load_roi_config, polygons_from_config, rasterize
from cablewatch.synth import SceneSpec, as_sequence, scenario_roi, scenario_suite, write_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONFIG = 4

# Edge deviation is measured in pixels, not pixel counts, so the shared event
# thresholds need a detector-appropriate scale when benchmarking.
BENCH_SCORE_THRESHOLDS = {"diff": (50.0, 25.0), "gmm": (50.0, 25.0), "edgefit": (3.0, 1.5)}


def resolve_input(value: str) -> FrameSequence:
    """A sequence path (.y8 or frame directory), scene-spec JSON, or scenario name."""
    scenarios = scenario_suite()
    if value in scenarios:
        return as_sequence(scenarios[value])
    path = Path(value)
    if path.suffix == ".json" and path.is_file():
        try:
            return as_sequence(SceneSpec.from_dict(json.loads(path.read_text())))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad scene spec {path}: {exc}")
    return open_sequence(path)


def _load_config(path: str | None) -> DetectorConfig:
    if path is None:
        return DetectorConfig()
    return DetectorConfig.load(path)


def _event_lines(events: list[SlackEvent]) -> list[str]:
    lines = [f"{len(events)} event" + ("" if len(events) == 1 else "s")]
    for e in events:
        lines.append(
            f"EVENT {e.id} frames {e.start_frame}..{e.end_frame} peak {e.peak_score:g}@{e.peak_frame}"
        )
    return lines


def cmd_analyze(args: argparse.Namespace) -> int:
    sequence = resolve_input(args.input)
    polygons, _ = load_roi_config(args.roi)
    config = _load_config(args.config)
    if args.detector:
        config = DetectorConfig.from_dict({**config.to_dict(), "detector": args.detector})
    result = run_pipeline(sequence, polygons, config)
    export_run(result, args.out, polygons)
    for line in _event_lines(result.events):
        print(line)
    print(f"wrote {Path(args.out) / 'scores.csv'}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    sequence = resolve_input(args.input)
    polygons, _ = load_roi_config(args.roi)
    mask = rasterize(polygons, sequence.meta.width, sequence.meta.height)
    frames = list(itertools.islice(iter(sequence), args.frames))
    if len(frames) < 2:
        print("calibrate: input shorter than 2 frames", file=sys.stderr)
        return EXIT_IO
    sigma = estimate_noise_sigma(frames, mask)
    tau = tau_from_sigma(sigma, args.target_far)
    if sigma == 0.0:
        print("warning: no measurable noise; tau floored at 1", file=sys.stderr)
    print(f"sigma {sigma:.4f}")
    print(f"tau {tau}")
    if args.out:
        config = _load_config(args.config)
        data = config.to_dict()
        data["tau"] = tau
        Path(args.out).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.spec:
        spec_path = Path(args.spec)
        if not spec_path.exists():
            raise FileNotFoundError(f"scene spec not found: {spec_path}")
        try:
            spec = SceneSpec.from_dict(json.loads(spec_path.read_text()))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad scene spec {spec_path}: {exc}")
    else:
        spec = scenario_suite()[args.scenario]
    paths = write_scene(spec, args.out)
    for kind in ("y8", "sidecar", "truth"):
        print(f"wrote {paths[kind]}")
    return EXIT_OK


# --- bench --------------------------------------------------------------------

def temporal_iou(detected: list[tuple[int, int]], truth: list[tuple[int, int]]) -> float:
    """Intersection-over-union of frame sets covered by the two interval lists."""
    det = set()
    for a, b in detected:
        det.update(range(a, b + 1))
    gt = set()
    for a, b in truth:
        gt.update(range(a, b + 1))
    union = det | gt
    if not union:
        return 1.0
    return len(det & gt) / len(union)


def detection_latency(events: list[SlackEvent], truth: list[tuple[int, int]]) -> int | None:
    """Frames from the first ground-truth start to the first event opening at/after it."""
    if not truth:
        return None
    gt_start = min(a for a, _ in truth)
    opens = [e.start_frame - gt_start for e in events if e.start_frame >= gt_start]
    return min(opens) if opens else None


def false_event_count(events: list[SlackEvent], truth: list[tuple[int, int]]) -> int:
    """Detected events that overlap no ground-truth interval."""
    false = 0
    for e in events:
        if not any(e.start_frame <= b and a <= e.end_frame for a, b in truth):
            false += 1
    return false


def _bench_cell(name: str, detector: str) -> dict:
    from cablewatch.synth import ground_truth, iter_frames

    spec = scenario_suite()[name]
    polygons = polygons_from_config(scenario_roi(name))
    mask = rasterize(polygons, spec.width, spec.height)
    quiet = list(itertools.islice(iter_frames(spec), 40))
    sigma = estimate_noise_sigma(quiet, mask)
    score_on, score_off = BENCH_SCORE_THRESHOLDS[detector]
    config = DetectorConfig.from_dict(
        {
            "detector": detector,
            "tau": tau_from_sigma(sigma),
            "score_on": score_on,
            "score_off": score_off,
        }
    )
    result = run_pipeline(iter_frames(spec), mask, config)
    truth = [(e["start"], e["end"]) for e in ground_truth(spec)["events"]]
    detected = [(e.start_frame, e.end_frame) for e in result.events]
    latency = detection_latency(result.events, truth)
    return {
        "scenario": name,
        "detector": detector,
        "events": len(result.events),
        "latency": "" if latency is None else latency,
        "iou": f"{temporal_iou(detected, truth):.3f}",
        "false_events": false_event_count(result.events, truth),
    }


BENCH_COLUMNS = ("scenario", "detector", "events", "latency", "iou", "false_events")


def cmd_bench(args: argparse.Namespace) -> int:
    scenarios = args.scenarios.split(",")
    detectors = args.detectors.split(",")
    known = scenario_suite()
    for s in scenarios:
        if s not in known:
            print(f"bench: unknown scenario {s}", file=sys.stderr)
            return EXIT_USAGE
    for d in detectors:
        if d not in BENCH_SCORE_THRESHOLDS:
            print(f"bench: unknown detector {d}", file=sys.stderr)
            return EXIT_USAGE
    rows = [_bench_cell(s, d) for s in scenarios for d in detectors]
    widths = {
        c: max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in BENCH_COLUMNS
    }
    print("  ".join(c.ljust(widths[c]) for c in BENCH_COLUMNS))
    for r in rows:
        print("  ".join(str(r[c]).ljust(widths[c]) for c in BENCH_COLUMNS))
    csv_text = "\n".join(
        [",".join(BENCH_COLUMNS)] + [",".join(str(r[c]) for c in BENCH_COLUMNS) for r in rows]
    ) + "\n"
    if args.csv:
        Path(args.csv).write_text(csv_text)
        print(f"wrote {args.csv}")
    else:
        print(csv_text, end="")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from cablewatch.gateway import serve

    return serve(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cablewatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run a detector over footage and export results")
    p.add_argument("--input", required=True, help="frame dir, .y8 file, scene JSON, or S1..S5")
    p.add_argument("--roi", required=True, help="ROI config JSON")
    p.add_argument("--config", help="detector config JSON (defaults used when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--detector", choices=("diff", "gmm", "edgefit"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="suggest a change threshold from quiet footage")
    p.add_argument("--input", required=True)
    p.add_argument("--roi", required=True)
    p.add_argument("--target-far", type=float, default=None, dest="target_far",
                   help="per-pixel false-alarm probability (default: 5-sigma margin)")
    p.add_argument("--frames", type=int, default=100, help="quiet frames to sample")
    p.add_argument("--config", help="base config JSON to copy other fields from")
    p.add_argument("--out", help="write the resulting config JSON here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="render a synthetic scenario to .y8 + ground truth")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", choices=sorted(scenario_suite().keys()))
    group.add_argument("--spec", help="scene spec JSON path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="compare detectors across scenarios")
    p.add_argument("--scenarios", default="S1,S2,S3,S4,S5")
    p.add_argument("--detectors", default="diff,gmm,edgefit")
    p.add_argument("--csv", help="also write the CSV here instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="HTTP gateway replaying footage for the operator console")
    p.add_argument("--input", required=True, help="frame dir, .y8 file, scene JSON, or S1..S5")
    p.add_argument("--roi", required=True)
    p.add_argument("--config", help="detector config JSON")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.add_argument("--speed", type=float, default=1.0,
                   help="replay rate multiplier; 0 means as fast as possible")
    p.add_argument("--ui", help="serve this directory (built operator console) at /")
    p.add_argument("--audit-log", dest="audit_log", help="append mutation audit entries here")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for field, message in exc.field_errors.items():
            print(f"  {field}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except SequenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
