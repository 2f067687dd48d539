"""Command-line entry point exposing the whole pipeline.

Subcommands: prepare (split / lfw), crop, classify, video, bench, evaluate.
Set CROP_ENSEMBLE_LOG=debug|info|warning to control diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import cv2

from . import datakit
from .boxcrop import (
    DELTA_NOMINAL,
    FaceBox,
    Frame,
    expand_margin,
    extract_and_squeeze,
    make_box_triple,
    normalize_to_reference,
)
from .ensemble import VoteMode, aggregate
from .errors import CropEnsembleError, InvalidInputError
from .infer import ModelManifest, MockSpec, classify_cropset, load_backend
from .pipeline import (
    BenchConfig,
    ImageSequenceSink,
    SidecarDetections,
    bench,
    open_frame_source,
    run_video,
)

log = logging.getLogger(__name__)


def parse_box(text: str) -> FaceBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise InvalidInputError(f"--box wants x_a,y_a,x_b,y_b, got {text!r}")
    xa, ya, xb, yb = (int(p) for p in parts)
    return FaceBox(xa, ya, xb, yb)


def parse_model(spec: str) -> ModelManifest:
    """Model flag: ``mock``, ``mock:threshold=T``, ``mock:table=F``, or a manifest path."""
    if spec == "mock":
        return ModelManifest(backend_kind="mock")
    if spec.startswith("mock:"):
        key, _, value = spec[len("mock:"):].partition("=")
        if key == "threshold" and value:
            return ModelManifest(backend_kind="mock", mock=MockSpec(threshold=float(value)))
        if key == "table" and value:
            with open(value, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            table = {k: (float(v[0]), float(v[1])) for k, v in raw.items()}
            return ModelManifest(backend_kind="mock", mock=MockSpec(rule="fixed_table", table=table))
        raise InvalidInputError(f"unknown mock option {spec!r}")
    return ModelManifest.from_json_file(spec)


def load_image(path: str) -> Frame:
    img = cv2.imread(path, cv2.IMREAD_COLOR)
    if img is None:
        raise InvalidInputError(f"cannot read image {path}")
    return Frame(img[:, :, ::-1].copy())


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _box_for_frame(args, frame: Frame) -> tuple[Frame, FaceBox]:
    """Reference-normalize the frame and the --box together."""
    box = parse_box(args.box)
    ref_frame, boxes = normalize_to_reference(frame, (box,))
    if ref_frame is not frame:
        log.info("image rescaled to reference resolution; box rescaled alongside")
    return ref_frame, boxes[0]


def cmd_crop(args) -> int:
    frame = load_image(args.image)
    ref_frame, box = _box_for_frame(args, frame)
    if not args.no_expand:
        box = expand_margin(box, ref_frame)
    triple = make_box_triple(box, args.delta)
    crops = extract_and_squeeze(ref_frame, triple)
    print(f"delta: {triple.delta}")
    for name, b in (("left", triple.left_box), ("right", triple.right_box), ("middle", triple.middle)):
        print(f"{name}: ({b.xa}, {b.ya})-({b.xb}, {b.yb})")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, img in zip(("left", "middle", "right"), crops.images):
        cv2.imwrite(str(out_dir / f"{name}.png"), img[:, :, ::-1])
    print(f"crops written to {out_dir}")
    return 0


def cmd_classify(args) -> int:
    frame = load_image(args.image)
    ref_frame, box = _box_for_frame(args, frame)
    if not args.no_expand:
        box = expand_margin(box, ref_frame)
    triple = make_box_triple(box, args.delta)
    crops = extract_and_squeeze(ref_frame, triple)
    handle = load_backend(parse_model(args.model))
    scores = classify_cropset(handle, crops)
    decision = aggregate(scores, VoteMode.parse(args.mode))
    _emit(json.dumps(decision.to_dict(), indent=2), args.out)
    return 0


def cmd_video(args) -> int:
    frames = open_frame_source(args.video)
    provider = SidecarDetections(args.detections)
    handle = load_backend(parse_model(args.model))
    sink = ImageSequenceSink(args.out)
    report = run_video(
        frames, provider, handle, VoteMode.parse(args.mode),
        sink=sink, parallelism=args.parallel, delta=args.delta,
    )
    if args.fps_report:
        Path(args.fps_report).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"{report.frames} frames in {report.wall_time:.2f}s = {report.fps:.1f} fps"
          + (" [INCOMPLETE]" if report.incomplete else ""))
    return 1 if report.incomplete else 0


def cmd_bench(args) -> int:
    width, _, height = args.frame_size.partition("x")
    config = BenchConfig(
        frames=args.frames,
        parallelism=args.parallel,
        frame_width=int(width),
        frame_height=int(height),
        boxes_per_frame=args.boxes_per_frame,
        seed=args.seed,
        mode=VoteMode.parse(args.mode),
        delta=args.delta,
    )
    handle = load_backend(parse_model(args.model))
    report = bench(config, handle)
    _emit(report.to_json(), args.out)
    return 0


def cmd_prepare_split(args) -> int:
    records = datakit.read_manifest(args.manifest)
    fractions = tuple(float(f) for f in args.fractions.split(","))
    if len(fractions) != 3:
        raise InvalidInputError(f"--fractions wants train,val,test, got {args.fractions!r}")
    spec = datakit.SplitSpec(fractions=fractions, seed=args.seed)
    assigned = datakit.split(records, spec)
    datakit.write_manifest(assigned, args.out)
    counts = {s: 0 for s in datakit.SPLITS}
    for r in assigned:
        counts[r.split] += 1
    print(" ".join(f"{s}={counts[s]}" for s in datakit.SPLITS))
    return 0


def cmd_prepare_lfw(args) -> int:
    records = datakit.read_manifest(args.manifest)
    report = datakit.prepare_lfw(records, manifest_path=args.manifest)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"resampled={len(report.resampled)} already={len(report.already_normalized)} "
          f"failed={len(report.failures)}")
    return 0


def cmd_evaluate(args) -> int:
    records = {r.path: r for r in datakit.read_manifest(args.manifest)}
    with open(args.predictions, "r", encoding="utf-8") as fh:
        preds = json.load(fh)
    pairs = []
    for entry in preds:
        path, label = entry["path"], entry["label"]
        if path not in records:
            raise InvalidInputError(f"prediction for unknown manifest path {path!r}")
        pairs.append((records[path], label))
    report = datakit.evaluate(pairs)
    print(report.format_text())
    if args.out:
        Path(args.out).write_text(datakit.eval_report_to_json(report) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crop-ensemble",
        description="Face-crop ensemble gender classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_geometry_flags(p):
        p.add_argument("--image", required=True, help="input image file")
        p.add_argument("--box", required=True, help="detected box as x_a,y_a,x_b,y_b")
        p.add_argument("--no-expand", action="store_true",
                       help="treat --box as already margin-expanded")
        p.add_argument("--delta", type=int, default=DELTA_NOMINAL,
                       help="crop offset at reference resolution")

    p = sub.add_parser("crop", help="derive and save the three crops of a box")
    add_geometry_flags(p)
    p.add_argument("--out", default="crops", help="directory for crop images")
    p.set_defaults(fn=cmd_crop)

    p = sub.add_parser("classify", help="classify a single image end to end")
    add_geometry_flags(p)
    p.add_argument("--model", required=True, help="mock[:opt=val] or a model manifest path")
    p.add_argument("--mode", default="soft", choices=("soft", "hard"))
    p.add_argument("--out", help="write the decision JSON here instead of stdout")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("video", help="annotate a frame stream")
    p.add_argument("--video", required=True, help="video file or directory of frames")
    p.add_argument("--detections", required=True, help="sidecar detections file")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", default="soft", choices=("soft", "hard"))
    p.add_argument("--out", default="annotated", help="directory for annotated frames")
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    p.add_argument("--delta", type=int, default=DELTA_NOMINAL)
    p.add_argument("--fps-report", help="write the throughput report JSON here")
    p.set_defaults(fn=cmd_video)

    p = sub.add_parser("bench", help="measure per-stage throughput on synthetic frames")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--model", default="mock")
    p.add_argument("--mode", default="soft", choices=("soft", "hard"))
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    p.add_argument("--frame-size", default="816x816", metavar="WxH")
    p.add_argument("--boxes-per-frame", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=int, default=DELTA_NOMINAL)
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("prepare", help="dataset preparation tools")
    prep = p.add_subparsers(dest="prepare_command", required=True)

    ps = prep.add_parser("split", help="assign subject-disjoint train/val/test splits")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--fractions", default="0.5,0.15,0.35")
    ps.set_defaults(fn=cmd_prepare_split)

    pl = prep.add_parser("lfw", help="rescale LFW images to the reference resolution")
    pl.add_argument("--manifest", required=True)
    pl.add_argument("--report", help="write the preparation report JSON here")
    pl.set_defaults(fn=cmd_prepare_lfw)

    p = sub.add_parser("evaluate", help="score predictions against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True, help="JSON list of {path, label}")
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(fn=cmd_evaluate)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("CROP_ENSEMBLE_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def dispatch(argv: list[str]) -> int:
    """Run one subcommand; returns the process exit status."""
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (CropEnsembleError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
