"""Per-frame orchestration, the video loop, and the throughput bench.

A frame travels: detection intake -> reference normalization -> margin
expansion -> box triple -> squeezed crops -> per-crop classification ->
vote aggregation -> annotation.  Crops of one face may fan out to a thread
pool; results are always gathered in (Left, Middle, Right) order, so
parallelism never changes a decision.
"""

from __future__ import annotations

import importlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol, Sequence

import cv2
import numpy as np

from .boxcrop import (
    DELTA_NOMINAL,
    FaceBox,
    Frame,
    expand_margin,
    extract_and_squeeze,
    make_box_triple,
    normalize_to_reference,
    reference_scale,
    scale_box,
)
from .ensemble import Decision, VoteMode, aggregate
from .errors import FrameSourceError, InvalidInputError, SinkWriteError
from .infer import MAN, WOMAN, ClassifierHandle, classify_cropset

log = logging.getLogger(__name__)

STAGES = ("detect_intake", "geometry", "inference", "aggregate")

# annotation colors (RGB), per the red-man/blue-woman convention
LABEL_COLORS = {MAN: (255, 0, 0), WOMAN: (0, 0, 255)}
BOX_THICKNESS = 3


@dataclass(frozen=True)
class StageTimings:
    """Milliseconds spent per stage while processing one frame."""

    detect_intake: float = 0.0
    geometry: float = 0.0
    inference: float = 0.0
    aggregate: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {
            "detect_intake": self.detect_intake,
            "geometry": self.geometry,
            "inference": self.inference,
            "aggregate": self.aggregate,
        }


@dataclass(frozen=True)
class FrameResult:
    frame_index: int
    faces: tuple[tuple[FaceBox, Decision], ...]
    skipped: tuple[tuple[FaceBox, str], ...]
    timings: StageTimings


@dataclass(frozen=True)
class StageStats:
    mean_ms: float
    p95_ms: float


@dataclass(frozen=True)
class ThroughputReport:
    frames: int
    wall_time: float
    fps: float
    per_stage: dict[str, StageStats]
    fps_excluding_intake: float | None = None
    incomplete: bool = False

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "wall_time_s": self.wall_time,
            "fps": self.fps,
            "fps_excluding_intake": self.fps_excluding_intake,
            "per_stage": {
                name: {"mean_ms": s.mean_ms, "p95_ms": s.p95_ms}
                for name, s in self.per_stage.items()
            },
            "incomplete": self.incomplete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class DetectionSource(Protocol):
    """Yields detected face boxes for a frame, in native frame coordinates."""

    def boxes_for(self, frame_index: int, frame: Frame) -> list[FaceBox]: ...


class SidecarDetections:
    """Pre-computed detections: one ``frame_index x_a y_a x_b y_b`` per line."""

    def __init__(self, path: str | Path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise FrameSourceError(f"cannot read detections sidecar {path}: {e}") from e
        self._by_frame: dict[int, list[FaceBox]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 5:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected 5 values (frame_index x_a y_a x_b y_b), got {len(parts)}"
                )
            idx, xa, ya, xb, yb = (int(p) for p in parts)
            self._by_frame.setdefault(idx, []).append(FaceBox(xa, ya, xb, yb))

    def boxes_for(self, frame_index: int, frame: Frame) -> list[FaceBox]:
        return list(self._by_frame.get(frame_index, []))


class PluginDetections:
    """Live detector seam: ``module:callable`` invoked per frame."""

    def __init__(self, spec: str):
        if ":" not in spec:
            raise InvalidInputError(f"plugin spec must be module:callable, got {spec!r}")
        mod_name, attr = spec.split(":", 1)
        try:
            self._fn = getattr(importlib.import_module(mod_name), attr)
        except (ImportError, AttributeError) as e:
            raise InvalidInputError(f"cannot resolve detection plugin {spec!r}: {e}") from e

    def boxes_for(self, frame_index: int, frame: Frame) -> list[FaceBox]:
        boxes = []
        for item in self._fn(frame_index, frame):
            if isinstance(item, FaceBox):
                boxes.append(item)
            else:
                xa, ya, xb, yb = item
                boxes.append(FaceBox(int(xa), int(ya), int(xb), int(yb)))
        return boxes


def make_detection_provider(kind: str, source: str | Path) -> DetectionSource:
    if kind == "sidecar_file":
        return SidecarDetections(source)
    if kind == "plugin":
        return PluginDetections(str(source))
    raise InvalidInputError(f"detection provider kind must be sidecar_file or plugin, got {kind!r}")


class AnnotationSink(Protocol):
    def write(self, frame_index: int, annotated_rgb: np.ndarray) -> None: ...


class ImageSequenceSink:
    """Writes annotated frames as numbered PNGs."""

    def __init__(self, directory: str | Path, prefix: str = "frame"):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix

    def write(self, frame_index: int, annotated_rgb: np.ndarray) -> None:
        path = self.directory / f"{self.prefix}_{frame_index:05d}.png"
        if not cv2.imwrite(str(path), annotated_rgb[:, :, ::-1]):
            raise SinkWriteError(f"failed to write {path}")


class NullSink:
    def write(self, frame_index: int, annotated_rgb: np.ndarray) -> None:
        pass


def annotate_frame(frame: Frame, faces: Sequence[tuple[FaceBox, Decision]]) -> np.ndarray:
    """Draw each decision onto a copy of the frame: red box Man, blue Woman."""
    out = frame.pixels.copy()
    for box, decision in faces:
        color = LABEL_COLORS[decision.label]
        xmin, ymin, xmax, ymax = box.bounds()
        cv2.rectangle(out, (xmin, ymin), (xmax, ymax), color, BOX_THICKNESS)
        text_y = ymin - 8 if ymin >= 20 else ymax + 20
        cv2.putText(
            out, decision.label, (xmin, text_y),
            cv2.FONT_HERSHEY_SIMPLEX, 0.6, color, 2, cv2.LINE_AA,
        )
    return out


def _classify_triple(handle: ClassifierHandle, crops, executor: ThreadPoolExecutor | None):
    if executor is not None and getattr(handle, "concurrency", "serial") == "concurrent":
        futures = [executor.submit(handle.classify, img) for img in crops.images]
        return tuple(f.result() for f in futures)
    # serial handles are never shared across workers; sequential calls
    # are the serialization the handle asked for
    return classify_cropset(handle, crops)


def process_frame(
    frame: Frame,
    boxes: Sequence[FaceBox],
    handle: ClassifierHandle,
    mode: VoteMode = VoteMode.SOFT_MEAN,
    *,
    frame_index: int = 0,
    delta: int = DELTA_NOMINAL,
    executor: ThreadPoolExecutor | None = None,
) -> FrameResult:
    """Classify every detected face in one frame.

    Faces are processed in input order and isolated from each other: a
    degenerate crop is recorded as skipped without disturbing the rest.
    """
    t0 = time.perf_counter()
    ref_frame, _ = normalize_to_reference(frame)
    sx, sy = reference_scale(frame)
    intake_ms = (time.perf_counter() - t0) * 1e3

    geometry_ms = inference_ms = aggregate_ms = 0.0
    faces: list[tuple[FaceBox, Decision]] = []
    skipped: list[tuple[FaceBox, str]] = []
    for box in boxes:
        try:
            g0 = time.perf_counter()
            ref_box = scale_box(box, sx, sy)
            expanded = expand_margin(ref_box, ref_frame)
            triple = make_box_triple(expanded, delta)
            crops = extract_and_squeeze(ref_frame, triple)
            geometry_ms += (time.perf_counter() - g0) * 1e3

            i0 = time.perf_counter()
            scores = _classify_triple(handle, crops, executor)
            inference_ms += (time.perf_counter() - i0) * 1e3

            a0 = time.perf_counter()
            decision = aggregate(scores, mode)
            aggregate_ms += (time.perf_counter() - a0) * 1e3
            faces.append((box, decision))
        except InvalidInputError as e:
            log.warning("frame %d: skipping face %s: %s", frame_index, box, e)
            skipped.append((box, str(e)))
    return FrameResult(
        frame_index=frame_index,
        faces=tuple(faces),
        skipped=tuple(skipped),
        timings=StageTimings(intake_ms, geometry_ms, inference_ms, aggregate_ms),
    )


def run_video(
    frames: Iterable[Frame],
    provider: DetectionSource,
    handle: ClassifierHandle,
    mode: VoteMode = VoteMode.SOFT_MEAN,
    *,
    sink: AnnotationSink | None = None,
    parallelism: int = 1,
    delta: int = DELTA_NOMINAL,
    on_result: Callable[[FrameResult], None] | None = None,
) -> ThroughputReport:
    """Process a frame stream end to end, writing annotated frames to the sink.

    Returns a throughput report; a sink failure aborts the run and flags the
    partial report as incomplete.
    """
    if parallelism < 1:
        raise InvalidInputError(f"parallelism must be >= 1, got {parallelism}")
    sink = sink or NullSink()
    executor = ThreadPoolExecutor(max_workers=parallelism) if parallelism > 1 else None
    samples: dict[str, list[float]] = {s: [] for s in STAGES}
    n = 0
    incomplete = False
    it = iter(frames)
    t_start = time.perf_counter()
    try:
        while True:
            try:
                frame = next(it)
            except StopIteration:
                break
            except FrameSourceError:
                raise
            except Exception as e:
                raise FrameSourceError(f"frame source failed at frame {n}: {e}") from e

            i0 = time.perf_counter()
            boxes = provider.boxes_for(n, frame)
            intake_extra_ms = (time.perf_counter() - i0) * 1e3

            result = process_frame(
                frame, boxes, handle, mode,
                frame_index=n, delta=delta, executor=executor,
            )
            timings = result.timings.as_dict()
            timings["detect_intake"] += intake_extra_ms
            for stage in STAGES:
                samples[stage].append(timings[stage])

            annotated = annotate_frame(frame, result.faces)
            try:
                sink.write(n, annotated)
            except Exception as e:
                log.error("annotation sink failed on frame %d: %s; aborting", n, e)
                incomplete = True
                n += 1
                break
            if on_result is not None:
                on_result(result)
            n += 1
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
    wall = time.perf_counter() - t_start
    if n == 0:
        raise FrameSourceError("frame source yielded no frames")
    return _build_report(n, wall, samples, incomplete)


def _build_report(
    frames: int, wall: float, samples: dict[str, list[float]], incomplete: bool = False
) -> ThroughputReport:
    per_stage = {}
    for stage in STAGES:
        vals = samples[stage]
        if vals:
            per_stage[stage] = StageStats(
                mean_ms=float(np.mean(vals)), p95_ms=float(np.percentile(vals, 95))
            )
        else:
            per_stage[stage] = StageStats(0.0, 0.0)
    intake_total_s = sum(samples["detect_intake"]) / 1e3
    fps_excl = frames / (wall - intake_total_s) if wall > intake_total_s else None
    return ThroughputReport(
        frames=frames,
        wall_time=wall,
        fps=frames / wall,
        per_stage=per_stage,
        fps_excluding_intake=fps_excl,
        incomplete=incomplete,
    )


@dataclass(frozen=True)
class BenchConfig:
    """Parameters of a synthetic throughput run."""

    frames: int
    parallelism: int = 1
    frame_width: int = 816
    frame_height: int = 816
    boxes_per_frame: int = 1
    seed: int = 0
    mode: VoteMode = VoteMode.SOFT_MEAN
    delta: int = DELTA_NOMINAL

    def __post_init__(self):
        if self.frames < 1:
            raise InvalidInputError(f"bench needs at least 1 frame, got {self.frames}")
        if self.parallelism < 1:
            raise InvalidInputError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.frame_width < 8 or self.frame_height < 8:
            raise InvalidInputError("bench frames must be at least 8x8")
        if self.boxes_per_frame < 1:
            raise InvalidInputError("bench needs at least one box per frame")


def synthesize_frame(rng: np.random.Generator, width: int, height: int) -> Frame:
    return Frame(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def synthesize_boxes(
    rng: np.random.Generator, width: int, height: int, count: int
) -> list[FaceBox]:
    """Jittered face-sized boxes, top-left corner stored first."""
    boxes = []
    for _ in range(count):
        w = int(rng.integers(width // 4, max(width // 2, width // 4 + 1)))
        h = int(rng.integers(height // 4, max(height // 2, height // 4 + 1)))
        xa = int(rng.integers(0, max(width - w, 1)))
        ya = int(rng.integers(0, max(height - h, 1)))
        boxes.append(FaceBox(xa, ya, xa + w, ya + h))
    return boxes


def bench(config: BenchConfig, handle: ClassifierHandle) -> ThroughputReport:
    """Measure per-stage cost over synthetic frames.

    Frame synthesis is excluded from the clock, so the report isolates the
    crop machinery and classification; fps is frames over measured wall time.
    """
    rng = np.random.default_rng(config.seed)
    executor = ThreadPoolExecutor(max_workers=config.parallelism) if config.parallelism > 1 else None
    samples: dict[str, list[float]] = {s: [] for s in STAGES}
    wall = 0.0
    try:
        for i in range(config.frames):
            frame = synthesize_frame(rng, config.frame_width, config.frame_height)
            boxes = synthesize_boxes(rng, config.frame_width, config.frame_height, config.boxes_per_frame)
            t0 = time.perf_counter()
            result = process_frame(
                frame, boxes, handle, config.mode,
                frame_index=i, delta=config.delta, executor=executor,
            )
            wall += time.perf_counter() - t0
            for stage, ms in result.timings.as_dict().items():
                samples[stage].append(ms)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
    return _build_report(config.frames, wall, samples)


IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
VIDEO_EXTENSIONS = (".mp4", ".avi", ".mkv", ".mov", ".webm")


def frames_from_directory(path: str | Path) -> Iterator[Frame]:
    """Frames from a directory of images, in sorted filename order."""
    directory = Path(path)
    if not directory.is_dir():
        raise FrameSourceError(f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise FrameSourceError(f"no image files in {directory}")

    def gen() -> Iterator[Frame]:
        for f in files:
            img = cv2.imread(str(f), cv2.IMREAD_COLOR)
            if img is None:
                raise FrameSourceError(f"unreadable image {f}")
            yield Frame(img[:, :, ::-1].copy())

    return gen()


def frames_from_video(path: str | Path) -> Iterator[Frame]:
    """Frames decoded from a container video file."""
    if not Path(path).is_file():
        raise FrameSourceError(f"no such video file: {path}")
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise FrameSourceError(f"cannot open video {path}")

    def gen() -> Iterator[Frame]:
        try:
            while True:
                ok, img = capture.read()
                if not ok:
                    break
                yield Frame(img[:, :, ::-1].copy())
        finally:
            capture.release()

    return gen()


def open_frame_source(path: str | Path) -> Iterator[Frame]:
    """Directory of images or a video file, validated before iteration starts."""
    p = Path(path)
    if p.is_dir():
        return frames_from_directory(p)
    if p.is_file():
        return frames_from_video(p)
    raise FrameSourceError(f"frame source does not exist: {p}")
