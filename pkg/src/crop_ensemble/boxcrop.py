"""Face-box geometry: margin expansion, two-box/three-crop derivation, squeezing.

Coordinates are integer pixel indices with inclusive corners: a full-frame box
in an 816x816 frame is (0, 0)-(815, 815).  Box arithmetic is corner-wise and
never reorders the y axis; corners are normalized to min/max form only when
pixels are actually extracted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DegenerateCropError, InvalidInputError

log = logging.getLogger(__name__)

# All crop offsets are defined at this frame size; frames are rescaled to it
# before any box math.
REFERENCE_SIZE = 816
# Corner offset applied when deriving the left/right boxes, in reference pixels.
DELTA_NOMINAL = 100
# Side length of a squeezed crop, matching the classifier input.
CROP_SIZE = 224


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit RGB raster, row-major with the origin at the top-left."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 3 or p.shape[2] != 3:
            raise InvalidInputError("frame pixels must be an HxWx3 array")
        if p.dtype != np.uint8:
            raise InvalidInputError("frame pixels must be uint8")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidInputError("frame must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class FaceBox:
    """Corner pair (xa, ya)-(xb, yb) with xa < xb; y order is kept as given."""

    xa: int
    ya: int
    xb: int
    yb: int

    def __post_init__(self):
        if self.xa >= self.xb:
            raise InvalidInputError(
                f"box x corners must be ascending, got xa={self.xa} >= xb={self.xb}"
            )

    @property
    def corner_a(self) -> tuple[int, int]:
        return (self.xa, self.ya)

    @property
    def corner_b(self) -> tuple[int, int]:
        return (self.xb, self.yb)

    @property
    def width(self) -> int:
        return self.xb - self.xa

    @property
    def height(self) -> int:
        return abs(self.yb - self.ya)

    def bounds(self) -> tuple[int, int, int, int]:
        """Return (x_min, y_min, x_max, y_max)."""
        return (
            self.xa,
            min(self.ya, self.yb),
            self.xb,
            max(self.ya, self.yb),
        )

    def contains(self, other: "FaceBox") -> bool:
        xmin, ymin, xmax, ymax = self.bounds()
        oxmin, oymin, oxmax, oymax = other.bounds()
        return xmin <= oxmin and ymin <= oymin and xmax >= oxmax and ymax >= oymax


@dataclass(frozen=True)
class BoxTriple:
    """Left/right boxes plus their middle, with the offset actually applied."""

    left_box: FaceBox
    right_box: FaceBox
    middle: FaceBox
    delta: int

    def in_crop_order(self) -> tuple[FaceBox, FaceBox, FaceBox]:
        """Boxes in (Left, Middle, Right) crop order."""
        return (self.left_box, self.middle, self.right_box)


@dataclass(frozen=True, eq=False)
class CropSet:
    """Three squeezed crop images in (Left, Middle, Right) order."""

    regions: BoxTriple
    images: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        for img in self.images:
            if img.shape != (CROP_SIZE, CROP_SIZE, 3) or img.dtype != np.uint8:
                raise InvalidInputError(
                    f"crop images must be {CROP_SIZE}x{CROP_SIZE}x3 uint8"
                )


def reference_scale(frame: Frame, reference: int = REFERENCE_SIZE) -> tuple[float, float]:
    """Per-axis factors taking frame coordinates to reference coordinates."""
    return reference / frame.width, reference / frame.height


def scale_box(box: FaceBox, sx: float, sy: float, reference: int = REFERENCE_SIZE) -> FaceBox:
    """Rescale a box corner-wise by per-axis factors, clamped into the target frame.

    Rounds half away from zero so results are stable across platforms.
    """

    def sc(v: int, f: float) -> int:
        return min(max(int(math.floor(v * f + 0.5)), 0), reference - 1)

    return FaceBox(sc(box.xa, sx), sc(box.ya, sy), sc(box.xb, sx), sc(box.yb, sy))


def normalize_to_reference(
    frame: Frame,
    boxes: tuple[FaceBox, ...] | list[FaceBox] = (),
    reference: int = REFERENCE_SIZE,
) -> tuple[Frame, tuple[FaceBox, ...]]:
    """Rescale a frame to the square reference resolution, carrying boxes along.

    A frame already at the reference size is returned untouched (no resampling),
    and its boxes pass through unchanged.
    """
    if not isinstance(frame, Frame):
        raise InvalidInputError("normalize_to_reference expects a Frame")
    if frame.width == reference and frame.height == reference:
        return frame, tuple(boxes)
    sx, sy = reference_scale(frame, reference)
    resized = cv2.resize(frame.pixels, (reference, reference), interpolation=cv2.INTER_LINEAR)
    return Frame(resized), tuple(scale_box(b, sx, sy, reference) for b in boxes)


def expand_margin(box: FaceBox, frame: Frame) -> FaceBox:
    """Grow a detected box by half its width on each side and half its height upward.

    The corner with the smaller y is treated as the top regardless of storage
    order.  Fractional coordinates round toward the frame interior and the
    result is clamped to frame bounds, so output never escapes the frame.
    """
    half_w = box.width / 2.0
    half_h = box.height / 2.0

    new_xa = box.xa - half_w
    new_xb = box.xb + half_w
    new_ya = float(box.ya)
    new_yb = float(box.yb)
    if box.ya <= box.yb:
        new_ya -= half_h
    else:
        new_yb -= half_h

    # round toward the interior: min edges up, max edges down
    xa = max(0, math.ceil(new_xa))
    xb = min(frame.width - 1, math.floor(new_xb))
    if box.ya <= box.yb:
        ya = max(0, math.ceil(new_ya))
        yb = min(frame.height - 1, math.floor(new_yb))
    else:
        yb = max(0, math.ceil(new_yb))
        ya = min(frame.height - 1, math.floor(new_ya))
    return FaceBox(xa, ya, xb, yb)


def effective_delta(box: FaceBox, delta_nominal: int = DELTA_NOMINAL) -> int:
    """Offset actually usable for a box: the nominal value, reduced for small faces.

    The full offset applies whenever the middle region stays non-empty
    (min dimension > 2*delta).  Smaller boxes fall back to a quarter of the
    min dimension so all three crops stay distinct; at zero the caller
    degrades to a replicated full-box crop.
    """
    min_dim = min(box.width, box.height)
    if min_dim > 2 * delta_nominal:
        return delta_nominal
    return min(delta_nominal, min_dim // 4)


def make_box_triple(expanded: FaceBox, delta_nominal: int = DELTA_NOMINAL) -> BoxTriple:
    """Derive left/right boxes and their middle from an expanded face box.

    Arithmetic is corner-wise: the left box subtracts the offset from corner b,
    the right box adds it to corner a, and the middle does both.
    """
    if expanded.width <= 0 or expanded.height <= 0:
        raise InvalidInputError(
            f"expanded box must have positive extent, got {expanded.width}x{expanded.height}"
        )
    if delta_nominal < 0:
        raise InvalidInputError("offset must be non-negative")

    d = effective_delta(expanded, delta_nominal)
    if d == 0:
        log.warning(
            "box %s too small for a crop offset; replicating the full box", expanded
        )
        return BoxTriple(expanded, expanded, expanded, 0)

    left = FaceBox(expanded.xa, expanded.ya, expanded.xb - d, expanded.yb - d)
    right = FaceBox(expanded.xa + d, expanded.ya + d, expanded.xb, expanded.yb)
    middle = FaceBox(expanded.xa + d, expanded.ya + d, expanded.xb - d, expanded.yb - d)
    return BoxTriple(left, right, middle, d)


def _extract_one(frame: Frame, box: FaceBox, name: str) -> np.ndarray:
    xmin, ymin, xmax, ymax = box.bounds()
    xmin_c, xmax_c = max(xmin, 0), min(xmax, frame.width - 1)
    ymin_c, ymax_c = max(ymin, 0), min(ymax, frame.height - 1)
    if xmin_c > xmax_c or ymin_c > ymax_c:
        raise DegenerateCropError(name, f"box {box} lies outside the {frame.width}x{frame.height} frame")
    region = frame.pixels[ymin_c : ymax_c + 1, xmin_c : xmax_c + 1]
    if region.shape[0] == CROP_SIZE and region.shape[1] == CROP_SIZE:
        return region.copy()
    return cv2.resize(region, (CROP_SIZE, CROP_SIZE), interpolation=cv2.INTER_LINEAR)


def extract_and_squeeze(frame: Frame, triple: BoxTriple) -> CropSet:
    """Cut the three crop regions out of the frame and squeeze each to 224x224.

    Aspect ratio is deliberately not preserved.  Regions are clamped to the
    frame first; a region left empty raises naming the offending box.
    """
    names = ("left", "middle", "right")
    images = tuple(
        _extract_one(frame, box, name)
        for box, name in zip(triple.in_crop_order(), names)
    )
    return CropSet(regions=triple, images=images)  # type: ignore[arg-type]
