"""Manifest reading, image loading, and rotation augmentation.

Reads the pipeline's tab-separated manifests directly (path, subject_id,
label, source, split), squeezes images to the 224x224 network input, and
augments training batches with small random rotations whose angles stay
inside the configured bound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .config import INPUT_SIZE, LABELS


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    subject_id: str
    label: str
    source: str
    split: str | None


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (4, 5):
                raise ValueError(f"{path}:{lineno}: malformed manifest line")
            split = parts[4] if len(parts) == 5 and parts[4] not in ("", "-") else None
            if parts[2] not in LABELS:
                raise ValueError(f"{path}:{lineno}: label must be one of {LABELS}, got {parts[2]!r}")
            records.append(ManifestRecord(parts[0], parts[1], parts[2], parts[3], split))
    if not records:
        raise ValueError(f"manifest {path} holds no records")
    return records


def label_index(label: str) -> int:
    return LABELS.index(label)


def load_squeezed(path: str) -> np.ndarray:
    """Load an image as RGB uint8 squeezed (aspect ignored) to the input size."""
    img = cv2.imread(path, cv2.IMREAD_COLOR)
    if img is None:
        raise ValueError(f"unreadable image {path}")
    if img.shape[:2] != (INPUT_SIZE, INPUT_SIZE):
        img = cv2.resize(img, (INPUT_SIZE, INPUT_SIZE), interpolation=cv2.INTER_LINEAR)
    return img[:, :, ::-1].copy()


def rotate_image(img: np.ndarray, angle_degrees: float) -> np.ndarray:
    """Rotate around the image center, edges filled by reflection."""
    if angle_degrees == 0.0:
        return img
    h, w = img.shape[:2]
    matrix = cv2.getRotationMatrix2D((w / 2.0, h / 2.0), angle_degrees, 1.0)
    return cv2.warpAffine(img, matrix, (w, h), flags=cv2.INTER_LINEAR,
                          borderMode=cv2.BORDER_REFLECT_101)


def draw_rotation_angle(rng: random.Random, max_degrees: float) -> float:
    """Uniform angle in [-max_degrees, +max_degrees]."""
    return rng.uniform(-max_degrees, max_degrees)


class RotatingBatches:
    """Batch iterator with per-epoch random rotation; angles are recorded.

    Images arrive as uint8 RGB; normalization happens inside the model's
    preprocessing stage, not here.
    """

    def __init__(self, images: np.ndarray, labels: np.ndarray, batch_size: int,
                 max_degrees: float, seed: int, shuffle: bool = True):
        assert len(images) == len(labels)
        self.images = images
        self.labels = labels
        self.batch_size = batch_size
        self.max_degrees = max_degrees
        self.shuffle = shuffle
        self._rng = random.Random(seed)
        self.angles_drawn: list[float] = []

    def __len__(self):
        return (len(self.images) + self.batch_size - 1) // self.batch_size

    def epoch(self):
        """Yield (batch_images_float32, batch_labels) once over the data."""
        order = list(range(len(self.images)))
        if self.shuffle:
            self._rng.shuffle(order)
        for start in range(0, len(order), self.batch_size):
            idx = order[start : start + self.batch_size]
            batch = np.empty((len(idx), *self.images.shape[1:]), dtype=np.float32)
            for j, i in enumerate(idx):
                angle = draw_rotation_angle(self._rng, self.max_degrees)
                self.angles_drawn.append(angle)
                batch[j] = rotate_image(self.images[i], angle)
            yield batch, self.labels[idx]


def load_dataset(records: list[ManifestRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Load every record into memory as (images uint8, label indices)."""
    images = np.empty((len(records), INPUT_SIZE, INPUT_SIZE, 3), dtype=np.uint8)
    labels = np.empty(len(records), dtype=np.int32)
    for i, r in enumerate(records):
        images[i] = load_squeezed(r.path)
        labels[i] = label_index(r.label)
    return images, labels


def make_toy_dataset(out_dir: str | Path, count: int = 200, seed: int = 0,
                     image_size: int = INPUT_SIZE) -> str:
    """Write a trivially separable two-class image set plus its manifest.

    Man images are bright, Woman images dark, both with mild noise; the
    classes are linearly separable by intensity.  Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = ["# path\tsubject_id\tlabel\tsource\tsplit"]
    for i in range(count):
        label = LABELS[i % 2]
        base = 190 if label == "Man" else 60
        img = rng.integers(-40, 41, (image_size, image_size, 3)) + base
        img = np.clip(img, 0, 255).astype(np.uint8)
        path = out / f"{label.lower()}_{i:04d}.png"
        cv2.imwrite(str(path), img[:, :, ::-1])
        lines.append(f"{path}\tsubj{i}\t{label}\tOther\ttrain")
    manifest = out / "toy.manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(manifest)
