"""Pluggable per-crop gender classifier backends.

A backend is described by a :class:`ModelManifest` and produced by
:func:`load_backend`.  The neural backend executes a TFLite operator graph;
the mock backend is deterministic and needs no model file, which is what the
test suite and the throughput bench run on.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .boxcrop import CROP_SIZE, CropSet
from .errors import InvalidInputError, ManifestValidationError, ModelLoadError

log = logging.getLogger(__name__)

MAN = "Man"
WOMAN = "Woman"
CANONICAL_CLASSES = (MAN, WOMAN)

SCORE_SUM_TOL = 1e-6


@dataclass(frozen=True)
class GenderScore:
    """Per-class probabilities over (Man, Woman)."""

    p_man: float
    p_woman: float

    def __post_init__(self):
        for name, p in (("p_man", self.p_man), ("p_woman", self.p_woman)):
            if not (0.0 <= p <= 1.0):
                raise InvalidInputError(f"{name}={p} outside [0, 1]")
        if abs(self.p_man + self.p_woman - 1.0) > SCORE_SUM_TOL:
            raise InvalidInputError(
                f"probabilities must sum to 1, got {self.p_man + self.p_woman}"
            )

    @property
    def label(self) -> str:
        # exact tie resolves to the first canonical class
        return MAN if self.p_man >= self.p_woman else WOMAN

    @property
    def is_tie(self) -> bool:
        return self.p_man == self.p_woman

    def as_tuple(self) -> tuple[float, float]:
        return (self.p_man, self.p_woman)


@dataclass(frozen=True)
class MockSpec:
    """Configuration of the deterministic mock backend.

    ``mean_intensity_threshold`` scores p_man = mean pixel intensity / 255;
    the threshold records the nominal Man/Woman boundary and is validated but
    does not reshape the score.  ``fixed_table`` maps crop digests to scores
    and refuses unknown digests.
    """

    rule: str = "mean_intensity_threshold"
    threshold: float = 128.0
    table: dict[str, tuple[float, float]] | None = None

    def validation_errors(self) -> list[str]:
        errs = []
        if self.rule not in ("mean_intensity_threshold", "fixed_table"):
            errs.append(f"mock rule must be mean_intensity_threshold or fixed_table, got {self.rule!r}")
        if not (0.0 <= self.threshold <= 255.0):
            errs.append(f"mock threshold must be in [0, 255], got {self.threshold}")
        if self.rule == "fixed_table" and not self.table:
            errs.append("fixed_table rule requires a digest table")
        return errs


@dataclass(frozen=True)
class ModelManifest:
    """Binds a serialized network to its input and class-order contract.

    ``normalization`` is applied as (raw_pixel - mean) * scale per channel in
    the declared channel order; the input layout is NHWC float32.
    ``output_kind`` says whether the graph emits probabilities or logits
    (logits get a softmax inside the backend).
    """

    backend_kind: str = "mock"
    model_path: str | None = None
    input_size: int = CROP_SIZE
    channel_order: str = "RGB"
    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    class_order: tuple[str, str] = CANONICAL_CLASSES
    output_kind: str = "probabilities"
    mock: MockSpec = field(default_factory=MockSpec)
    extras: dict = field(default_factory=dict)

    def validation_errors(self) -> list[str]:
        errs = []
        if self.backend_kind not in ("neural", "mock"):
            errs.append(f"backend_kind must be neural or mock, got {self.backend_kind!r}")
        if self.input_size != CROP_SIZE:
            errs.append(f"input_size must be {CROP_SIZE}, got {self.input_size}")
        if self.channel_order not in ("RGB", "BGR"):
            errs.append(f"channel_order must be RGB or BGR, got {self.channel_order!r}")
        if sorted(self.class_order) != sorted(CANONICAL_CLASSES):
            errs.append(f"class_order must be a permutation of {list(CANONICAL_CLASSES)}, got {list(self.class_order)}")
        if len(self.mean) != 3:
            errs.append(f"normalization mean must have 3 entries, got {len(self.mean)}")
        if len(self.scale) != 3:
            errs.append(f"normalization scale must have 3 entries, got {len(self.scale)}")
        if self.output_kind not in ("probabilities", "logits"):
            errs.append(f"output_kind must be probabilities or logits, got {self.output_kind!r}")
        if self.backend_kind == "neural" and not self.model_path:
            errs.append("neural backend requires model_path")
        if self.backend_kind == "mock":
            errs.extend(self.mock.validation_errors())
        return errs

    def validate(self) -> None:
        errs = self.validation_errors()
        if errs:
            raise ManifestValidationError(errs)

    def to_dict(self) -> dict:
        d = {
            "backend_kind": self.backend_kind,
            "model_path": self.model_path,
            "input_size": self.input_size,
            "channel_order": self.channel_order,
            "normalization": {"mean": list(self.mean), "scale": list(self.scale)},
            "class_order": list(self.class_order),
            "output_kind": self.output_kind,
        }
        if self.backend_kind == "mock":
            d["mock"] = {
                "rule": self.mock.rule,
                "threshold": self.mock.threshold,
                "table": self.mock.table,
            }
        if self.extras:
            d["extras"] = self.extras
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelManifest":
        norm = d.get("normalization", {})
        if "mean" not in norm or "scale" not in norm:
            raise ManifestValidationError(
                ["normalization must declare both mean and scale"]
            )
        mock_d = d.get("mock") or {}
        table = mock_d.get("table")
        if table is not None:
            table = {k: (float(v[0]), float(v[1])) for k, v in table.items()}
        known = {
            "backend_kind", "model_path", "input_size", "channel_order",
            "normalization", "class_order", "output_kind", "mock", "extras",
        }
        extras = dict(d.get("extras", {}))
        extras.update({k: v for k, v in d.items() if k not in known})
        return cls(
            backend_kind=d.get("backend_kind", "mock"),
            model_path=d.get("model_path"),
            input_size=int(d.get("input_size", CROP_SIZE)),
            channel_order=d.get("channel_order", "RGB"),
            mean=tuple(float(x) for x in norm["mean"]),
            scale=tuple(float(x) for x in norm["scale"]),
            class_order=tuple(d.get("class_order", CANONICAL_CLASSES)),
            output_kind=d.get("output_kind", "probabilities"),
            mock=MockSpec(
                rule=mock_d.get("rule", "mean_intensity_threshold"),
                threshold=float(mock_d.get("threshold", 128.0)),
                table=table,
            ),
            extras=extras,
        )

    @classmethod
    def from_json_file(cls, path: str) -> "ModelManifest":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        manifest = cls.from_dict(d)
        # model paths are resolved relative to the manifest file
        if manifest.model_path and not os.path.isabs(manifest.model_path):
            resolved = os.path.join(os.path.dirname(os.path.abspath(path)), manifest.model_path)
            manifest = ModelManifest(**{**manifest.__dict__, "model_path": resolved})
        return manifest


class ClassifierHandle(Protocol):
    """What the pipeline needs from a classifier backend."""

    concurrency: str  # "concurrent" | "serial"

    def classify(self, crop: np.ndarray) -> GenderScore: ...


def crop_digest(crop: np.ndarray) -> str:
    """Stable content digest of a crop, used by the fixed-table mock."""
    return hashlib.sha256(np.ascontiguousarray(crop).tobytes()).hexdigest()


def _check_crop(crop: np.ndarray) -> np.ndarray:
    if not isinstance(crop, np.ndarray) or crop.shape != (CROP_SIZE, CROP_SIZE, 3):
        got = getattr(crop, "shape", type(crop))
        raise InvalidInputError(f"crop must be {CROP_SIZE}x{CROP_SIZE}x3, got {got}")
    if crop.dtype != np.uint8:
        raise InvalidInputError(f"crop must be uint8, got {crop.dtype}")
    return crop


def _vector_to_score(raw: np.ndarray, class_order: tuple[str, str]) -> GenderScore:
    by_label = {label: float(raw[i]) for i, label in enumerate(class_order)}
    return GenderScore(p_man=by_label[MAN], p_woman=by_label[WOMAN])


class MockClassifier:
    """Deterministic classifier used for tests and benchmarking."""

    concurrency = "concurrent"

    def __init__(self, manifest: ModelManifest):
        self.manifest = manifest
        self.spec = manifest.mock

    def _raw(self, crop: np.ndarray) -> np.ndarray:
        if self.spec.rule == "mean_intensity_threshold":
            p_man = float(np.mean(crop)) / 255.0
            by_label = {MAN: p_man, WOMAN: 1.0 - p_man}
        else:
            digest = crop_digest(crop)
            if self.spec.table is None or digest not in self.spec.table:
                raise InvalidInputError(f"no mock table entry for crop digest {digest[:12]}...")
            p_man, p_woman = self.spec.table[digest]
            by_label = {MAN: p_man, WOMAN: p_woman}
        return np.array([by_label[c] for c in self.manifest.class_order])

    def classify(self, crop: np.ndarray) -> GenderScore:
        raw = self._raw(_check_crop(crop))
        return _vector_to_score(raw, self.manifest.class_order)


class TFLiteClassifier:
    """Executes a TFLite operator graph; one interpreter, serial access only."""

    concurrency = "serial"

    def __init__(self, manifest: ModelManifest):
        self.manifest = manifest
        path = manifest.model_path
        assert path is not None
        if not os.path.exists(path):
            raise ModelLoadError(f"model file not found: {path}")
        try:
            import tensorflow as tf  # heavy; imported only for neural backends
        except ImportError as e:
            raise ModelLoadError(
                "neural backend needs the tflite runtime (install the 'tflite' extra)"
            ) from e
        try:
            self._interp = tf.lite.Interpreter(model_path=path)
            self._interp.allocate_tensors()
        except (ValueError, RuntimeError) as e:
            raise ModelLoadError(f"cannot load model graph from {path}: {e}") from e
        self._input = self._interp.get_input_details()[0]
        self._output = self._interp.get_output_details()[0]
        in_shape = tuple(self._input["shape"])
        if in_shape[1:] != (CROP_SIZE, CROP_SIZE, 3):
            raise ModelLoadError(
                f"model expects input {in_shape}, pipeline supplies 1x{CROP_SIZE}x{CROP_SIZE}x3"
            )
        self._mean = np.asarray(manifest.mean, dtype=np.float32)
        self._scale = np.asarray(manifest.scale, dtype=np.float32)

    def classify(self, crop: np.ndarray) -> GenderScore:
        crop = _check_crop(crop)
        x = crop.astype(np.float32)
        if self.manifest.channel_order == "BGR":
            x = x[:, :, ::-1]
        x = (x - self._mean) * self._scale
        self._interp.set_tensor(self._input["index"], x[np.newaxis])
        self._interp.invoke()
        raw = np.asarray(self._interp.get_tensor(self._output["index"])[0], dtype=np.float64)
        if self.manifest.output_kind == "logits":
            raw = raw - raw.max()
            raw = np.exp(raw)
            raw = raw / raw.sum()
        else:
            total = raw.sum()
            if total > 0 and abs(total - 1.0) > SCORE_SUM_TOL:
                raw = raw / total
        return _vector_to_score(raw, self.manifest.class_order)


def load_backend(manifest: ModelManifest) -> ClassifierHandle:
    """Build the classifier a manifest describes, validating it first."""
    manifest.validate()
    if manifest.backend_kind == "mock":
        return MockClassifier(manifest)
    return TFLiteClassifier(manifest)


def classify_crop(handle: ClassifierHandle, crop: np.ndarray) -> GenderScore:
    """Score one 224x224 crop."""
    return handle.classify(crop)


def classify_cropset(handle: ClassifierHandle, crops: CropSet) -> tuple[GenderScore, GenderScore, GenderScore]:
    """Score all three crops, in (Left, Middle, Right) order."""
    left, middle, right = crops.images
    return (handle.classify(left), handle.classify(middle), handle.classify(right))
