"""Export a trained model as a TFLite graph plus its model manifest."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .config import IMAGENET_MEAN, INPUT_SIZE, LABELS, TrainConfig
from .train import preprocess_input

log = logging.getLogger(__name__)


class ExportError(RuntimeError):
    """TFLite conversion failed; the message names the offending operator."""


def export_model(model, config: TrainConfig, out_dir: str | Path,
                 name: str = "model") -> tuple[str, str]:
    """Serialize the operator graph and write the manifest beside it.

    Returns (model_path, manifest_path).  The manifest records the exact
    normalization used in training and any deviation from the protocol
    defaults, so the serving side cannot silently drift.
    """
    import tensorflow as tf

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        blob = tf.lite.TFLiteConverter.from_keras_model(model).convert()
    except Exception as e:  # converter raises several internal types
        raise ExportError(f"tflite conversion failed: {e}") from e

    model_path = out / f"{name}.tflite"
    model_path.write_bytes(blob)

    manifest = {
        "backend_kind": "neural",
        "model_path": f"{name}.tflite",
        "input_size": INPUT_SIZE,
        "channel_order": "RGB",
        "normalization": {"mean": list(IMAGENET_MEAN), "scale": [1.0, 1.0, 1.0]},
        "class_order": list(LABELS),
        "output_kind": "logits",
        "extras": {
            "trainer": {
                "config": config.to_dict(),
                "deviations": config.deviations(),
            }
        },
    }
    manifest_path = out / f"{name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    log.info("exported %s (%.1f MB) and %s",
             model_path, len(blob) / 1e6, manifest_path)
    return str(model_path), str(manifest_path)


def predict_probabilities(model, crops: np.ndarray) -> np.ndarray:
    """Trainer-side class probabilities for uint8 RGB crops, shape (n, 2).

    This is the parity oracle for the serving side: same preprocessing,
    same graph, softmax over the logits.
    """
    if crops.ndim == 3:
        crops = crops[np.newaxis]
    x = preprocess_input(crops.astype(np.float32))
    logits = np.asarray(model(x), dtype=np.float64)
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    return exp / exp.sum(axis=1, keepdims=True)
