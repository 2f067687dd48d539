"""The fine-tuning loop: two learning-rate phases over frozen-base training."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import IMAGENET_MEAN, TrainConfig
from .data import ManifestRecord, RotatingBatches, load_dataset
from .models import build_model, freeze_leading_convs, frozen_weights

log = logging.getLogger(__name__)


def preprocess_input(batch: np.ndarray) -> np.ndarray:
    """Mean-subtract a float32 RGB batch, matching the exported manifest."""
    return batch - np.asarray(IMAGENET_MEAN, dtype=np.float32)


def _digest(arrays: list[np.ndarray]) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


@dataclass
class TrainResult:
    model: object
    config: TrainConfig
    history: dict[str, list[float]] = field(default_factory=dict)
    log_path: str | None = None
    frozen_conv_count: int = 0
    frozen_digest_before: str = ""
    frozen_digest_after: str = ""

    @property
    def freezing_intact(self) -> bool:
        return self.frozen_digest_before == self.frozen_digest_after


def finetune(
    config: TrainConfig,
    train_records: list[ManifestRecord],
    val_records: list[ManifestRecord] | None = None,
    out_dir: str | Path = "train_out",
    model=None,
) -> TrainResult:
    """Fine-tune on manifest images and log per-epoch metrics.

    ``model`` may be a prebuilt (already frozen) network; by default one is
    built and frozen per the config.  Checkpoints land in ``out_dir``.
    """
    import keras

    keras.utils.set_random_seed(config.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if not train_records:
        raise ValueError("empty training manifest")
    images, labels = load_dataset(train_records)
    batches = RotatingBatches(
        images, labels, config.batch_size, config.rotation_degrees, seed=config.seed + 1)
    val_data = None
    if val_records:
        val_images, val_labels = load_dataset(val_records)
        val_data = (preprocess_input(val_images.astype(np.float32)), val_labels)

    if model is None:
        model = build_model(config)
        frozen_count = freeze_leading_convs(model, config.frozen_layers)
    else:
        frozen_count = sum(1 for l in model.layers if l.weights and not l.trainable)
    digest_before = _digest(frozen_weights(model))

    optimizer = keras.optimizers.Adam(config.phase1_lr)
    model.compile(
        optimizer=optimizer,
        loss=keras.losses.SparseCategoricalCrossentropy(from_logits=True),
        metrics=["accuracy"],
    )

    history: dict[str, list[float]] = {
        "loss": [], "accuracy": [], "val_loss": [], "val_accuracy": [], "lr": []}
    log_path = out / "training.log"
    best_metric = float("inf")
    with open(log_path, "w", encoding="utf-8") as log_file:
        log_file.write("# epoch phase lr loss accuracy val_loss val_accuracy\n")
        for epoch in range(config.total_epochs):
            phase = 1 if epoch < config.phase1_epochs else 2
            if epoch == config.phase1_epochs:
                # second phase drops the learning rate, everything else stays
                optimizer.learning_rate.assign(config.phase2_lr)
            lr = float(optimizer.learning_rate.value)

            losses, hits, seen = [], 0, 0
            for batch_x, batch_y in batches.epoch():
                metrics = model.train_on_batch(
                    preprocess_input(batch_x), batch_y, return_dict=True)
                losses.append(float(metrics["loss"]))
                hits += float(metrics["accuracy"]) * len(batch_y)
                seen += len(batch_y)
            epoch_loss = float(np.mean(losses))
            epoch_acc = hits / seen

            val_loss = val_acc = float("nan")
            if val_data is not None:
                val_metrics = model.evaluate(
                    val_data[0], val_data[1], batch_size=config.batch_size,
                    verbose=0, return_dict=True)
                val_loss, val_acc = float(val_metrics["loss"]), float(val_metrics["accuracy"])

            history["loss"].append(epoch_loss)
            history["accuracy"].append(epoch_acc)
            history["val_loss"].append(val_loss)
            history["val_accuracy"].append(val_acc)
            history["lr"].append(lr)
            log_file.write(
                f"{epoch} {phase} {lr:.6g} {epoch_loss:.6f} {epoch_acc:.6f} "
                f"{val_loss:.6f} {val_acc:.6f}\n")
            log_file.flush()
            log.info("epoch %d/%d phase %d loss %.4f acc %.4f",
                     epoch + 1, config.total_epochs, phase, epoch_loss, epoch_acc)

            model.save_weights(out / "last.weights.h5")
            monitored = val_loss if val_data is not None else epoch_loss
            if monitored < best_metric:
                best_metric = monitored
                model.save_weights(out / "best.weights.h5")

    return TrainResult(
        model=model,
        config=config,
        history=history,
        log_path=str(log_path),
        frozen_conv_count=frozen_count,
        frozen_digest_before=digest_before,
        frozen_digest_after=_digest(frozen_weights(model)),
    )
