"""Model construction and layer freezing."""

from __future__ import annotations

import logging

import numpy as np

from .config import INPUT_SIZE, TrainConfig

log = logging.getLogger(__name__)


def _keras():
    import keras

    return keras


def build_model(config: TrainConfig):
    """Build the classifier emitting two-class logits."""
    keras = _keras()
    if config.base == "vgg16":
        weights = "imagenet" if config.pretrained else None
        try:
            base = keras.applications.VGG16(
                include_top=False, weights=weights,
                input_shape=(INPUT_SIZE, INPUT_SIZE, 3))
        except Exception as e:
            if config.pretrained:
                raise RuntimeError(
                    "could not fetch ImageNet weights (offline?); "
                    "pass pretrained=False to train from random init"
                ) from e
            raise
        x = keras.layers.Flatten(name="flatten")(base.output)
        x = keras.layers.Dense(4096, activation="relu", name="fc1")(x)
        x = keras.layers.Dropout(config.dropout, name="drop1")(x)
        x = keras.layers.Dense(4096, activation="relu", name="fc2")(x)
        x = keras.layers.Dropout(config.dropout, name="drop2")(x)
        out = keras.layers.Dense(config.classes, name="logits")(x)
        return keras.Model(base.input, out, name="vgg16_gender")

    inputs = keras.layers.Input((INPUT_SIZE, INPUT_SIZE, 3))
    x = keras.layers.Conv2D(8, 3, strides=2, padding="same", activation="relu")(inputs)
    x = keras.layers.MaxPooling2D(2)(x)
    x = keras.layers.Conv2D(16, 3, strides=2, padding="same", activation="relu")(x)
    x = keras.layers.MaxPooling2D(2)(x)
    x = keras.layers.Conv2D(32, 3, padding="same", activation="relu")(x)
    x = keras.layers.MaxPooling2D(2)(x)
    x = keras.layers.Flatten()(x)
    x = keras.layers.Dropout(config.dropout)(x)
    x = keras.layers.Dense(64, activation="relu")(x)
    out = keras.layers.Dense(config.classes, name="logits")(x)
    return keras.Model(inputs, out, name="compact_gender")


def conv_layers(model) -> list:
    """Weight-bearing convolutional layers in forward order."""
    keras = _keras()
    return [l for l in model.layers if isinstance(l, keras.layers.Conv2D)]


def freeze_leading_convs(model, count: int) -> int:
    """Freeze the first ``count`` conv layers; returns how many were frozen."""
    convs = conv_layers(model)
    frozen = convs[:count]
    for layer in frozen:
        layer.trainable = False
    if count > len(convs):
        log.info("asked to freeze %d conv layers, model only has %d", count, len(convs))
    return len(frozen)


def frozen_weights(model) -> list[np.ndarray]:
    """Copies of every non-trainable layer's weights, in layer order."""
    out = []
    for layer in model.layers:
        if layer.weights and not layer.trainable:
            out.extend(np.array(w) for w in layer.get_weights())
    return out
