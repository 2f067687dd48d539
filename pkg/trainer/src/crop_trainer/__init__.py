"""Fine-tuning and export for the crop-ensemble gender classifier."""

from .config import IMAGENET_MEAN, INPUT_SIZE, LABELS, TrainConfig
from .data import make_toy_dataset, read_manifest
from .export import ExportError, export_model, predict_probabilities
from .models import build_model, conv_layers, freeze_leading_convs, frozen_weights
from .train import TrainResult, finetune, preprocess_input

__version__ = "0.1.0"

__all__ = [
    "IMAGENET_MEAN", "INPUT_SIZE", "LABELS", "TrainConfig", "TrainResult",
    "ExportError", "build_model", "conv_layers", "export_model", "finetune",
    "freeze_leading_convs", "frozen_weights", "make_toy_dataset",
    "predict_probabilities", "preprocess_input", "read_manifest",
]
