"""Training configuration with the published fine-tuning protocol as defaults.

Every field defaults to the protocol value; any override is reported by
``deviations()`` and recorded in the exported model manifest.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

LABELS = ("Man", "Woman")

# ImageNet channel means (RGB); inputs are mean-subtracted, unscaled
IMAGENET_MEAN = (123.68, 116.779, 103.939)
INPUT_SIZE = 224


@dataclass(frozen=True)
class TrainConfig:
    base: str = "vgg16"                 # vgg16 | compact_cnn
    pretrained: bool = True             # ImageNet weights for the base
    frozen_layers: int = 10             # leading conv layers kept fixed
    classes: int = 2
    dropout: float = 0.5
    batch_size: int = 8
    optimizer: str = "adam"
    phase1_epochs: int = 180
    phase1_lr: float = 0.001
    phase2_epochs: int = 20
    phase2_lr: float = 0.0001
    rotation_degrees: float = 5.0       # augmentation: uniform in +/- this
    loss: str = "cross_entropy"
    seed: int = 0

    def __post_init__(self):
        if self.base not in ("vgg16", "compact_cnn"):
            raise ValueError(f"base must be vgg16 or compact_cnn, got {self.base!r}")
        if self.classes != 2:
            raise ValueError("this trainer targets the two-class gender head")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.loss != "cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if self.frozen_layers < 0 or self.batch_size < 1:
            raise ValueError("frozen_layers must be >= 0 and batch_size >= 1")
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ValueError("epoch counts must be >= 0")

    @property
    def total_epochs(self) -> int:
        return self.phase1_epochs + self.phase2_epochs

    def deviations(self) -> list[str]:
        """Fields that differ from the protocol defaults."""
        defaults = TrainConfig()
        out = []
        for f in dataclasses.fields(self):
            if f.name == "seed":
                continue  # the seed is run identity, not protocol
            current = getattr(self, f.name)
            default = getattr(defaults, f.name)
            if current != default:
                out.append(f"{f.name}={current} (default {default})")
        return out

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
