"""Exception types shared across the package."""

from __future__ import annotations


class CropEnsembleError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(CropEnsembleError, ValueError):
    """An operation received input violating its preconditions."""


class DegenerateCropError(InvalidInputError):
    """A crop region is empty after clamping to the frame."""

    def __init__(self, box_name: str, detail: str = ""):
        self.box_name = box_name
        msg = f"degenerate {box_name} crop"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ManifestValidationError(CropEnsembleError, ValueError):
    """A model manifest violates its schema; ``fields`` lists the offenders."""

    def __init__(self, fields: list[str]):
        self.fields = list(fields)
        super().__init__("invalid model manifest: " + "; ".join(self.fields))


class ModelLoadError(CropEnsembleError):
    """A model file is missing or cannot be deserialized."""


class SplitInfeasibleError(CropEnsembleError, ValueError):
    """Requested split fractions cannot be honored; names the blocking subject."""

    def __init__(self, subject_id: str, detail: str):
        self.subject_id = subject_id
        super().__init__(f"split infeasible for subject {subject_id!r}: {detail}")


class FrameSourceError(CropEnsembleError):
    """A frame source is unreadable or yields no frames."""


class SinkWriteError(CropEnsembleError):
    """An annotation sink failed to persist output."""
