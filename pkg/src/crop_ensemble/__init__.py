"""Face-crop ensemble gender classification.

A detected face box is margin-expanded, split into three overlapping crops
via two-box corner arithmetic at a fixed reference resolution, each crop is
classified, and the per-crop scores are aggregated into one decision.
"""

from .boxcrop import (
    CROP_SIZE,
    DELTA_NOMINAL,
    REFERENCE_SIZE,
    BoxTriple,
    CropSet,
    FaceBox,
    Frame,
    expand_margin,
    extract_and_squeeze,
    make_box_triple,
    normalize_to_reference,
)
from .ensemble import Decision, VoteMode, aggregate, single_crop_decision
from .errors import (
    CropEnsembleError,
    DegenerateCropError,
    FrameSourceError,
    InvalidInputError,
    ManifestValidationError,
    ModelLoadError,
    SinkWriteError,
    SplitInfeasibleError,
)
from .infer import (
    GenderScore,
    MockSpec,
    ModelManifest,
    classify_crop,
    classify_cropset,
    load_backend,
)
from .pipeline import (
    BenchConfig,
    FrameResult,
    ThroughputReport,
    bench,
    process_frame,
    run_video,
)

__version__ = "0.1.0"

__all__ = [
    "BoxTriple", "CropSet", "FaceBox", "Frame", "Decision", "VoteMode",
    "GenderScore", "MockSpec", "ModelManifest", "BenchConfig", "FrameResult",
    "ThroughputReport", "CropEnsembleError", "DegenerateCropError",
    "FrameSourceError", "InvalidInputError", "ManifestValidationError",
    "ModelLoadError", "SinkWriteError", "SplitInfeasibleError",
    "CROP_SIZE", "DELTA_NOMINAL", "REFERENCE_SIZE",
    "expand_margin", "extract_and_squeeze", "make_box_triple",
    "normalize_to_reference", "aggregate", "single_crop_decision",
    "classify_crop", "classify_cropset", "load_backend",
    "bench", "process_frame", "run_video",
]
