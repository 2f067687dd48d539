"""Dataset manifests, subject-disjoint splitting, and accuracy evaluation.

A manifest is tab-separated text, one record per line:
``path<TAB>subject_id<TAB>label<TAB>source<TAB>split`` with ``-`` for an
unassigned split.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import cv2

from .boxcrop import REFERENCE_SIZE
from .errors import InvalidInputError, SplitInfeasibleError
from .infer import CANONICAL_CLASSES

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
SOURCES = ("Adience", "LFW", "Other")
_UNSET = "-"


@dataclass(frozen=True)
class ImageRecord:
    path: str
    subject_id: str
    label: str
    source: str = "Other"
    split: str | None = None

    def __post_init__(self):
        if not self.path:
            raise InvalidInputError("record path must be non-empty")
        if self.label not in CANONICAL_CLASSES:
            raise InvalidInputError(f"label must be one of {CANONICAL_CLASSES}, got {self.label!r}")
        if self.source not in SOURCES:
            raise InvalidInputError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.split is not None and self.split not in SPLITS:
            raise InvalidInputError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.50, 0.15, 0.35)
    subject_disjoint: bool = True
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise InvalidInputError(f"split fractions must sum to 1, got {self.fractions}")
        if any(f < 0 for f in self.fractions):
            raise InvalidInputError("split fractions must be non-negative")
        if not self.subject_disjoint:
            raise InvalidInputError("subject_disjoint must be true")


@dataclass(frozen=True)
class SourceAccuracy:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total


@dataclass(frozen=True)
class EvalReport:
    correct: int
    total: int
    per_source: dict[str, SourceAccuracy]

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "total": self.total,
            "accuracy": self.accuracy,
            "per_source": {
                src: {"correct": s.correct, "total": s.total, "accuracy": s.accuracy}
                for src, s in self.per_source.items()
            },
        }

    def format_text(self) -> str:
        lines = [f"overall: {self.correct}/{self.total} = {self.accuracy:.1f}%"]
        for src, s in sorted(self.per_source.items()):
            lines.append(f"{src}: {s.correct}/{s.total} = {s.accuracy:.1f}%")
        return "\n".join(lines)


def read_manifest(path: str | Path) -> list[ImageRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (4, 5):
                raise InvalidInputError(f"{path}:{lineno}: expected 4 or 5 tab-separated fields, got {len(parts)}")
            split = None
            if len(parts) == 5 and parts[4] not in ("", _UNSET):
                split = parts[4]
            records.append(ImageRecord(parts[0], parts[1], parts[2], parts[3], split))
    return records


def write_manifest(records: Iterable[ImageRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# path\tsubject_id\tlabel\tsource\tsplit\n")
        for r in records:
            fh.write(f"{r.path}\t{r.subject_id}\t{r.label}\t{r.source}\t{r.split or _UNSET}\n")


def append_manifest_note(path: str | Path, note: str) -> None:
    """Append a provenance comment line to a manifest."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"# {note}\n")


def _assign_source(records: list[ImageRecord], spec: SplitSpec, rng: random.Random) -> dict[str, str]:
    """Greedily place whole subjects into the most-underfilled split."""
    by_subject: dict[str, int] = defaultdict(int)
    for r in records:
        by_subject[r.subject_id] += 1
    total = len(records)

    limit = max(spec.fractions)
    for subject, count in by_subject.items():
        if count > limit * total:
            raise SplitInfeasibleError(
                subject,
                f"owns {count} of {total} images, more than the largest split fraction {limit:.0%}",
            )

    subjects = sorted(by_subject)
    rng.shuffle(subjects)
    # descending image count; the seeded shuffle breaks ties
    subjects.sort(key=lambda s: -by_subject[s])

    targets = [f * total for f in spec.fractions]
    filled = [0, 0, 0]
    assignment: dict[str, str] = {}
    for subject in subjects:
        deficits = [t - f for t, f in zip(targets, filled)]
        idx = max(range(3), key=lambda i: (deficits[i], -i))  # ties prefer train, then val
        assignment[subject] = SPLITS[idx]
        filled[idx] += by_subject[subject]
    return assignment


def split(records: Sequence[ImageRecord], spec: SplitSpec) -> list[ImageRecord]:
    """Assign train/val/test so no subject straddles two splits.

    Splitting is stratified per source, deterministic for a fixed seed, and
    hits the target fractions exactly whenever subject granularity permits.
    """
    if not records:
        raise InvalidInputError("cannot split an empty record list")
    rng = random.Random(spec.seed)
    assignment: dict[tuple[str, str], str] = {}
    by_source: dict[str, list[ImageRecord]] = defaultdict(list)
    for r in records:
        by_source[r.source].append(r)
    for source in sorted(by_source):
        source_assign = _assign_source(by_source[source], spec, rng)
        for subject, split_name in source_assign.items():
            assignment[(source, subject)] = split_name
    return [
        dataclasses.replace(r, split=assignment[(r.source, r.subject_id)])
        for r in records
    ]


def evaluate(predictions: Sequence[tuple[ImageRecord, object]]) -> EvalReport:
    """Score predicted labels against manifest ground truth.

    Each prediction is an (ImageRecord, Decision) pair; anything with a
    ``label`` attribute, or a bare label string, works.
    """
    if not predictions:
        raise InvalidInputError("cannot evaluate an empty prediction list")
    correct_total = 0
    per_source_counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for record, predicted in predictions:
        label = getattr(predicted, "label", predicted)
        hit = int(label == record.label)
        correct_total += hit
        per_source_counts[record.source][0] += hit
        per_source_counts[record.source][1] += 1
    return EvalReport(
        correct=correct_total,
        total=len(predictions),
        per_source={src: SourceAccuracy(c, t) for src, (c, t) in per_source_counts.items()},
    )


@dataclass
class PrepareReport:
    resampled: list[str]
    already_normalized: list[str]
    failures: list[tuple[str, str]]

    def to_dict(self) -> dict:
        return {
            "resampled": self.resampled,
            "already_normalized": self.already_normalized,
            "failures": [{"path": p, "error": e} for p, e in self.failures],
        }


def prepare_lfw(
    records: Sequence[ImageRecord],
    reference: int = REFERENCE_SIZE,
    manifest_path: str | Path | None = None,
) -> PrepareReport:
    """Rescale every LFW image to the reference resolution, in place.

    Idempotent: images already at the reference size are flagged and left
    untouched.  Unreadable files are collected, never fatal.
    """
    report = PrepareReport([], [], [])
    for r in records:
        if r.source != "LFW":
            continue
        img = cv2.imread(r.path, cv2.IMREAD_COLOR)
        if img is None:
            report.failures.append((r.path, "unreadable image"))
            continue
        if img.shape[0] == reference and img.shape[1] == reference:
            report.already_normalized.append(r.path)
            continue
        resized = cv2.resize(img, (reference, reference), interpolation=cv2.INTER_LINEAR)
        if not cv2.imwrite(r.path, resized):
            report.failures.append((r.path, "write failed"))
            continue
        report.resampled.append(r.path)
    if manifest_path is not None:
        append_manifest_note(
            manifest_path,
            f"lfw-prepared: {len(report.resampled)} resampled to {reference}x{reference}, "
            f"{len(report.already_normalized)} already normalized, {len(report.failures)} failed",
        )
    log.info(
        "lfw preparation: %d resampled, %d already normalized, %d failures",
        len(report.resampled), len(report.already_normalized), len(report.failures),
    )
    return report


def eval_report_to_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2)
