"""Aggregate three per-crop scores into one gender decision.

Two modes: soft mean (average the probability vectors, then argmax) and hard
majority (each crop votes its argmax, two votes win).  With one-hot inputs
the two coincide.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidInputError
from .infer import MAN, WOMAN, GenderScore


class VoteMode(enum.Enum):
    SOFT_MEAN = "soft"
    HARD_MAJORITY = "hard"

    @classmethod
    def parse(cls, text: str) -> "VoteMode":
        for mode in cls:
            if mode.value == text:
                return mode
        raise InvalidInputError(f"unknown vote mode {text!r} (expected soft or hard)")


@dataclass(frozen=True)
class Decision:
    """A final label plus the evidence that produced it."""

    label: str
    aggregate: GenderScore
    per_crop: tuple[GenderScore, ...]
    mode: VoteMode
    tie: bool = False

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "aggregate": {"p_man": self.aggregate.p_man, "p_woman": self.aggregate.p_woman},
            "per_crop": [{"p_man": s.p_man, "p_woman": s.p_woman} for s in self.per_crop],
            "mode": self.mode.value,
            "tie": self.tie,
        }


def aggregate(scores: Sequence[GenderScore], mode: VoteMode) -> Decision:
    """Combine exactly three crop scores; input order never changes the result."""
    if len(scores) != 3:
        raise InvalidInputError(f"aggregation needs exactly 3 scores, got {len(scores)}")

    if mode is VoteMode.SOFT_MEAN:
        # fsum is exactly rounded, so input order cannot leak into the result
        p_man = math.fsum(s.p_man for s in scores) / 3.0
        p_woman = math.fsum(s.p_woman for s in scores) / 3.0
        # guard the sum-to-one invariant against float drift
        total = p_man + p_woman
        agg = GenderScore(p_man / total, p_woman / total)
        return Decision(
            label=agg.label,
            aggregate=agg,
            per_crop=tuple(scores),
            mode=mode,
            tie=agg.is_tie,
        )

    man_votes = sum(1 for s in scores if s.label == MAN)
    label = MAN if man_votes >= 2 else WOMAN
    agg = GenderScore(man_votes / 3.0, (3 - man_votes) / 3.0)
    return Decision(label=label, aggregate=agg, per_crop=tuple(scores), mode=mode)


def single_crop_decision(score: GenderScore) -> Decision:
    """Baseline decision from one crop, for with/without-ensemble comparisons."""
    return Decision(
        label=score.label,
        aggregate=score,
        per_crop=(score,),
        mode=VoteMode.SOFT_MEAN,
        tie=score.is_tie,
    )
