"""Pairwise review decisions and their signed weight contributions.

Algorithmic decisions carry a probability-of-same confidence and contribute
round(100 * (2p - 1)); human decisions contribute a fixed +/-H. Incomparable
always contributes zero but still counts toward per-pair review caps.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

Pair = tuple[str, str]


class Decision(str, Enum):
    SAME = "same"
    DIFFERENT = "different"
    INCOMPARABLE = "incomparable"


class ReviewSource(str, Enum):
    ALGORITHMIC = "algorithmic"
    HUMAN = "human"
    SIMULATED_HUMAN = "simulated_human"


HUMAN_SOURCES = (ReviewSource.HUMAN, ReviewSource.SIMULATED_HUMAN)


def norm_pair(a: str, b: str) -> Pair:
    if a == b:
        raise ValueError(f"pair endpoints must differ, got {a!r} twice")
    return (a, b) if a < b else (b, a)


def algorithmic_contribution(confidence: float) -> int:
    """Signed integer contribution of a probability-of-same confidence."""
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {confidence}")
    return round(100 * (2 * confidence - 1))


@dataclass(frozen=True)
class ReviewDecision:
    a: str
    b: str
    decision: Decision
    source: ReviewSource
    confidence: float | None
    contribution: int

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)

    def to_record(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "decision": self.decision.value,
            "source": self.source.value,
            "confidence": self.confidence,
            "contribution": self.contribution,
        }

    @classmethod
    def from_record(cls, rec: dict) -> ReviewDecision:
        return cls(
            a=rec["a"],
            b=rec["b"],
            decision=Decision(rec["decision"]),
            source=ReviewSource(rec["source"]),
            confidence=rec.get("confidence"),
            contribution=rec["contribution"],
        )


def algorithmic_review(a: str, b: str, decision: Decision, confidence: float) -> ReviewDecision:
    a, b = norm_pair(a, b)
    contribution = 0 if decision is Decision.INCOMPARABLE else algorithmic_contribution(confidence)
    return ReviewDecision(
        a=a, b=b, decision=decision, source=ReviewSource.ALGORITHMIC, confidence=confidence, contribution=contribution
    )


def human_review(a: str, b: str, decision: Decision, weight: int, source: ReviewSource = ReviewSource.HUMAN) -> ReviewDecision:
    if source not in HUMAN_SOURCES:
        raise ValueError(f"human review source must be human-like, got {source}")
    a, b = norm_pair(a, b)
    if decision is Decision.SAME:
        contribution = weight
    elif decision is Decision.DIFFERENT:
        contribution = -weight
    else:
        contribution = 0
    return ReviewDecision(a=a, b=b, decision=decision, source=source, confidence=None, contribution=contribution)
