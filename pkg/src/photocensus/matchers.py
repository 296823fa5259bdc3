"""Pluggable ranking and verification oracles, with simulation-backed
implementations standing in for the real ranking and pairwise-verification
models. Real-model adapters can be added behind the same interfaces.

All oracle randomness is hash-keyed on (seed, arguments), never drawn from a
sequential stream, so results are order-independent and resume-safe.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lca.reviews import Decision, ReviewSource, norm_pair

FEATURE_DIM = 64


def derived_seed(*key) -> int:
    blob = "\x1f".join(str(part) for part in key).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _unit_float(*key) -> float:
    """Deterministic uniform draw in [0, 1) keyed by the arguments."""
    return derived_seed(*key) / 2**64


@dataclass
class SimOracleModel:
    """Ground truth plus noise parameters for the simulated oracles.

    Annotations of one individual share a latent unit vector; each annotation
    perturbs it slightly, so same-individual similarity is near one while
    different-individual similarity concentrates near zero.
    """

    truth: dict[str, str]
    seed: int = 0
    flip_rate: float = 0.0
    jitter: float = 0.02
    min_similarity: float | None = 0.5
    human_error_rate: float = 0.02
    human_incomparable_rate: float = 0.01
    perturbation: float = 0.2  # latent-feature perturbation radius

    def __post_init__(self) -> None:
        for name in ("flip_rate", "jitter", "human_error_rate", "human_incomparable_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        self._features: dict[str, np.ndarray] = {}
        self._individual_vectors: dict[str, np.ndarray] = {}

    def _individual_vector(self, individual_id: str) -> np.ndarray:
        vec = self._individual_vectors.get(individual_id)
        if vec is None:
            rng = np.random.default_rng(derived_seed(self.seed, "individual", individual_id))
            vec = rng.standard_normal(FEATURE_DIM)
            vec /= np.linalg.norm(vec)
            self._individual_vectors[individual_id] = vec
        return vec

    def feature(self, annotation_id: str) -> np.ndarray:
        feat = self._features.get(annotation_id)
        if feat is None:
            individual = self.truth[annotation_id]
            rng = np.random.default_rng(derived_seed(self.seed, "annotation", annotation_id))
            noise = rng.standard_normal(FEATURE_DIM)
            noise /= np.linalg.norm(noise)
            feat = self._individual_vector(individual) + self.perturbation * noise
            feat /= np.linalg.norm(feat)
            self._features[annotation_id] = feat
        return feat

    def similarity(self, a: str, b: str) -> float:
        return float(self.feature(a) @ self.feature(b))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "flip_rate": self.flip_rate,
            "jitter": self.jitter,
            "min_similarity": self.min_similarity,
            "human_error_rate": self.human_error_rate,
            "human_incomparable_rate": self.human_incomparable_rate,
            "perturbation": self.perturbation,
        }


class SimRanker:
    """Ranks candidates by latent-feature similarity plus seeded jitter."""

    def __init__(self, model: SimOracleModel):
        self.model = model

    def score(self, query: str, candidate: str) -> float:
        jitter = self.model.jitter * (2.0 * _unit_float(self.model.seed, "rank", query, candidate) - 1.0)
        return self.model.similarity(query, candidate) + jitter

    def top_k(self, query: str, candidates: Sequence[str], k: int) -> list[tuple[str, float]]:
        if k <= 0:
            return []
        scored = []
        for candidate in candidates:
            if candidate == query:
                continue
            s = self.score(query, candidate)
            if self.model.min_similarity is not None and s < self.model.min_similarity:
                continue
            scored.append((candidate, s))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]


class SimVerifier:
    """Noisy pairwise verifier; confidence is probability-of-same.

    The first review of a pair is a pure function of (seed, unordered pair);
    repeat reviews are keyed by attempt so they are fresh, independent draws.
    Correct answers draw confidence from a high band (>= 0.9 for true same,
    <= 0.1 for true different).
    """

    def __init__(self, model: SimOracleModel):
        self.model = model

    def verify(self, a: str, b: str, attempt: int = 1) -> tuple[Decision, float]:
        if a not in self.model.truth or b not in self.model.truth:
            raise KeyError(f"unknown annotation id in pair ({a!r}, {b!r})")
        lo, hi = norm_pair(a, b)
        rng = random.Random(derived_seed(self.model.seed, "verify", lo, hi, attempt))
        truly_same = self.model.truth[a] == self.model.truth[b]
        flipped = rng.random() < self.model.flip_rate
        report_same = truly_same != flipped
        if report_same:
            confidence = 0.9 + 0.1 * rng.random()
            return Decision.SAME, confidence
        confidence = 0.1 * rng.random()
        return Decision.DIFFERENT, confidence


class SimHuman:
    """Simulated human reviewer with error rate epsilon and incomparable
    rate kappa; each attempt on a pair is an independent seeded draw."""

    def __init__(self, model: SimOracleModel):
        self.model = model

    def review(self, a: str, b: str, attempt: int = 1) -> Decision:
        lo, hi = norm_pair(a, b)
        rng = random.Random(derived_seed(self.model.seed, "human", lo, hi, attempt))
        draw = rng.random()
        if draw < self.model.human_incomparable_rate:
            return Decision.INCOMPARABLE
        truly_same = self.model.truth[a] == self.model.truth[b]
        if draw < self.model.human_incomparable_rate + self.model.human_error_rate:
            return Decision.DIFFERENT if truly_same else Decision.SAME
        return Decision.SAME if truly_same else Decision.DIFFERENT


class SimulatedHumanChannel:
    """Review channel backed by the simulated human; never suspends."""

    def __init__(self, model: SimOracleModel):
        self.human = SimHuman(model)

    def request(self, a: str, b: str, attempt: int) -> tuple[Decision, ReviewSource]:
        return self.human.review(a, b, attempt), ReviewSource.SIMULATED_HUMAN
