"""Seeded synthetic populations, camera networks, and annotation manifests
with ground truth, plus clustering evaluation against that truth.

Generation is deterministic per seed and uses only integer or fixed-precision
sampling for everything written to disk, so manifests are byte-identical
across runs and platforms. Encounters are Poisson per (camera, individual)
with strategy- and distance-dependent rates; bursts occupy 5-minute slots so
two bursts on one camera never chain into a single encounter.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .ingest import write_cameras, write_manifest
from .matchers import derived_seed
from .types import Annotation, Camera, Source, Species, Strategy, Viewpoint

STUDY_EPOCH = int(datetime(2023, 1, 1, tzinfo=timezone.utc).timestamp())
SLOT_MINUTES = 5
ALLOWED_VIEWPOINTS = (Viewpoint.RIGHT, Viewpoint.FRONT_RIGHT, Viewpoint.BACK_RIGHT)
OTHER_VIEWPOINTS = (Viewpoint.LEFT, Viewpoint.FRONT, Viewpoint.BACK, Viewpoint.OTHER)

DEFAULT_STRATEGY_MIX = {
    "random_grid": 0.3,
    "roadside_known": 0.25,
    "roadside_random": 0.15,
    "magnet_motion": 0.2,
    "magnet_timelapse": 0.1,
}

DEFAULT_RATE_MULTIPLIERS = {
    "random_grid": 1.0,
    "roadside_known": 1.6,
    "roadside_random": 0.8,
    "magnet_motion": 5.0,
    "magnet_timelapse": 4.0,
}


@dataclass(frozen=True)
class SimConfig:
    individuals: int = 40
    transient_fraction: float = 0.0
    cameras: int = 10
    strategy_mix: dict = field(default_factory=lambda: dict(DEFAULT_STRATEGY_MIX))
    days: int = 30
    rate_multipliers: dict = field(default_factory=lambda: dict(DEFAULT_RATE_MULTIPLIERS))
    base_encounter_rate: float = 0.02  # per individual-day at zero distance
    home_range_km: float = 8.0
    burst_min: int = 1
    burst_max: int = 4
    day_fraction: float = 0.8
    good_fraction: float = 0.75
    ca_good_range: tuple[float, float] = (0.6, 1.0)
    ca_poor_range: tuple[float, float] = (0.0, 0.3)
    allowed_viewpoint_fraction: float = 0.8
    grevys_fraction: float = 0.85
    utc_offset_minutes: int = 180
    seed: int = 0

    def __post_init__(self) -> None:
        if self.individuals < 1 or self.cameras < 1:
            raise ValueError("individuals and cameras must both be >= 1")
        for name in ("transient_fraction", "day_fraction", "good_fraction",
                     "allowed_viewpoint_fraction", "grevys_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.base_encounter_rate < 0:
            raise ValueError("base_encounter_rate must be >= 0")
        if not 1 <= self.burst_min <= self.burst_max:
            raise ValueError("burst size range invalid")

    @classmethod
    def from_dict(cls, raw: dict) -> SimConfig:
        known = {k: raw[k] for k in cls.__dataclass_fields__ if k in raw}
        if "ca_good_range" in known:
            known["ca_good_range"] = tuple(known["ca_good_range"])
        if "ca_poor_range" in known:
            known["ca_poor_range"] = tuple(known["ca_poor_range"])
        return cls(**known)


@dataclass(frozen=True)
class Burst:
    camera_id: str
    individual_id: str
    member_ids: tuple[str, ...]
    is_day: bool
    viewpoint: Viewpoint
    start_minute: int


@dataclass
class SimOutput:
    annotations: list[Annotation]
    cameras: list[Camera]
    truth: dict[str, str]
    bursts: list[Burst]
    config: SimConfig

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = out / "manifest.jsonl"
        cameras = out / "cameras.json"
        truth = out / "truth.csv"
        write_manifest(self.annotations, manifest)
        write_cameras(self.cameras, cameras)
        write_truth(self.truth, truth)
        return {"manifest": manifest, "cameras": cameras, "truth": truth}


def write_truth(truth: dict[str, str], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotation_id", "individual_id"])
        for annotation_id in sorted(truth):
            writer.writerow([annotation_id, truth[annotation_id]])


def read_truth(path: str | Path) -> dict[str, str]:
    truth: dict[str, str] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "annotation_id":
                continue
            truth[row[0]] = row[1]
    return truth


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    threshold = math.exp(-lam)
    count, product = 0, rng.random()
    while product > threshold:
        product *= rng.random()
        count += 1
    return count


def _largest_remainder_counts(fractions: dict[str, float], total: int) -> dict[str, int]:
    names = sorted(fractions)
    weights = [max(0.0, fractions[n]) for n in names]
    weight_sum = sum(weights) or 1.0
    raw = [total * w / weight_sum for w in weights]
    counts = [int(x) for x in raw]
    shortfall = total - sum(counts)
    order = sorted(range(len(names)), key=lambda i: (-(raw[i] - counts[i]), names[i]))
    for i in range(shortfall):
        counts[order[i % len(names)]] += 1
    return dict(zip(names, counts))


def _slot_is_day(slot_minute: int, utc_offset_minutes: int) -> bool:
    local = (slot_minute + utc_offset_minutes) % 1440
    return 6 * 60 + 30 <= local < 19 * 60


def generate(config: SimConfig) -> SimOutput:
    """Deterministic synthetic dataset: every annotation maps to a true
    individual, bursts share a camera and consecutive-minute timestamps, and
    magnet cameras carry the highest expected encounter rates."""
    base = config.seed

    strategy_counts = _largest_remainder_counts(config.strategy_mix, config.cameras)
    strategies: list[Strategy] = []
    for name in sorted(strategy_counts):
        strategies.extend([Strategy(name)] * strategy_counts[name])

    cameras: list[Camera] = []
    for i in range(config.cameras):
        rng = random.Random(derived_seed(base, "camera", i))
        lat = round(0.29 + rng.uniform(-0.06, 0.06), 6)
        lon = round(36.87 + rng.uniform(-0.06, 0.06), 6)
        cameras.append(Camera(camera_id=f"cam{i:03d}", location=(lat, lon), strategy=strategies[i]))

    individuals = [f"ind{i:03d}" for i in range(config.individuals)]
    homes: dict[str, tuple[float, float]] = {}
    species: dict[str, Species] = {}
    windows: dict[str, tuple[int, int]] = {}
    for ind in individuals:
        rng = random.Random(derived_seed(base, "individual", ind))
        homes[ind] = (0.29 + rng.uniform(-0.06, 0.06), 36.87 + rng.uniform(-0.06, 0.06))
        species[ind] = Species.GREVYS if rng.random() < config.grevys_fraction else Species.PLAINS
        if rng.random() < config.transient_fraction:
            length = max(1, round(config.days * 0.25))
            start = rng.randrange(max(1, config.days - length + 1))
            windows[ind] = (start, start + length)
        else:
            windows[ind] = (0, config.days)

    study_start_minute = STUDY_EPOCH // 60
    total_slots = config.days * 1440 // SLOT_MINUTES

    annotations: list[Annotation] = []
    truth: dict[str, str] = {}
    bursts: list[Burst] = []
    counter = 0

    for camera in cameras:
        mult = config.rate_multipliers.get(camera.strategy.value, 1.0)
        burst_specs: list[tuple[str, int]] = []
        for ind in individuals:
            rng = random.Random(derived_seed(base, "encounters", camera.camera_id, ind))
            window = windows[ind]
            dist_km = 111.0 * math.hypot(
                camera.location[0] - homes[ind][0], camera.location[1] - homes[ind][1]
            )
            decay = math.exp(-((dist_km / config.home_range_km) ** 2))
            lam = config.base_encounter_rate * mult * decay * (window[1] - window[0])
            for j in range(_poisson(rng, lam)):
                burst_specs.append((ind, j))

        used_slots: set[int] = set()
        for ind, j in burst_specs:
            rng = random.Random(derived_seed(base, "burst", camera.camera_id, ind, j))
            is_day = rng.random() < config.day_fraction
            window = windows[ind]

            def slot_ok(s: int) -> bool:
                return (
                    s not in used_slots
                    and window[0] <= s * SLOT_MINUTES // 1440 < window[1]
                    and _slot_is_day(study_start_minute + s * SLOT_MINUTES, config.utc_offset_minutes) == is_day
                )

            # rejection sampling with a deterministic exhaustive fallback
            slot = None
            for _ in range(64):
                candidate = rng.randrange(total_slots)
                if slot_ok(candidate):
                    slot = candidate
                    break
            if slot is None:
                candidates = [s for s in range(total_slots) if slot_ok(s)]
                if not candidates:
                    continue
                slot = candidates[rng.randrange(len(candidates))]
            used_slots.add(slot)
            start_minute = study_start_minute + slot * SLOT_MINUTES
            start_second = start_minute * 60 + rng.randrange(10)

            size = rng.randint(config.burst_min, config.burst_max)
            if rng.random() < config.allowed_viewpoint_fraction:
                viewpoint = ALLOWED_VIEWPOINTS[rng.randrange(len(ALLOWED_VIEWPOINTS))]
            else:
                viewpoint = OTHER_VIEWPOINTS[rng.randrange(len(OTHER_VIEWPOINTS))]

            member_ids = []
            t = start_second
            for _ in range(size):
                annotation_id = f"a{counter:06d}"
                counter += 1
                good = rng.random() < config.good_fraction
                lo, hi = config.ca_good_range if good else config.ca_poor_range
                ca_score = round(lo + (hi - lo) * rng.random(), 4)
                blur_score = round(rng.random(), 4)
                annotations.append(
                    Annotation(
                        annotation_id=annotation_id,
                        image_id=f"img{annotation_id[1:]}",
                        camera_id=camera.camera_id,
                        timestamp=datetime.fromtimestamp(t, tz=timezone.utc),
                        viewpoint=viewpoint,
                        species=species[ind],
                        ca_score=ca_score,
                        blur_score=blur_score,
                        gps=camera.location,
                        source=Source.CAMERA_TRAP,
                    )
                )
                truth[annotation_id] = ind
                member_ids.append(annotation_id)
                t += rng.randrange(15, 50)
            bursts.append(
                Burst(
                    camera_id=camera.camera_id,
                    individual_id=ind,
                    member_ids=tuple(member_ids),
                    is_day=is_day,
                    viewpoint=viewpoint,
                    start_minute=start_minute,
                )
            )

    return SimOutput(annotations=annotations, cameras=cameras, truth=truth, bursts=bursts, config=config)


def planted_population(
    n_individuals: int, min_annotations: int, max_annotations: int, seed: int
) -> tuple[list[str], dict[str, str]]:
    """Bare annotation ids and truth for engine-level planted tests."""
    ids: list[str] = []
    truth: dict[str, str] = {}
    counter = 0
    for i in range(n_individuals):
        rng = random.Random(derived_seed(seed, "planted", i))
        for _ in range(rng.randint(min_annotations, max_annotations)):
            annotation_id = f"a{counter:05d}"
            counter += 1
            ids.append(annotation_id)
            truth[annotation_id] = f"ind{i:03d}"
    return ids, truth


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    ari: float
    predicted_clusters: int
    true_clusters: int

    @property
    def count_delta(self) -> int:
        return self.predicted_clusters - self.true_clusters

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "ari": self.ari,
            "predicted_clusters": self.predicted_clusters,
            "true_clusters": self.true_clusters,
            "count_delta": self.count_delta,
        }


def _comb2(n: int) -> int:
    return n * (n - 1) // 2


def evaluate(predicted: dict[str, str], truth: dict[str, str]) -> EvalReport:
    """Pairwise precision/recall/F1 over same-cluster pairs, plus the
    adjusted Rand index. Zero predicted-same pairs yields precision 1.0."""
    if set(predicted) != set(truth):
        raise ValueError("predicted and truth annotation id sets differ")

    contingency: dict[tuple[str, str], int] = {}
    pred_sizes: dict[str, int] = {}
    true_sizes: dict[str, int] = {}
    for annotation_id, pred_cluster in predicted.items():
        true_cluster = truth[annotation_id]
        contingency[(pred_cluster, true_cluster)] = contingency.get((pred_cluster, true_cluster), 0) + 1
        pred_sizes[pred_cluster] = pred_sizes.get(pred_cluster, 0) + 1
        true_sizes[true_cluster] = true_sizes.get(true_cluster, 0) + 1

    tp = sum(_comb2(c) for c in contingency.values())
    predicted_same = sum(_comb2(c) for c in pred_sizes.values())
    true_same = sum(_comb2(c) for c in true_sizes.values())

    precision = 1.0 if predicted_same == 0 else tp / predicted_same
    recall = 1.0 if true_same == 0 else tp / true_same
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)

    n = len(predicted)
    total_pairs = _comb2(n)
    if total_pairs == 0:
        ari = 1.0
    else:
        expected = predicted_same * true_same / total_pairs
        max_index = (predicted_same + true_same) / 2
        denom = max_index - expected
        ari = 1.0 if denom == 0 else (tp - expected) / denom

    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        ari=ari,
        predicted_clusters=len(pred_sizes),
        true_clusters=len(true_sizes),
    )
