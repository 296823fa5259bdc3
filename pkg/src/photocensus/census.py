"""Post-clustering analytics: two-event capture-recapture estimation,
review/automation accounting, per-individual and per-strategy sighting
statistics, and GeoJSON export of encounter locations.

Everything here is read-only over the clustering, the encounters, and the
camera registry.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone

from .pipeline import Encounter
from .types import Camera

logger = logging.getLogger(__name__)

Z_95 = 1.96


@dataclass(frozen=True)
class CaptureSummary:
    n1: int
    n2: int
    m: int

    def __post_init__(self) -> None:
        if min(self.n1, self.n2, self.m) < 0:
            raise ValueError("capture counts must be non-negative")
        if self.m > min(self.n1, self.n2):
            raise ValueError("recaptured count cannot exceed either event count")


@dataclass(frozen=True)
class PopulationEstimate:
    n_hat: float
    stderr: float
    ci95: tuple[float, float]
    method: str = "lincoln_petersen"

    def to_dict(self) -> dict:
        return {
            "n_hat": self.n_hat,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "method": self.method,
        }


class NoRecaptureError(ValueError):
    """No individual was seen in both events; the estimate is undefined."""


def capture_summary(clusters: dict[str, str], event_of: dict[str, int]) -> CaptureSummary:
    """Distinct-individual counts per capture event and their overlap."""
    unmapped = sorted(a for a in clusters if a not in event_of)
    if unmapped:
        preview = ", ".join(unmapped[:10])
        raise ValueError(f"{len(unmapped)} clustered annotation(s) lack an event assignment: {preview}")
    seen1: set[str] = set()
    seen2: set[str] = set()
    for annotation_id, cluster_id in clusters.items():
        event = event_of[annotation_id]
        if event == 1:
            seen1.add(cluster_id)
        elif event == 2:
            seen2.add(cluster_id)
        else:
            raise ValueError(f"event for {annotation_id} must be 1 or 2, got {event!r}")
    return CaptureSummary(n1=len(seen1), n2=len(seen2), m=len(seen1 & seen2))


def lincoln_petersen(summary: CaptureSummary, chapman: bool = False) -> PopulationEstimate:
    """Two-event capture-recapture point estimate with a normal-approximation
    95% interval, lower bound clamped at max(n1, n2)."""
    n1, n2, m = summary.n1, summary.n2, summary.m
    if m < 1:
        raise NoRecaptureError("no overlap between capture events (m = 0); estimate undefined")
    if chapman:
        n_hat = (n1 + 1) * (n2 + 1) / (m + 1) - 1
        variance = (n1 + 1) * (n2 + 1) * (n1 - m) * (n2 - m) / ((m + 1) ** 2 * (m + 2))
        method = "chapman"
    else:
        n_hat = n1 * n2 / m
        variance = n1 * n2 * (n1 - m) * (n2 - m) / m**3
        method = "lincoln_petersen"
    stderr = math.sqrt(variance)
    low = max(n_hat - Z_95 * stderr, float(max(n1, n2)))
    high = n_hat + Z_95 * stderr
    return PopulationEstimate(n_hat=n_hat, stderr=stderr, ci95=(low, high), method=method)


def automation_rate(algorithmic: int, human: int) -> float:
    """Fraction of reviews answered algorithmically; 1.0 for an empty run."""
    if algorithmic < 0 or human < 0:
        raise ValueError("review counts must be non-negative")
    total = algorithmic + human
    if total == 0:
        return 1.0
    return algorithmic / total


def format_rate(rate: float) -> str:
    """Display form rounded to 0.1%."""
    return f"{rate * 100:.1f}%"


@dataclass(frozen=True)
class IndividualStats:
    per_cluster: dict[str, tuple[int, int]]  # cluster -> (encounters, distinct cameras)
    mean_encounters: float
    mean_cameras: float

    def to_dict(self) -> dict:
        return {
            "per_cluster": {cid: {"encounters": e, "cameras": c} for cid, (e, c) in sorted(self.per_cluster.items())},
            "mean_encounters": self.mean_encounters,
            "mean_cameras": self.mean_cameras,
        }


def _encounter_lookup(encounters: list[Encounter]) -> dict[str, Encounter]:
    lookup: dict[str, Encounter] = {}
    for enc in encounters:
        for member in enc.member_ids:
            lookup[member] = enc
    return lookup


def individual_stats(clusters: dict[str, str], encounters: list[Encounter]) -> IndividualStats:
    """Per cluster: number of encounters and of distinct cameras; dataset
    means reported to two decimals."""
    lookup = _encounter_lookup(encounters)
    enc_ids: dict[str, set[str]] = {}
    cams: dict[str, set[str]] = {}
    for annotation_id, cluster_id in clusters.items():
        enc = lookup.get(annotation_id)
        if enc is None:
            continue
        enc_ids.setdefault(cluster_id, set()).add(enc.encounter_id)
        cams.setdefault(cluster_id, set()).add(enc.camera_id)
    per_cluster = {cid: (len(enc_ids[cid]), len(cams[cid])) for cid in enc_ids}
    if per_cluster:
        mean_enc = round(sum(e for e, _ in per_cluster.values()) / len(per_cluster), 2)
        mean_cam = round(sum(c for _, c in per_cluster.values()) / len(per_cluster), 2)
    else:
        mean_enc = mean_cam = 0.0
    return IndividualStats(per_cluster=per_cluster, mean_encounters=mean_enc, mean_cameras=mean_cam)


@dataclass(frozen=True)
class StrategyStats:
    rows: dict[str, dict]

    def to_dict(self) -> dict:
        return {name: dict(row) for name, row in sorted(self.rows.items())}


def strategy_stats(
    clusters: dict[str, str], encounters: list[Encounter], cameras: list[Camera]
) -> StrategyStats:
    """Per placement strategy: distinct individuals sighted, mean individuals
    per camera, and mean first-sightings per camera.

    An individual's first sighting is its globally earliest encounter; ties
    across cameras go to the lexicographically smallest camera_id.
    """
    lookup = _encounter_lookup(encounters)
    camera_strategy = {c.camera_id: c.strategy.value for c in cameras}

    individuals_by_camera: dict[str, set[str]] = {c.camera_id: set() for c in cameras}
    earliest: dict[str, tuple[int, str]] = {}  # cluster -> (start minute, camera)
    for annotation_id, cluster_id in clusters.items():
        enc = lookup.get(annotation_id)
        if enc is None:
            continue
        individuals_by_camera.setdefault(enc.camera_id, set()).add(cluster_id)
        key = (enc.start_minute, enc.camera_id)
        if cluster_id not in earliest or key < earliest[cluster_id]:
            earliest[cluster_id] = key

    new_by_camera: dict[str, int] = {}
    for cluster_id, (_, camera_id) in earliest.items():
        new_by_camera[camera_id] = new_by_camera.get(camera_id, 0) + 1

    rows: dict[str, dict] = {}
    by_strategy: dict[str, list[str]] = {}
    for camera in cameras:
        by_strategy.setdefault(camera.strategy.value, []).append(camera.camera_id)
    for strategy, cam_ids in by_strategy.items():
        distinct: set[str] = set()
        for cam_id in cam_ids:
            distinct |= individuals_by_camera.get(cam_id, set())
        avg = sum(len(individuals_by_camera.get(c, set())) for c in cam_ids) / len(cam_ids)
        new = sum(new_by_camera.get(c, 0) for c in cam_ids) / len(cam_ids)
        rows[strategy] = {
            "cameras": len(cam_ids),
            "total": len(distinct),
            "avg": round(avg, 2),
            "new": round(new, 2),
            "new_total": sum(new_by_camera.get(c, 0) for c in cam_ids),
        }
    return StrategyStats(rows=rows)


def export_geojson(
    clusters: dict[str, str],
    encounters: list[Encounter],
    cameras: list[Camera],
    cluster_filter: set[str] | None = None,
) -> dict:
    """RFC 7946 FeatureCollection with one Point feature per encounter of the
    selected clusters; cameras without coordinates are omitted with a warning."""
    camera_by_id = {c.camera_id: c for c in cameras}
    features = []
    rows = []
    for enc in encounters:
        cluster_id = clusters.get(enc.representative_id)
        if cluster_id is None:
            for member in enc.member_ids:
                cluster_id = clusters.get(member)
                if cluster_id is not None:
                    break
        if cluster_id is None:
            continue
        if cluster_filter is not None and cluster_id not in cluster_filter:
            continue
        camera = camera_by_id.get(enc.camera_id)
        if camera is None or camera.location is None:
            logger.warning("camera %s has no coordinates; encounter %s omitted", enc.camera_id, enc.encounter_id)
            continue
        rows.append((cluster_id, enc, camera))

    rows.sort(key=lambda r: (r[0], r[1].start_minute, r[1].encounter_id))
    for cluster_id, enc, camera in rows:
        lat, lon = camera.location
        start = datetime_from_minute(enc.start_minute)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "cluster_id": cluster_id,
                    "camera_id": enc.camera_id,
                    "encounter_id": enc.encounter_id,
                    "timestamp": start,
                    "strategy": camera.strategy.value,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def datetime_from_minute(epoch_minute: int) -> str:
    return datetime.fromtimestamp(epoch_minute * 60, tz=timezone.utc).isoformat()
