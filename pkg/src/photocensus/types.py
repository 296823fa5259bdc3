"""Core domain records: annotations, cameras, datasets.

All upstream machine-learning outputs (detections, species/viewpoint labels,
comparability scores) enter the system as plain data on these records; no
inference happens here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum


class Viewpoint(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    FRONT_RIGHT = "front-right"
    BACK_RIGHT = "back-right"
    FRONT = "front"
    BACK = "back"
    OTHER = "other"


class Species(str, Enum):
    GREVYS = "grevys"
    PLAINS = "plains"
    OTHER = "other"


class Source(str, Enum):
    CAMERA_TRAP = "camera_trap"
    FIELD_PHOTO = "field_photo"


class Strategy(str, Enum):
    RANDOM_GRID = "random_grid"
    ROADSIDE_KNOWN = "roadside_known"
    ROADSIDE_RANDOM = "roadside_random"
    MAGNET_MOTION = "magnet_motion"
    MAGNET_TIMELAPSE = "magnet_timelapse"


def parse_utc_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp with an explicit UTC offset.

    Naive timestamps are rejected; the result is normalized to UTC at
    second precision.
    """
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {raw!r} lacks a UTC offset")
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_utc_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class Annotation:
    """One detected animal crop plus its metadata."""

    annotation_id: str
    image_id: str
    camera_id: str
    timestamp: datetime
    viewpoint: Viewpoint
    species: Species
    ca_score: float
    blur_score: float | None = None
    gps: tuple[float, float] | None = None
    crop_uri: str | None = None
    source: Source = Source.CAMERA_TRAP

    @property
    def epoch_minute(self) -> int:
        """Timestamp floored to whole epoch minutes."""
        return int(self.timestamp.timestamp()) // 60

    def to_record(self) -> dict:
        rec = {
            "annotation_id": self.annotation_id,
            "image_id": self.image_id,
            "camera_id": self.camera_id,
            "timestamp": format_utc_timestamp(self.timestamp),
            "viewpoint": self.viewpoint.value,
            "species": self.species.value,
            "ca_score": self.ca_score,
        }
        if self.blur_score is not None:
            rec["blur_score"] = self.blur_score
        if self.gps is not None:
            rec["lat"], rec["lon"] = self.gps
        if self.crop_uri is not None:
            rec["crop_uri"] = self.crop_uri
        rec["source"] = self.source.value
        return rec


@dataclass(frozen=True)
class Camera:
    camera_id: str
    location: tuple[float, float] | None
    strategy: Strategy

    def to_record(self) -> dict:
        rec: dict = {"camera_id": self.camera_id}
        if self.location is not None:
            rec["lat"], rec["lon"] = self.location
        else:
            rec["lat"] = rec["lon"] = None
        rec["strategy"] = self.strategy.value
        return rec


@dataclass(frozen=True)
class Provenance:
    annotations_path: str
    cameras_path: str
    digest: str


@dataclass
class Dataset:
    """Validated annotations plus the camera registry they reference."""

    annotations: list[Annotation]
    cameras: list[Camera]
    provenance: Provenance
    state_kind = "dataset"

    def __post_init__(self) -> None:
        self._by_id = {a.annotation_id: a for a in self.annotations}
        self._camera_by_id = {c.camera_id: c for c in self.cameras}

    def annotation(self, annotation_id: str) -> Annotation:
        return self._by_id[annotation_id]

    def camera(self, camera_id: str) -> Camera:
        return self._camera_by_id[camera_id]

    @property
    def annotation_ids(self) -> list[str]:
        return [a.annotation_id for a in self.annotations]


def content_digest(*blobs: bytes) -> str:
    h = hashlib.sha256()
    for blob in blobs:
        h.update(blob)
    return h.hexdigest()
