"""Manifest parsing and validation.

Annotation manifests are line-delimited JSON (one annotation per line); the
camera registry is a single JSON array. Bad lines are rejected individually
with a line number and reason so one noisy detector record cannot sink a
whole ingest.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .types import (
    Annotation,
    Camera,
    Dataset,
    Provenance,
    Source,
    Species,
    Strategy,
    Viewpoint,
    content_digest,
    parse_utc_timestamp,
)

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("annotation_id", "image_id", "camera_id", "timestamp", "viewpoint", "species", "ca_score")


class ManifestError(Exception):
    """Fatal ingest failure: missing file or unreadable registry."""


@dataclass(frozen=True)
class ParseIssue:
    path: str
    line_no: int
    reason: str


@dataclass
class ParseReport:
    accepted: int = 0
    issues: list[ParseIssue] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.issues)

    def reject(self, path: str, line_no: int, reason: str) -> None:
        self.issues.append(ParseIssue(path=path, line_no=line_no, reason=reason))


def _coerce_enum(enum_cls, value, fallback=None):
    """Map unknown enum strings to the fallback member (or raise without one)."""
    try:
        return enum_cls(value)
    except ValueError:
        if fallback is not None:
            return fallback
        raise


def _parse_camera_record(rec: dict) -> Camera:
    camera_id = rec.get("camera_id")
    if not camera_id or not isinstance(camera_id, str):
        raise ValueError("missing camera_id")
    strategy = Strategy(rec.get("strategy"))
    lat, lon = rec.get("lat"), rec.get("lon")
    if lat is None and lon is None:
        location = None
    elif lat is None or lon is None:
        raise ValueError("lat/lon must both be present or both absent")
    else:
        location = (float(lat), float(lon))
    return Camera(camera_id=camera_id, location=location, strategy=strategy)


def _parse_annotation_record(rec: dict, camera_ids: set[str]) -> Annotation:
    missing = [k for k in REQUIRED_KEYS if k not in rec]
    if missing:
        raise ValueError(f"missing required field(s): {', '.join(missing)}")

    annotation_id = rec["annotation_id"]
    if not isinstance(annotation_id, str) or not annotation_id:
        raise ValueError("annotation_id must be a non-empty string")

    camera_id = rec["camera_id"]
    if camera_id not in camera_ids:
        raise ValueError(f"dangling camera_id {camera_id!r}")

    try:
        timestamp = parse_utc_timestamp(str(rec["timestamp"]))
    except ValueError as exc:
        raise ValueError(f"unparsable timestamp: {exc}") from exc

    ca_score = float(rec["ca_score"])
    if not 0.0 <= ca_score <= 1.0:
        raise ValueError("ca_score out of range")

    blur_score = rec.get("blur_score")
    if blur_score is not None:
        blur_score = float(blur_score)
        if blur_score < 0:
            raise ValueError("blur_score must be >= 0")

    lat, lon = rec.get("lat"), rec.get("lon")
    if lat is None and lon is None:
        gps = None
    elif lat is None or lon is None:
        raise ValueError("lat/lon must both be present or both absent")
    else:
        gps = (float(lat), float(lon))

    # Noisy detector output: unknown viewpoints/species degrade to OTHER
    # rather than rejecting the record.
    viewpoint = _coerce_enum(Viewpoint, rec["viewpoint"], Viewpoint.OTHER)
    species = _coerce_enum(Species, rec["species"], Species.OTHER)
    source = Source(rec.get("source", Source.CAMERA_TRAP.value))

    return Annotation(
        annotation_id=annotation_id,
        image_id=str(rec["image_id"]),
        camera_id=camera_id,
        timestamp=timestamp,
        viewpoint=viewpoint,
        species=species,
        ca_score=ca_score,
        blur_score=blur_score,
        gps=gps,
        crop_uri=rec.get("crop_uri"),
        source=source,
    )


def parse_cameras(cameras_path: str | Path, report: ParseReport) -> list[Camera]:
    path = Path(cameras_path)
    if not path.is_file():
        raise ManifestError(f"camera registry not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"camera registry is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ManifestError("camera registry must be a JSON array")

    cameras: list[Camera] = []
    seen: set[str] = set()
    for idx, rec in enumerate(raw, start=1):
        try:
            camera = _parse_camera_record(rec)
        except (ValueError, TypeError) as exc:
            report.reject(str(path), idx, str(exc))
            continue
        if camera.camera_id in seen:
            report.reject(str(path), idx, f"duplicate camera_id {camera.camera_id!r}")
            continue
        seen.add(camera.camera_id)
        cameras.append(camera)
    return cameras


def parse_manifest(annotations_path: str | Path, cameras_path: str | Path) -> tuple[Dataset, ParseReport]:
    """Parse and validate a manifest pair into a Dataset.

    Returns the dataset together with a report of rejected lines; a dataset
    with zero annotations is still a valid result.
    """
    ann_path = Path(annotations_path)
    if not ann_path.is_file():
        raise ManifestError(f"annotation manifest not found: {ann_path}")

    report = ParseReport()
    cameras = parse_cameras(cameras_path, report)
    camera_ids = {c.camera_id for c in cameras}

    annotations: list[Annotation] = []
    seen_ids: set[str] = set()
    ann_bytes = ann_path.read_bytes()
    for line_no, line in enumerate(ann_bytes.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            report.reject(str(ann_path), line_no, f"invalid JSON: {exc}")
            continue
        try:
            annotation = _parse_annotation_record(rec, camera_ids)
        except (ValueError, TypeError) as exc:
            report.reject(str(ann_path), line_no, str(exc))
            continue
        if annotation.annotation_id in seen_ids:
            report.reject(str(ann_path), line_no, f"duplicate annotation_id {annotation.annotation_id!r}")
            continue
        seen_ids.add(annotation.annotation_id)
        annotations.append(annotation)

    report.accepted = len(annotations)
    if report.issues:
        logger.warning("ingest rejected %d line(s); first: %s", report.rejected, report.issues[0])

    provenance = Provenance(
        annotations_path=str(ann_path),
        cameras_path=str(cameras_path),
        digest=content_digest(ann_bytes, Path(cameras_path).read_bytes()),
    )
    return Dataset(annotations=annotations, cameras=cameras, provenance=provenance), report


def write_manifest(annotations: list[Annotation], path: str | Path) -> None:
    """Serialize annotations as line-delimited JSON, one record per line."""
    lines = [json.dumps(a.to_record(), sort_keys=True) for a in annotations]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def write_cameras(cameras: list[Camera], path: str | Path) -> None:
    Path(path).write_text(json.dumps([c.to_record() for c in cameras], indent=2, sort_keys=True) + "\n")
