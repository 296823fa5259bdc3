"""Versioned state snapshots and the append-only review log.

A snapshot is a single JSON document with a top-level ``format_version``;
the review log is JSON lines with monotonic sequence numbers. Human
decisions are auditable from the log alone.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from .types import Annotation, Camera, Dataset, Provenance, Source, Species, Strategy, Viewpoint, parse_utc_timestamp

FORMAT_VERSION = 1


class StateError(Exception):
    """Corrupt or version-mismatched state file."""


def _dataset_payload(dataset: Dataset) -> dict:
    return {
        "annotations": [a.to_record() for a in dataset.annotations],
        "cameras": [c.to_record() for c in dataset.cameras],
        "provenance": {
            "annotations_path": dataset.provenance.annotations_path,
            "cameras_path": dataset.provenance.cameras_path,
            "digest": dataset.provenance.digest,
        },
    }


def _annotation_from_record(rec: dict) -> Annotation:
    gps = None
    if rec.get("lat") is not None and rec.get("lon") is not None:
        gps = (rec["lat"], rec["lon"])
    return Annotation(
        annotation_id=rec["annotation_id"],
        image_id=rec["image_id"],
        camera_id=rec["camera_id"],
        timestamp=parse_utc_timestamp(rec["timestamp"]),
        viewpoint=Viewpoint(rec["viewpoint"]),
        species=Species(rec["species"]),
        ca_score=rec["ca_score"],
        blur_score=rec.get("blur_score"),
        gps=gps,
        crop_uri=rec.get("crop_uri"),
        source=Source(rec.get("source", "camera_trap")),
    )


def _camera_from_record(rec: dict) -> Camera:
    location = None
    if rec.get("lat") is not None and rec.get("lon") is not None:
        location = (rec["lat"], rec["lon"])
    return Camera(camera_id=rec["camera_id"], location=location, strategy=Strategy(rec["strategy"]))


def _dataset_from_payload(payload: dict) -> Dataset:
    prov = payload["provenance"]
    return Dataset(
        annotations=[_annotation_from_record(r) for r in payload["annotations"]],
        cameras=[_camera_from_record(r) for r in payload["cameras"]],
        provenance=Provenance(
            annotations_path=prov["annotations_path"],
            cameras_path=prov["cameras_path"],
            digest=prov["digest"],
        ),
    )


def save_state(value: Any, path: str | Path) -> None:
    """Write a versioned snapshot of a dataset, run state, or report object.

    The value must expose ``state_kind`` and, for non-dataset kinds, a
    ``to_payload()`` method.
    """
    kind = getattr(value, "state_kind", None)
    if kind is None:
        raise StateError(f"object of type {type(value).__name__} is not snapshot-able")
    if kind == "dataset":
        payload = _dataset_payload(value)
    else:
        payload = value.to_payload()
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "payload": payload}
    out = Path(path)
    tmp = out.with_suffix(out.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True))
    os.replace(tmp, out)


def load_state(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise StateError(f"state file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StateError(f"corrupt state file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise StateError(f"corrupt state file {path}: missing format_version")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise StateError(f"unsupported format_version {version} (expected {FORMAT_VERSION})")
    kind = doc.get("kind")
    payload = doc.get("payload")
    if kind == "dataset":
        return _dataset_from_payload(payload)
    if kind == "run_state":
        from .lca.engine import RunState

        return RunState.from_payload(payload)
    if kind == "funnel":
        from .pipeline import FunnelReport

        return FunnelReport.from_payload(payload)
    if kind == "run_result":
        from .lca.engine import RunResult

        return RunResult.from_payload(payload)
    raise StateError(f"unknown state kind {kind!r}")


class ReviewLogWriter:
    """Append-only JSONL sink for review-log entries."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def __call__(self, entry: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def read_review_log(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        return []
    entries = []
    for line in path.read_text().splitlines():
        if line.strip():
            entries.append(json.loads(line))
    return entries
