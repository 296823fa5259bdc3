"""Annotation filtering funnel.

Fixed stage order: viewpoint/species gate, daytime gate, per-camera
consecutive-minute encounter clustering, best-representative subsampling,
then the comparability-score and blur gates. Every stage is a pure function
and each can be disabled independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import time, timedelta

from .types import Annotation, Dataset, Species, Viewpoint

DEFAULT_VIEWPOINTS = frozenset({Viewpoint.RIGHT, Viewpoint.FRONT_RIGHT, Viewpoint.BACK_RIGHT})
DEFAULT_SPECIES = frozenset({Species.GREVYS})


@dataclass(frozen=True)
class FilterConfig:
    allowed_viewpoints: frozenset[Viewpoint] = DEFAULT_VIEWPOINTS
    allowed_species: frozenset[Species] = DEFAULT_SPECIES
    day_start: time = time(6, 30)
    day_end: time = time(19, 0)
    utc_offset_minutes: int = 180  # study-site wall clock, UTC+3
    ca_threshold: float = 0.31
    blur_threshold: float | None = None
    enable_viewpoint_species: bool = True
    enable_daytime: bool = True
    enable_encounters: bool = True
    enable_representatives: bool = True
    enable_ca: bool = True
    enable_blur: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.ca_threshold <= 1.0:
            raise ValueError(f"ca_threshold must be in [0, 1], got {self.ca_threshold}")
        if self.day_start >= self.day_end:
            raise ValueError("day window start must precede end")

    def to_dict(self) -> dict:
        return {
            "allowed_viewpoints": sorted(v.value for v in self.allowed_viewpoints),
            "allowed_species": sorted(s.value for s in self.allowed_species),
            "day_start": self.day_start.isoformat(timespec="minutes"),
            "day_end": self.day_end.isoformat(timespec="minutes"),
            "utc_offset_minutes": self.utc_offset_minutes,
            "ca_threshold": self.ca_threshold,
            "blur_threshold": self.blur_threshold,
            "enable_viewpoint_species": self.enable_viewpoint_species,
            "enable_daytime": self.enable_daytime,
            "enable_encounters": self.enable_encounters,
            "enable_representatives": self.enable_representatives,
            "enable_ca": self.enable_ca,
            "enable_blur": self.enable_blur,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> FilterConfig:
        kwargs: dict = {}
        if "allowed_viewpoints" in raw:
            kwargs["allowed_viewpoints"] = frozenset(Viewpoint(v) for v in raw["allowed_viewpoints"])
        if "allowed_species" in raw:
            kwargs["allowed_species"] = frozenset(Species(s) for s in raw["allowed_species"])
        if "day_start" in raw:
            kwargs["day_start"] = time.fromisoformat(raw["day_start"])
        if "day_end" in raw:
            kwargs["day_end"] = time.fromisoformat(raw["day_end"])
        for key in (
            "utc_offset_minutes",
            "ca_threshold",
            "blur_threshold",
            "enable_viewpoint_species",
            "enable_daytime",
            "enable_encounters",
            "enable_representatives",
            "enable_ca",
            "enable_blur",
        ):
            if key in raw:
                kwargs[key] = raw[key]
        return cls(**kwargs)


@dataclass(frozen=True)
class Encounter:
    """A per-camera group of annotations spanning chained consecutive minutes."""

    encounter_id: str
    camera_id: str
    minute_buckets: tuple[int, ...]
    member_ids: tuple[str, ...]
    representative_id: str

    @property
    def start_minute(self) -> int:
        return self.minute_buckets[0]

    def to_record(self) -> dict:
        return {
            "encounter_id": self.encounter_id,
            "camera_id": self.camera_id,
            "minute_buckets": list(self.minute_buckets),
            "member_ids": list(self.member_ids),
            "representative_id": self.representative_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> Encounter:
        return cls(
            encounter_id=rec["encounter_id"],
            camera_id=rec["camera_id"],
            minute_buckets=tuple(rec["minute_buckets"]),
            member_ids=tuple(rec["member_ids"]),
            representative_id=rec["representative_id"],
        )


@dataclass(frozen=True)
class FunnelStage:
    name: str
    input_count: int
    output_count: int
    enabled: bool = True
    detail: dict = field(default_factory=dict)


@dataclass
class FunnelReport:
    stages: list[FunnelStage]
    final_annotation_ids: tuple[str, ...]
    encounters: tuple[Encounter, ...] = ()
    discarded: dict[str, str] = field(default_factory=dict)
    state_kind = "funnel"

    def to_payload(self) -> dict:
        return {
            "stages": [
                {
                    "name": s.name,
                    "input_count": s.input_count,
                    "output_count": s.output_count,
                    "enabled": s.enabled,
                    "detail": s.detail,
                }
                for s in self.stages
            ],
            "final_annotation_ids": list(self.final_annotation_ids),
            "encounters": [e.to_record() for e in self.encounters],
            "discarded": self.discarded,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> FunnelReport:
        return cls(
            stages=[
                FunnelStage(
                    name=s["name"],
                    input_count=s["input_count"],
                    output_count=s["output_count"],
                    enabled=s.get("enabled", True),
                    detail=s.get("detail", {}),
                )
                for s in payload["stages"]
            ],
            final_annotation_ids=tuple(payload["final_annotation_ids"]),
            encounters=tuple(Encounter.from_record(r) for r in payload["encounters"]),
            discarded=dict(payload.get("discarded", {})),
        )


def gate_viewpoint_species(annots: list[Annotation], config: FilterConfig) -> list[Annotation]:
    """Keep annotations whose viewpoint and species are both allowed."""
    return [
        a
        for a in annots
        if a.viewpoint in config.allowed_viewpoints and a.species in config.allowed_species
    ]


def local_wall_time(annotation: Annotation, config: FilterConfig) -> time:
    local = annotation.timestamp + timedelta(minutes=config.utc_offset_minutes)
    return local.time()


def gate_daytime(annots: list[Annotation], config: FilterConfig) -> list[Annotation]:
    """Keep annotations inside the local day window: start inclusive, end exclusive."""
    return [a for a in annots if config.day_start <= local_wall_time(a, config) < config.day_end]


def cluster_encounters(annots: list[Annotation]) -> list[Encounter]:
    """Group each camera's annotations into runs of occupied consecutive minutes.

    Two annotations share an encounter iff their minute buckets are linked by
    a chain of occupied consecutive minutes on the same camera. Output order
    and encounter ids depend only on (camera_id, first minute bucket).
    """
    by_camera: dict[str, list[Annotation]] = {}
    for a in annots:
        by_camera.setdefault(a.camera_id, []).append(a)

    encounters: list[Encounter] = []
    for camera_id in sorted(by_camera):
        members = by_camera[camera_id]
        by_minute: dict[int, list[Annotation]] = {}
        for a in members:
            by_minute.setdefault(a.epoch_minute, []).append(a)
        minutes = sorted(by_minute)

        run: list[int] = []
        for minute in minutes:
            if run and minute - run[-1] > 1:
                encounters.append(_build_encounter(camera_id, run, by_minute))
                run = []
            run.append(minute)
        if run:
            encounters.append(_build_encounter(camera_id, run, by_minute))
    return encounters


def _build_encounter(camera_id: str, run: list[int], by_minute: dict[int, list[Annotation]]) -> Encounter:
    members: list[Annotation] = []
    for minute in run:
        members.extend(by_minute[minute])
    representative = min(members, key=lambda a: (-a.ca_score, a.annotation_id))
    return Encounter(
        encounter_id=f"{camera_id}:{run[0]}",
        camera_id=camera_id,
        minute_buckets=tuple(run),
        member_ids=tuple(sorted(a.annotation_id for a in members)),
        representative_id=representative.annotation_id,
    )


def select_representatives(
    encounters: list[Encounter], annots_by_id: dict[str, Annotation]
) -> tuple[list[Annotation], dict[str, str]]:
    """One annotation per encounter (highest ca_score, ties to smallest id).

    Returns the representatives plus a map of discarded member ids to reasons.
    """
    discarded: dict[str, str] = {}
    reps: list[Annotation] = []
    for enc in encounters:
        reps.append(annots_by_id[enc.representative_id])
        for member in enc.member_ids:
            if member != enc.representative_id:
                discarded[member] = f"not representative of encounter {enc.encounter_id}"
    return reps, discarded


def gate_ca(annots: list[Annotation], config: FilterConfig) -> list[Annotation]:
    """Strictly-above comparability threshold."""
    return [a for a in annots if a.ca_score > config.ca_threshold]


def gate_blur(annots: list[Annotation], config: FilterConfig) -> list[Annotation]:
    if config.blur_threshold is None:
        return list(annots)
    return [a for a in annots if a.blur_score is not None and a.blur_score >= config.blur_threshold]


def gate_ca_and_blur(annots: list[Annotation], config: FilterConfig) -> list[Annotation]:
    return gate_blur(gate_ca(annots, config), config)


def run_funnel(dataset: Dataset, config: FilterConfig) -> tuple[list[Annotation], FunnelReport]:
    """Apply the full funnel and account for every stage.

    The returned report chains exactly: each stage's output count is the next
    stage's input count, and each surviving annotation represents one
    encounter (when the encounter stages are enabled).
    """
    stages: list[FunnelStage] = []
    discarded: dict[str, str] = {}
    current = list(dataset.annotations)

    def record(name: str, before: list[Annotation], after: list[Annotation], enabled: bool, reason: str, detail: dict | None = None) -> None:
        if enabled:
            kept = {a.annotation_id for a in after}
            for a in before:
                if a.annotation_id not in kept and a.annotation_id not in discarded:
                    discarded[a.annotation_id] = reason
        stages.append(
            FunnelStage(
                name=name,
                input_count=len(before),
                output_count=len(after),
                enabled=enabled,
                detail=detail or {},
            )
        )

    out = gate_viewpoint_species(current, config) if config.enable_viewpoint_species else current
    record("viewpoint_species", current, out, config.enable_viewpoint_species, "viewpoint or species not allowed")
    current = out

    out = gate_daytime(current, config) if config.enable_daytime else current
    record("daytime", current, out, config.enable_daytime, "outside day window")
    current = out

    annots_by_id = {a.annotation_id: a for a in current}
    if config.enable_encounters:
        encounters = cluster_encounters(current)
    else:
        # Every annotation is its own encounter; downstream stages still work.
        encounters = cluster_encounters_singletons(current)
    stages.append(
        FunnelStage(
            name="encounters",
            input_count=len(current),
            output_count=len(current),
            enabled=config.enable_encounters,
            detail={"encounters_formed": len(encounters)},
        )
    )

    if config.enable_representatives:
        reps, rep_discards = select_representatives(encounters, annots_by_id)
        discarded.update(rep_discards)
        out = reps
    else:
        out = current
    record("representatives", current, out, config.enable_representatives, "not representative of its encounter")
    current = out

    out = gate_ca(current, config) if config.enable_ca else current
    record("ca_score", current, out, config.enable_ca, f"ca_score not above {config.ca_threshold}")
    current = out

    out = gate_blur(current, config) if config.enable_blur else current
    if config.enable_blur and config.blur_threshold is not None:
        kept = {a.annotation_id for a in out}
        for a in current:
            if a.annotation_id in kept:
                continue
            discarded[a.annotation_id] = (
                "missing blur score" if a.blur_score is None else f"blur_score below {config.blur_threshold}"
            )
    stages.append(
        FunnelStage(
            name="blur",
            input_count=len(current),
            output_count=len(out),
            enabled=config.enable_blur,
            detail={},
        )
    )
    current = out

    # Deterministic output order regardless of manifest line order.
    current = sorted(current, key=lambda a: (a.camera_id, a.epoch_minute, a.annotation_id))
    report = FunnelReport(
        stages=stages,
        final_annotation_ids=tuple(a.annotation_id for a in current),
        encounters=tuple(encounters),
        discarded=discarded,
    )
    return current, report


def cluster_encounters_singletons(annots: list[Annotation]) -> list[Encounter]:
    """Degenerate grouping used when the encounter stage is disabled."""
    encounters = []
    for a in sorted(annots, key=lambda a: (a.camera_id, a.epoch_minute, a.annotation_id)):
        encounters.append(
            Encounter(
                encounter_id=f"{a.camera_id}:{a.epoch_minute}:{a.annotation_id}",
                camera_id=a.camera_id,
                minute_buckets=(a.epoch_minute,),
                member_ids=(a.annotation_id,),
                representative_id=a.annotation_id,
            )
        )
    return encounters


def funnel_table(report: FunnelReport) -> str:
    """Render the funnel report as an aligned text table."""
    rows = [("stage", "in", "out", "enabled")]
    for s in report.stages:
        extra = f" ({s.detail['encounters_formed']} encounters)" if "encounters_formed" in s.detail else ""
        rows.append((s.name + extra, str(s.input_count), str(s.output_count), "yes" if s.enabled else "no"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(4)))
    return "\n".join(lines)
