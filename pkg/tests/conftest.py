from __future__ import annotations

from datetime import datetime, timezone

import pytest

from photocensus.types import Annotation, Camera, Source, Species, Strategy, Viewpoint


def ts(hour: int, minute: int = 0, second: int = 0, day: int = 15) -> datetime:
    """UTC timestamp on a fixed study day."""
    return datetime(2023, 6, day, hour, minute, second, tzinfo=timezone.utc)


def make_annotation(
    annotation_id: str = "a0001",
    camera_id: str = "camA",
    timestamp: datetime | None = None,
    viewpoint: Viewpoint = Viewpoint.RIGHT,
    species: Species = Species.GREVYS,
    ca_score: float = 0.9,
    blur_score: float | None = 0.5,
    **kwargs,
) -> Annotation:
    return Annotation(
        annotation_id=annotation_id,
        image_id=kwargs.pop("image_id", f"img-{annotation_id}"),
        camera_id=camera_id,
        timestamp=timestamp or ts(9, 0, 0),
        viewpoint=viewpoint,
        species=species,
        ca_score=ca_score,
        blur_score=blur_score,
        **kwargs,
    )


def make_camera(
    camera_id: str = "camA",
    location: tuple[float, float] | None = (0.3, 36.9),
    strategy: Strategy = Strategy.RANDOM_GRID,
) -> Camera:
    return Camera(camera_id=camera_id, location=location, strategy=strategy)


@pytest.fixture
def camera_registry() -> list[Camera]:
    return [
        make_camera("camA", (0.30, 36.90), Strategy.RANDOM_GRID),
        make_camera("camB", (0.31, 36.91), Strategy.MAGNET_MOTION),
    ]
