"""HTTP service: run control, cluster state, and the live review queue.

The engine for each run executes in its own thread and is the sole state
mutator; review decisions flow through a lease-based queue so several
reviewers can work one run without collisions. Every run-scoped response
carries the run status and a monotonic state version.
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel, Field

from .census import export_geojson
from .ingest import parse_manifest
from .lca.engine import LcaConfig, LcaEngine, init_graph
from .lca.reviews import Decision, ReviewSource
from .matchers import SimOracleModel, SimRanker, SimVerifier, SimulatedHumanChannel
from .pipeline import FilterConfig, run_funnel
from .simulate import read_truth
from .state import save_state
from .types import Annotation, Dataset, format_utc_timestamp

logger = logging.getLogger(__name__)

DEFAULT_LEASE_TTL = 120.0


@dataclass
class PendingReview:
    request_id: str
    a: str
    b: str
    attempt: int
    event: threading.Event = field(default_factory=threading.Event)
    lease_expiry: float | None = None
    decision: str | None = None
    consumed: bool = False


class ReviewQueue:
    """Bridge between the engine (blocking consumer) and API reviewers.

    Requests are leased for a TTL so two reviewers never hold the same card;
    an expired lease makes the request deliverable again. Decisions are
    recorded exactly once: identical re-submissions are idempotent,
    conflicting ones are rejected.
    """

    def __init__(self, lease_ttl: float = DEFAULT_LEASE_TTL, clock=time.monotonic):
        self.lease_ttl = lease_ttl
        self.clock = clock
        self._lock = threading.Lock()
        self._items: dict[str, PendingReview] = {}
        self._order: list[str] = []
        self._counter = itertools.count()
        self._closed = False

    # --- engine side ------------------------------------------------------

    def request(self, a: str, b: str, attempt: int) -> tuple[Decision, ReviewSource] | None:
        with self._lock:
            if self._closed:
                return None
            request_id = f"req-{next(self._counter):06d}"
            item = PendingReview(request_id=request_id, a=a, b=b, attempt=attempt)
            self._items[request_id] = item
            self._order.append(request_id)
        while True:
            item.event.wait(timeout=0.2)
            with self._lock:
                if item.decision is not None:
                    item.consumed = True
                    return Decision(item.decision), ReviewSource.HUMAN
                if self._closed:
                    return None

    def close(self) -> None:
        with self._lock:
            self._closed = True

    # --- reviewer side ------------------------------------------------------

    def next_pending(self) -> PendingReview | None:
        """Lease and return the oldest deliverable request."""
        with self._lock:
            now = self.clock()
            for request_id in self._order:
                item = self._items[request_id]
                if item.decision is not None:
                    continue
                if item.lease_expiry is None or item.lease_expiry <= now:
                    item.lease_expiry = now + self.lease_ttl
                    return item
            return None

    def submit(self, request_id: str, decision: str) -> str:
        """Returns one of: recorded, duplicate, conflict, unknown."""
        with self._lock:
            item = self._items.get(request_id)
            if item is None:
                return "unknown"
            if item.decision is not None:
                return "duplicate" if item.decision == decision else "conflict"
            item.decision = decision
            item.event.set()
            return "recorded"

    def open_count(self) -> int:
        with self._lock:
            return sum(1 for item in self._items.values() if item.decision is None)


@dataclass
class RegisteredDataset:
    dataset_id: str
    dataset: Dataset
    truth: dict[str, str] | None
    rejected_lines: int


class ManagedRun:
    """One clustering run: funnel, engine thread, queue, and counters."""

    def __init__(
        self,
        run_id: str,
        registered: RegisteredDataset,
        filter_config: FilterConfig,
        lca_config: LcaConfig,
        oracle_params: dict,
        mode: str,
        lease_ttl: float,
        clock,
        db_dir: Path | None = None,
    ):
        self.run_id = run_id
        self.registered = registered
        self.filter_config = filter_config
        self.lca_config = lca_config
        self.mode = mode
        self.db_dir = db_dir
        self.lock = threading.RLock()
        self.version = 0
        self.status = "filtering"
        self.error: str | None = None
        self.review_log: list[dict] = []
        self.funnel = None
        self.final_annotations: list[Annotation] = []
        self.engine: LcaEngine | None = None
        self.result = None
        self.queue = ReviewQueue(lease_ttl=lease_ttl, clock=clock) if mode == "interactive" else None

        truth = registered.truth or {}
        params = dict(oracle_params)
        params.setdefault("seed", lca_config.seed)
        self.model = SimOracleModel(truth=truth, **params)
        self.thread = threading.Thread(target=self._drive, name=f"run-{run_id}", daemon=True)

    def start(self) -> None:
        self.thread.start()

    def _bump(self) -> None:
        self.version += 1

    def _log_review(self, entry: dict) -> None:
        with self.lock:
            self.review_log.append(entry)
            self._bump()

    def _drive(self) -> None:
        try:
            final, report = run_funnel(self.registered.dataset, self.filter_config)
            with self.lock:
                self.funnel = report
                self.final_annotations = final
                self.status = "scoring"
                self._bump()

            if not final:
                with self.lock:
                    self.status = "converged"
                    self._bump()
                return

            ranker = SimRanker(self.model)
            verifier = SimVerifier(self.model)
            channel = self.queue if self.queue is not None else SimulatedHumanChannel(self.model)
            graph = init_graph(final, ranker, self.lca_config)
            engine = LcaEngine(
                graph,
                self.lca_config,
                verifier=verifier,
                review_channel=channel,
                log_writer=self._log_review,
                extra={"run_id": self.run_id, "filter_config": self.filter_config.to_dict(), "mode": self.mode},
            )
            with self.lock:
                self.engine = engine
                self._bump()
            result = engine.run()
            with self.lock:
                self.result = result
                if result.converged:
                    self.status = "converged"
                elif engine.phase == "suspended":
                    self.status = "suspended"
                else:
                    self.status = "failed"
                self._bump()
            self._persist()
        except Exception as exc:  # engine failures surface through the handle
            logger.exception("run %s failed", self.run_id)
            with self.lock:
                self.status = "failed"
                self.error = str(exc)
                self._bump()

    def _persist(self) -> None:
        if self.db_dir is None or self.engine is None:
            return
        try:
            self.db_dir.mkdir(parents=True, exist_ok=True)
            save_state(self.engine.to_state(), self.db_dir / f"run-{self.run_id}.json")
            with (self.db_dir / f"run-{self.run_id}-reviews.jsonl").open("w") as fh:
                for entry in self.review_log:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
        except OSError:
            logger.exception("failed to persist run %s", self.run_id)

    # --- snapshots -----------------------------------------------------------

    def current_status(self) -> str:
        with self.lock:
            if self.status == "scoring" and self.queue is not None and self.queue.open_count() > 0:
                return "awaiting_reviews"
            return self.status

    def clustering_snapshot(self) -> dict[str, str]:
        with self.lock:
            engine = self.engine
        if engine is None:
            return {}
        with engine.state_lock:
            return engine.graph.clustering()

    def counters(self) -> dict:
        with self.lock:
            engine = self.engine
            pending = self.queue.open_count() if self.queue is not None else 0
            if engine is None:
                return {
                    "algorithmic_reviews": 0,
                    "human_reviews": 0,
                    "total_reviews": 0,
                    "automation_rate": 1.0,
                    "pending_reviews": pending,
                }
            algo, human = engine.algorithmic_reviews, engine.human_reviews
        total = algo + human
        return {
            "algorithmic_reviews": algo,
            "human_reviews": human,
            "total_reviews": total,
            "automation_rate": (algo / total) if total else 1.0,
            "pending_reviews": pending,
        }

    def handle(self) -> dict:
        clustering = self.clustering_snapshot()
        return {
            "run_id": self.run_id,
            "status": self.current_status(),
            "state_version": self.version,
            "mode": self.mode,
            "counters": self.counters(),
            "cluster_count": len(set(clustering.values())) if clustering else 0,
            "converged": self.status == "converged",
            "error": self.error,
        }

    def close(self) -> None:
        if self.queue is not None:
            self.queue.close()


class ServiceState:
    def __init__(self, lease_ttl: float = DEFAULT_LEASE_TTL, clock=time.monotonic, db_dir: str | Path | None = None):
        self.lease_ttl = lease_ttl
        self.clock = clock
        self.db_dir = Path(db_dir) if db_dir else None
        self.datasets: dict[str, RegisteredDataset] = {}
        self.runs: dict[str, ManagedRun] = {}
        self.idempotency: dict[str, str] = {}
        self.lock = threading.Lock()

    def register_dataset(
        self, dataset: Dataset, truth: dict[str, str] | None, rejected_lines: int = 0, dataset_id: str | None = None
    ) -> RegisteredDataset:
        dataset_id = dataset_id or f"ds-{uuid.uuid4().hex[:8]}"
        registered = RegisteredDataset(dataset_id=dataset_id, dataset=dataset, truth=truth, rejected_lines=rejected_lines)
        with self.lock:
            self.datasets[dataset_id] = registered
        return registered

    def close(self) -> None:
        with self.lock:
            runs = list(self.runs.values())
        for run in runs:
            run.close()


class DatasetBody(BaseModel):
    manifest_path: str
    cameras_path: str
    truth_path: str | None = None
    dataset_id: str | None = None


class RunBody(BaseModel):
    dataset_id: str
    mode: str = Field(default="interactive", pattern="^(sim|interactive)$")
    seed: int | None = None
    filter: dict = Field(default_factory=dict)
    lca: dict = Field(default_factory=dict)
    oracle: dict = Field(default_factory=dict)
    idempotency_key: str | None = None


class DecisionBody(BaseModel):
    decision: str


def annotation_card(annotation: Annotation) -> dict:
    return {
        "annotation_id": annotation.annotation_id,
        "camera_id": annotation.camera_id,
        "timestamp": format_utc_timestamp(annotation.timestamp),
        "viewpoint": annotation.viewpoint.value,
        "species": annotation.species.value,
        "ca_score": annotation.ca_score,
        "crop_uri": annotation.crop_uri,
    }


def create_app(state: ServiceState | None = None) -> FastAPI:
    state = state or ServiceState()
    app = FastAPI(title="photocensus", version="0.1.0")
    app.state.service = state

    def get_run(run_id: str) -> ManagedRun:
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return run

    @app.post("/api/datasets", status_code=201)
    def register_dataset(body: DatasetBody):
        try:
            dataset, report = parse_manifest(body.manifest_path, body.cameras_path)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        truth = None
        if body.truth_path:
            truth_path = Path(body.truth_path)
            if not truth_path.is_file():
                raise HTTPException(status_code=400, detail=f"truth file not found: {truth_path}")
            truth = read_truth(truth_path)
        registered = state.register_dataset(dataset, truth, report.rejected, body.dataset_id)
        return {
            "dataset_id": registered.dataset_id,
            "annotations": len(dataset.annotations),
            "cameras": len(dataset.cameras),
            "rejected_lines": report.rejected,
        }

    @app.post("/api/runs")
    def create_run(body: RunBody, response: Response):
        if body.idempotency_key:
            existing = state.idempotency.get(body.idempotency_key)
            if existing:
                response.status_code = 200
                return state.runs[existing].handle()
        registered = state.datasets.get(body.dataset_id)
        if registered is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {body.dataset_id}")
        if registered.truth is None:
            raise HTTPException(status_code=400, detail="dataset has no ground truth; simulation oracles unavailable")
        try:
            filter_config = FilterConfig.from_dict(body.filter)
            lca_raw = dict(body.lca)
            if body.seed is not None:
                lca_raw["seed"] = body.seed
            lca_config = LcaConfig.from_dict(lca_raw)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        run_id = f"run-{uuid.uuid4().hex[:8]}"
        run = ManagedRun(
            run_id,
            registered,
            filter_config,
            lca_config,
            body.oracle,
            body.mode,
            lease_ttl=state.lease_ttl,
            clock=state.clock,
            db_dir=state.db_dir,
        )
        with state.lock:
            state.runs[run_id] = run
            if body.idempotency_key:
                state.idempotency[body.idempotency_key] = run_id
        run.start()
        response.status_code = 201
        return run.handle()

    @app.get("/api/runs/{run_id}")
    def run_handle(run_id: str):
        return get_run(run_id).handle()

    @app.get("/api/runs/{run_id}/reviews/next")
    def next_review(run_id: str):
        run = get_run(run_id)
        if run.queue is None:
            return Response(status_code=204)
        item = run.queue.next_pending()
        if item is None:
            return Response(status_code=204)
        dataset = run.registered.dataset
        return {
            "run_id": run.run_id,
            "run_status": run.current_status(),
            "state_version": run.version,
            "request_id": item.request_id,
            "attempt": item.attempt,
            "pair": [annotation_card(dataset.annotation(item.a)), annotation_card(dataset.annotation(item.b))],
            "counters": run.counters(),
        }

    @app.post("/api/runs/{run_id}/reviews/{request_id}")
    def submit_review(run_id: str, request_id: str, body: DecisionBody):
        run = get_run(run_id)
        if body.decision not in {d.value for d in Decision}:
            raise HTTPException(status_code=400, detail=f"invalid decision {body.decision!r}")
        if run.queue is None:
            raise HTTPException(status_code=404, detail="run does not accept interactive reviews")
        outcome = run.queue.submit(request_id, body.decision)
        if outcome == "unknown":
            raise HTTPException(status_code=404, detail=f"unknown review request {request_id}")
        if outcome == "conflict":
            raise HTTPException(status_code=409, detail="conflicting decision already recorded for this request")
        return {
            "run_id": run.run_id,
            "run_status": run.current_status(),
            "state_version": run.version,
            "request_id": request_id,
            "recorded": body.decision,
            "duplicate": outcome == "duplicate",
        }

    @app.get("/api/runs/{run_id}/reviews")
    def review_log(run_id: str):
        run = get_run(run_id)
        with run.lock:
            entries = list(run.review_log)
        return {
            "run_id": run.run_id,
            "run_status": run.current_status(),
            "state_version": run.version,
            "entries": entries,
        }

    @app.get("/api/runs/{run_id}/clusters")
    def clusters(run_id: str, page: int = Query(default=1, ge=1), page_size: int = Query(default=50, ge=1, le=500)):
        run = get_run(run_id)
        clustering = run.clustering_snapshot()
        members: dict[str, list[str]] = {}
        for annotation_id, cluster_id in clustering.items():
            members.setdefault(cluster_id, []).append(annotation_id)
        ordered = sorted(members)
        start = (page - 1) * page_size
        rows = [
            {"cluster_id": cid, "size": len(members[cid]), "members": sorted(members[cid])}
            for cid in ordered[start : start + page_size]
        ]
        return {
            "run_id": run.run_id,
            "run_status": run.current_status(),
            "state_version": run.version,
            "total": len(ordered),
            "page": page,
            "page_size": page_size,
            "clusters": rows,
        }

    @app.get("/api/runs/{run_id}/clusters/{cluster_id}")
    def cluster_detail(run_id: str, cluster_id: str):
        run = get_run(run_id)
        clustering = run.clustering_snapshot()
        member_ids = sorted(a for a, cid in clustering.items() if cid == cluster_id)
        if not member_ids:
            raise HTTPException(status_code=404, detail=f"unknown cluster {cluster_id}")
        dataset = run.registered.dataset
        with run.lock:
            encounters = list(run.funnel.encounters) if run.funnel is not None else []
        member_set = set(member_ids)
        cluster_encounters = [e for e in encounters if set(e.member_ids) & member_set]
        geojson = export_geojson(clustering, encounters, dataset.cameras, cluster_filter={cluster_id})
        return {
            "run_id": run.run_id,
            "run_status": run.current_status(),
            "state_version": run.version,
            "cluster_id": cluster_id,
            "members": [annotation_card(dataset.annotation(a)) for a in member_ids],
            "encounters": [e.to_record() for e in cluster_encounters],
            "cameras": sorted({e.camera_id for e in cluster_encounters}),
            "geojson": geojson,
        }

    return app
