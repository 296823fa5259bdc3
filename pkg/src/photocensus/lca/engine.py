"""Decision-management engine: graph init, edge weighting, the scoring
phase (local search to a local optimum), and the stability phase (margin-
driven verifier-then-human review solicitation).

The engine is a deterministic, resumable state machine: identical inputs,
seeds, and review answers reproduce the identical review log and final
clustering, and a run snapshotted at any review boundary resumes to the
same result.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .alternatives import (
    Alternative,
    LocalKey,
    best_alternative,
    decisive_pairs,
    enumerate_alternatives,
)
from .graph import Edge, IdentificationGraph, clustering_score
from .reviews import (
    Decision,
    Pair,
    ReviewDecision,
    ReviewSource,
    algorithmic_review,
    human_review,
)

logger = logging.getLogger(__name__)


class Ranker(Protocol):
    def top_k(self, query: str, candidates: Sequence[str], k: int) -> list[tuple[str, float]]: ...


class Verifier(Protocol):
    def verify(self, a: str, b: str, attempt: int = 1) -> tuple[Decision, float]: ...


class ReviewChannel(Protocol):
    def request(self, a: str, b: str, attempt: int) -> tuple[Decision, ReviewSource] | None: ...


@dataclass(frozen=True)
class LcaConfig:
    top_k: int = 5
    human_weight: int = 300
    stability_margin: int = 300
    max_algo_reviews_per_pair: int = 2
    max_human_reviews_per_pair: int = 2
    max_iterations: int = 1_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("top_k", "human_weight", "stability_margin", "max_algo_reviews_per_pair",
                     "max_human_reviews_per_pair", "max_iterations"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.stability_margin > 2 * self.human_weight:
            raise ValueError("stability_margin must not exceed twice the human weight")

    def to_dict(self) -> dict:
        return {
            "top_k": self.top_k,
            "human_weight": self.human_weight,
            "stability_margin": self.stability_margin,
            "max_algo_reviews_per_pair": self.max_algo_reviews_per_pair,
            "max_human_reviews_per_pair": self.max_human_reviews_per_pair,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> LcaConfig:
        known = {k: raw[k] for k in cls.__dataclass_fields__ if k in raw}
        return cls(**known)


@dataclass
class RunResult:
    clustering: dict[str, str]
    algorithmic_reviews: int
    human_reviews: int
    converged: bool
    trace: list[dict] = field(default_factory=list)
    state_kind = "run_result"

    @property
    def total_reviews(self) -> int:
        return self.algorithmic_reviews + self.human_reviews

    @property
    def automation_rate(self) -> float:
        if self.total_reviews == 0:
            return 1.0
        return self.algorithmic_reviews / self.total_reviews

    @property
    def cluster_count(self) -> int:
        return len(set(self.clustering.values()))

    def to_payload(self) -> dict:
        return {
            "clustering": self.clustering,
            "algorithmic_reviews": self.algorithmic_reviews,
            "human_reviews": self.human_reviews,
            "total_reviews": self.total_reviews,
            "automation_rate": self.automation_rate,
            "cluster_count": self.cluster_count,
            "converged": self.converged,
            "trace": self.trace,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> RunResult:
        return cls(
            clustering=dict(payload["clustering"]),
            algorithmic_reviews=payload["algorithmic_reviews"],
            human_reviews=payload["human_reviews"],
            converged=payload["converged"],
            trace=list(payload.get("trace", [])),
        )


@dataclass
class RunState:
    """Serializable engine snapshot; resume-equivalent to the live engine."""

    config: dict
    vertices: list[str]
    edges: list[dict]
    cluster_of: dict[str, str]
    phase: str
    algorithmic_reviews: int
    human_reviews: int
    moves: int
    review_log: list[dict]
    trace: list[dict]
    extra: dict = field(default_factory=dict)
    state_kind = "run_state"

    def to_payload(self) -> dict:
        return {
            "config": self.config,
            "vertices": self.vertices,
            "edges": self.edges,
            "cluster_of": self.cluster_of,
            "phase": self.phase,
            "algorithmic_reviews": self.algorithmic_reviews,
            "human_reviews": self.human_reviews,
            "moves": self.moves,
            "review_log": self.review_log,
            "trace": self.trace,
            "extra": self.extra,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> RunState:
        return cls(
            config=dict(payload["config"]),
            vertices=list(payload["vertices"]),
            edges=list(payload["edges"]),
            cluster_of=dict(payload["cluster_of"]),
            phase=payload["phase"],
            algorithmic_reviews=payload["algorithmic_reviews"],
            human_reviews=payload["human_reviews"],
            moves=payload["moves"],
            review_log=list(payload["review_log"]),
            trace=list(payload["trace"]),
            extra=dict(payload.get("extra", {})),
        )


def init_graph(annots: Sequence, ranker: Ranker, config: LcaConfig) -> IdentificationGraph:
    """One singleton cluster per annotation; edges to each annotation's
    top-k ranker candidates, deduplicated and undirected, with no reviews."""
    ids = [getattr(a, "annotation_id", a) for a in annots]
    if not ids:
        raise ValueError("init_graph requires at least one annotation")
    graph = IdentificationGraph(ids)
    for query in graph.vertices:
        candidates = [v for v in graph.vertices if v != query]
        if not candidates:
            continue
        try:
            ranked = ranker.top_k(query, candidates, config.top_k)
        except Exception:
            logger.warning("ranker failed for query %s; it contributes no edges", query, exc_info=True)
            continue
        for candidate, _score in ranked:
            graph.add_edge(query, candidate)
    return graph


def weight_edges(graph: IdentificationGraph, verifier: Verifier, config: LcaConfig) -> IdentificationGraph:
    """Give every zero-review edge one algorithmic review, in pair order."""
    for pair in sorted(graph.edges):
        edge = graph.edges[pair]
        if edge.review_count > 0:
            continue
        decision, confidence = verifier.verify(pair[0], pair[1], attempt=1)
        edge.add(algorithmic_review(pair[0], pair[1], decision, confidence))
    return graph


class LcaEngine:
    """Single logical writer over the identification graph."""

    def __init__(
        self,
        graph: IdentificationGraph,
        config: LcaConfig,
        verifier: Verifier | None = None,
        review_channel: ReviewChannel | None = None,
        log_writer=None,
        extra: dict | None = None,
    ):
        self.graph = graph
        self.config = config
        self.verifier = verifier
        self.review_channel = review_channel
        self.log_writer = log_writer
        self.extra = extra or {}
        # Guards partition/weight mutations so concurrent readers (the API)
        # always see a consistent snapshot; the engine is the only writer.
        self.state_lock = threading.RLock()
        self.phase = "weighting"
        self.algorithmic_reviews = 0
        self.human_reviews = 0
        self.moves = 0
        self.review_log: list[dict] = []
        self.trace: list[dict] = []
        self._overflow = False
        self._best_cache: dict[LocalKey, Alternative | None] = {}
        self._adj: dict[str, dict[str, int]] = {}
        self._rebuild_adjacency()
        self._score = clustering_score(graph)

    # --- bookkeeping -------------------------------------------------------

    def _rebuild_adjacency(self) -> None:
        self._adj = {cid: {} for cid in self.graph.members}
        for edge in self.graph.edges.values():
            cu = self.graph.cluster_of[edge.a]
            cv = self.graph.cluster_of[edge.b]
            if cu != cv:
                self._adj[cu][cv] = self._adj[cu].get(cv, 0) + 1
                self._adj[cv][cu] = self._adj[cv].get(cu, 0) + 1

    def _all_keys(self) -> Iterable[LocalKey]:
        for cid in sorted(self.graph.members):
            yield ("s", cid)
        for cid in sorted(self._adj):
            for other in sorted(self._adj[cid]):
                if cid < other:
                    yield ("p", cid, other)

    def _get_best(self, key: LocalKey) -> Alternative | None:
        if key in self._best_cache:
            return self._best_cache[key]
        alt = best_alternative(self.graph, key)
        self._best_cache[key] = alt
        return alt

    def _invalidate_cluster(self, cid: str) -> None:
        self._best_cache.pop(("s", cid), None)
        stale = [k for k in self._best_cache if k[0] == "p" and cid in (k[1], k[2])]
        for k in stale:
            del self._best_cache[k]

    def _append_log(self, entry: dict) -> None:
        entry = {"seq": len(self.review_log), **entry}
        self.review_log.append(entry)
        if self.log_writer is not None:
            self.log_writer(entry)

    def _record_review(self, edge: Edge, review: ReviewDecision) -> None:
        max_reviews = self.config.max_algo_reviews_per_pair + self.config.max_human_reviews_per_pair
        if edge.review_count >= max_reviews:
            raise RuntimeError(f"edge {edge.pair} already at its review cap")
        with self.state_lock:
            edge.add(review)
            if review.source is ReviewSource.ALGORITHMIC:
                self.algorithmic_reviews += 1
            else:
                self.human_reviews += 1
            cu = self.graph.cluster_of[edge.a]
            cv = self.graph.cluster_of[edge.b]
            self._score += review.contribution if cu == cv else -review.contribution
            if cu == cv:
                self._invalidate_cluster(cu)
            else:
                self._best_cache.pop(("p", *sorted((cu, cv))), None)
        self._append_log({"kind": "review", "phase": self.phase, **review.to_record()})

    # --- phases ------------------------------------------------------------

    def _weighting_pass(self, budget: list) -> str:
        if any(e.review_count == 0 for e in self.graph.edges.values()):
            if self.verifier is None:
                raise RuntimeError("weighting requires a verifier")
        for pair in sorted(self.graph.edges):
            edge = self.graph.edges[pair]
            if edge.review_count > 0:
                continue
            if budget[0] is not None and budget[0] <= 0:
                return "stopped"
            decision, confidence = self.verifier.verify(pair[0], pair[1], attempt=1)
            self._record_review(edge, algorithmic_review(pair[0], pair[1], decision, confidence))
            if budget[0] is not None:
                budget[0] -= 1
        return "done"

    def _scoring_pass(self) -> None:
        """Apply the best positive-delta alternative until none remains."""
        while True:
            if self.moves >= self.config.max_iterations:
                self._overflow = True
                return
            best: tuple[int, LocalKey, Alternative] | None = None
            for key in self._all_keys():
                alt = self._get_best(key)
                if alt is None or alt.score_delta <= 0:
                    continue
                if best is None or alt.score_delta > best[0] or (
                    alt.score_delta == best[0] and key < best[1]
                ):
                    best = (alt.score_delta, key, alt)
            if best is None:
                return
            self._apply_alternative(best[1], best[2])

    def _apply_alternative(self, key: LocalKey, alt: Alternative) -> None:
        old_cids = {key[1]} if key[0] == "s" else {key[1], key[2]}
        new_parts = alt.part_sets()
        affected = frozenset().union(*new_parts)
        with self.state_lock:
            new_cids = self.graph.apply_local(old_cids, new_parts)
        self._score += alt.score_delta
        self.moves += 1

        for cid in old_cids:
            row = self._adj.pop(cid, {})
            for nb in row:
                if nb in self._adj:
                    self._adj[nb].pop(cid, None)
        for cid in new_cids:
            self._adj.setdefault(cid, {})
        seen: set[Pair] = set()
        for v in affected:
            for e in self.graph.vertex_edges[v]:
                if e.pair in seen:
                    continue
                seen.add(e.pair)
                cu = self.graph.cluster_of[e.a]
                cv = self.graph.cluster_of[e.b]
                if cu != cv:
                    self._adj.setdefault(cu, {})[cv] = self._adj[cu].get(cv, 0) + 1
                    self._adj.setdefault(cv, {})[cu] = self._adj[cv].get(cu, 0) + 1

        for cid in old_cids | set(new_cids):
            self._invalidate_cluster(cid)
        self.trace.append(
            {
                "event": "move",
                "kind": alt.kind,
                "key": list(key),
                "delta": alt.score_delta,
                "score": self._score,
            }
        )

    def _reviewable(self, pair: Pair) -> bool:
        edge = self.graph.edges[pair]
        return (
            edge.algo_count < self.config.max_algo_reviews_per_pair
            or edge.human_count < self.config.max_human_reviews_per_pair
        )

    def _next_review_target(self) -> tuple[int, LocalKey, Pair] | None:
        """Lowest-margin local clustering below the stability margin that
        still has a reviewable decisive pair; within it, the fewest-reviews
        decisive edge."""
        best: tuple[int, LocalKey, Pair] | None = None
        for key in self._all_keys():
            alt = self._get_best(key)
            if alt is None:
                continue
            margin = -alt.score_delta
            if margin >= self.config.stability_margin:
                continue
            candidates = [p for p in decisive_pairs(self.graph, key, alt) if self._reviewable(p)]
            if not candidates:
                continue  # exhausted: stable by review-cap exhaustion
            pair = min(candidates, key=lambda p: (self.graph.edges[p].review_count, p))
            if best is None or margin < best[0] or (margin == best[0] and key < best[1]):
                best = (margin, key, pair)
        return best

    def _stability_pass(self, budget: list) -> str:
        while True:
            self._scoring_pass()
            if self._overflow:
                return "overflow"
            target = self._next_review_target()
            if target is None:
                return "converged"
            if budget[0] is not None and budget[0] <= 0:
                return "stopped"
            margin, key, pair = target
            edge = self.graph.edges[pair]
            if edge.algo_count < self.config.max_algo_reviews_per_pair:
                decision, confidence = self.verifier.verify(pair[0], pair[1], attempt=edge.algo_count + 1)
                review = algorithmic_review(pair[0], pair[1], decision, confidence)
            else:
                response = self.review_channel.request(pair[0], pair[1], edge.human_count + 1)
                if response is None:
                    return "suspended"
                decision, source = response
                review = human_review(pair[0], pair[1], decision, self.config.human_weight, source)
            self._record_review(edge, review)
            if budget[0] is not None:
                budget[0] -= 1

    # --- driving -----------------------------------------------------------

    def run(self, max_new_reviews: int | None = None) -> RunResult:
        """Advance the run until convergence, suspension, or the review budget
        is spent. Safe to call repeatedly."""
        if not self.review_log:
            self._append_log(
                {
                    "kind": "run_header",
                    "n_vertices": len(self.graph.vertices),
                    "n_edges": len(self.graph.edges),
                    "config": self.config.to_dict(),
                }
            )
        budget = [max_new_reviews]
        if self.phase != "converged":
            self.phase = "weighting"
            status = self._weighting_pass(budget)
            if status == "stopped":
                return self.result()
            self.phase = "stability"
            status = self._stability_pass(budget)
            if status == "converged":
                self.phase = "converged"
                self.trace.append({"event": "converged", "score": self._score})
            elif status == "suspended":
                self.phase = "suspended"
        return self.result()

    def result(self) -> RunResult:
        return RunResult(
            clustering=self.graph.clustering(),
            algorithmic_reviews=self.algorithmic_reviews,
            human_reviews=self.human_reviews,
            converged=self.phase == "converged" and not self._overflow,
            trace=list(self.trace),
        )

    def certificate(self) -> dict:
        """Fresh, cache-free audit of the convergence conditions."""
        positive: list[LocalKey] = []
        unstable: list[LocalKey] = []
        for key in self._all_keys():
            alts = enumerate_alternatives(self.graph, key)
            if not alts:
                continue
            best = max(a.score_delta for a in alts)
            if best > 0:
                positive.append(key)
            best_alt = best_alternative(self.graph, key)
            margin = -best_alt.score_delta
            if margin < self.config.stability_margin:
                if any(self._reviewable(p) for p in decisive_pairs(self.graph, key, best_alt)):
                    unstable.append(key)
        return {
            "no_positive_delta": not positive,
            "all_margins_ok": not unstable,
            "positive_keys": positive,
            "unstable_keys": unstable,
        }

    # --- persistence ---------------------------------------------------------

    def to_state(self) -> RunState:
        edges = [
            {"a": e.a, "b": e.b, "reviews": [r.to_record() for r in e.reviews]}
            for _, e in sorted(self.graph.edges.items())
        ]
        return RunState(
            config=self.config.to_dict(),
            vertices=list(self.graph.vertices),
            edges=edges,
            cluster_of=self.graph.clustering(),
            phase=self.phase,
            algorithmic_reviews=self.algorithmic_reviews,
            human_reviews=self.human_reviews,
            moves=self.moves,
            review_log=list(self.review_log),
            trace=list(self.trace),
            extra=dict(self.extra),
        )

    @classmethod
    def from_state(
        cls,
        state: RunState,
        verifier: Verifier | None = None,
        review_channel: ReviewChannel | None = None,
        log_writer=None,
    ) -> LcaEngine:
        graph = IdentificationGraph(state.vertices)
        for rec in state.edges:
            edge = graph.add_edge(rec["a"], rec["b"])
            for review_rec in rec["reviews"]:
                edge.add(ReviewDecision.from_record(review_rec))
        parts: dict[str, set[str]] = {}
        for vertex, cid in state.cluster_of.items():
            parts.setdefault(cid, set()).add(vertex)
        graph.set_partition(parts.values())

        engine = cls(
            graph,
            LcaConfig.from_dict(state.config),
            verifier=verifier,
            review_channel=review_channel,
            log_writer=log_writer,
            extra=dict(state.extra),
        )
        engine.phase = state.phase
        engine.algorithmic_reviews = state.algorithmic_reviews
        engine.human_reviews = state.human_reviews
        engine.moves = state.moves
        engine.review_log = list(state.review_log)
        engine.trace = list(state.trace)
        return engine


def scoring_phase(graph: IdentificationGraph, config: LcaConfig) -> dict[str, str]:
    """Local search to local optimality; returns the resulting clustering."""
    engine = LcaEngine(graph, config)
    engine._scoring_pass()
    return graph.clustering()


def stability_phase(
    graph: IdentificationGraph,
    verifier: Verifier,
    review_channel: ReviewChannel,
    config: LcaConfig,
    log_writer=None,
) -> RunResult:
    engine = LcaEngine(graph, config, verifier=verifier, review_channel=review_channel, log_writer=log_writer)
    return engine.run()


def run_lca(
    annots: Sequence,
    ranker: Ranker,
    verifier: Verifier,
    review_channel: ReviewChannel,
    config: LcaConfig,
    log_writer=None,
) -> RunResult:
    """Full pipeline: init -> weight -> scoring -> stability."""
    graph = init_graph(annots, ranker, config)
    engine = LcaEngine(graph, config, verifier=verifier, review_channel=review_channel, log_writer=log_writer)
    return engine.run()
