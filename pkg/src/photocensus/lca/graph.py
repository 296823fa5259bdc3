"""The identification graph: annotation vertices, review-bearing signed edges,
and the current partition into clusters.

Cluster ids are canonical: a cluster is always labeled by its
lexicographically smallest member, so identical partitions always carry
identical labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .reviews import Pair, ReviewDecision, ReviewSource, norm_pair


@dataclass
class Edge:
    a: str
    b: str
    reviews: list[ReviewDecision] = field(default_factory=list)
    weight: int = 0

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)

    @property
    def review_count(self) -> int:
        return len(self.reviews)

    @property
    def algo_count(self) -> int:
        return sum(1 for r in self.reviews if r.source is ReviewSource.ALGORITHMIC)

    @property
    def human_count(self) -> int:
        return sum(1 for r in self.reviews if r.source is not ReviewSource.ALGORITHMIC)

    def add(self, review: ReviewDecision) -> None:
        if review.pair != self.pair:
            raise ValueError(f"review pair {review.pair} does not match edge {self.pair}")
        self.reviews.append(review)
        self.weight += review.contribution

    def recomputed_weight(self) -> int:
        return sum(r.contribution for r in self.reviews)


class IdentificationGraph:
    def __init__(self, vertices: Iterable[str]):
        self.vertices: list[str] = sorted(set(vertices))
        if not self.vertices:
            raise ValueError("graph requires at least one vertex")
        self.edges: dict[Pair, Edge] = {}
        self.vertex_edges: dict[str, list[Edge]] = {v: [] for v in self.vertices}
        # Initial partition: every annotation is its own cluster.
        self.cluster_of: dict[str, str] = {v: v for v in self.vertices}
        self.members: dict[str, frozenset[str]] = {v: frozenset([v]) for v in self.vertices}

    # --- structure -------------------------------------------------------

    def add_edge(self, a: str, b: str) -> Edge:
        pair = norm_pair(a, b)
        if pair[0] not in self.vertex_edges or pair[1] not in self.vertex_edges:
            raise KeyError(f"edge endpoints must be graph vertices: {pair}")
        edge = self.edges.get(pair)
        if edge is None:
            edge = Edge(a=pair[0], b=pair[1])
            self.edges[pair] = edge
            self.vertex_edges[pair[0]].append(edge)
            self.vertex_edges[pair[1]].append(edge)
        return edge

    def edge(self, a: str, b: str) -> Edge | None:
        return self.edges.get(norm_pair(a, b))

    def add_review(self, review: ReviewDecision) -> Edge:
        edge = self.edges.get(review.pair)
        if edge is None:
            edge = self.add_edge(*review.pair)
        edge.add(review)
        return edge

    # --- partition -------------------------------------------------------

    def clustering(self) -> dict[str, str]:
        return dict(self.cluster_of)

    def cluster_ids(self) -> list[str]:
        return sorted(self.members)

    def set_partition(self, parts: Iterable[Iterable[str]]) -> None:
        """Replace the whole partition; parts must cover every vertex exactly once."""
        members: dict[str, frozenset[str]] = {}
        cluster_of: dict[str, str] = {}
        for part in parts:
            part = frozenset(part)
            if not part:
                raise ValueError("empty cluster not allowed")
            cid = min(part)
            members[cid] = part
            for v in part:
                if v in cluster_of:
                    raise ValueError(f"vertex {v} assigned to two clusters")
                cluster_of[v] = cid
        if set(cluster_of) != set(self.vertices):
            raise ValueError("partition must cover exactly the vertex set")
        self.members = members
        self.cluster_of = cluster_of

    def apply_local(self, old_cids: set[str], new_parts: list[frozenset[str]]) -> list[str]:
        """Re-partition the vertices of old_cids into new_parts, in place."""
        covered: set[str] = set()
        for cid in old_cids:
            covered |= self.members[cid]
        replaced = set().union(*new_parts) if new_parts else set()
        if covered != replaced:
            raise ValueError("local re-partition must cover exactly the affected vertices")
        for cid in old_cids:
            del self.members[cid]
        new_cids = []
        for part in new_parts:
            cid = min(part)
            self.members[cid] = part
            for v in part:
                self.cluster_of[v] = cid
            new_cids.append(cid)
        return new_cids

    # --- scoring ---------------------------------------------------------

    def intra_weight(self, u: str, others: frozenset[str]) -> int:
        """Sum of edge weights from u into the given vertex set (u excluded)."""
        total = 0
        for e in self.vertex_edges[u]:
            other = e.b if e.a == u else e.a
            if other in others:
                total += e.weight
        return total

    def cross_weight(self, side_a: frozenset[str], side_b: frozenset[str]) -> int:
        small, other = (side_a, side_b) if len(side_a) <= len(side_b) else (side_b, side_a)
        total = 0
        for u in small:
            for e in self.vertex_edges[u]:
                v = e.b if e.a == u else e.a
                if v in other:
                    total += e.weight
        return total

    def edges_between(self, side_a: frozenset[str], side_b: frozenset[str]) -> list[Edge]:
        small, other = (side_a, side_b) if len(side_a) <= len(side_b) else (side_b, side_a)
        found = []
        for u in sorted(small):
            for e in self.vertex_edges[u]:
                v = e.b if e.a == u else e.a
                if v in other:
                    found.append(e)
        return sorted(found, key=lambda e: e.pair)


def clustering_score(graph: IdentificationGraph, clustering: dict[str, str] | None = None) -> int:
    """Sum of intra-cluster weights minus sum of inter-cluster weights."""
    if clustering is None:
        clustering = graph.cluster_of
    else:
        missing = [v for v in graph.vertices if v not in clustering]
        if missing:
            raise ValueError(f"clustering does not cover vertices: {missing[:5]}")
    score = 0
    for edge in graph.edges.values():
        if clustering[edge.a] == clustering[edge.b]:
            score += edge.weight
        else:
            score -= edge.weight
    return score
