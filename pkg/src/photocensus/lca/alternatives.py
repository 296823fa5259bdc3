"""Local clusterings and their alternative re-partitions.

A local clustering is a single cluster or a pair of clusters joined by at
least one edge. Alternatives for a single cluster are 2-way splits
(exhaustive up to size 8, greedy above); for a pair they are the merge and
all single-vertex transfers. Every alternative carries an exact integer
score delta relative to the current partition, computed on the induced
subgraph only (edges to outside vertices never change side).
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import IdentificationGraph
from .reviews import Pair

EXHAUSTIVE_SPLIT_LIMIT = 8

# ("s", cluster_id) or ("p", low_cluster_id, high_cluster_id)
LocalKey = tuple


def single_key(cid: str) -> LocalKey:
    return ("s", cid)


def pair_key(cid1: str, cid2: str) -> LocalKey:
    lo, hi = sorted((cid1, cid2))
    return ("p", lo, hi)


@dataclass(frozen=True)
class Alternative:
    """A re-partition of a local clustering's vertex set."""

    parts: tuple[tuple[str, ...], ...]
    score_delta: int
    kind: str

    def part_sets(self) -> list[frozenset[str]]:
        return [frozenset(p) for p in self.parts]


def _make_alternative(parts: list[frozenset[str]], delta: int, kind: str) -> Alternative:
    ordered = tuple(sorted(tuple(sorted(p)) for p in parts))
    return Alternative(parts=ordered, score_delta=delta, kind=kind)


def _split_alternatives(graph: IdentificationGraph, cid: str) -> list[Alternative]:
    members = sorted(graph.members[cid])
    s = len(members)
    if s == 1:
        return []
    if s <= EXHAUSTIVE_SPLIT_LIMIT:
        alts = []
        rest = members[1:]
        # Fix the first member on side A so each unordered split appears once.
        for mask in range(1, 1 << len(rest)):
            side_b = frozenset(rest[i] for i in range(len(rest)) if mask >> i & 1)
            side_a = frozenset(m for m in members if m not in side_b)
            delta = -2 * graph.cross_weight(side_a, side_b)
            alts.append(_make_alternative([side_a, side_b], delta, "split"))
        return alts
    split = _greedy_split(graph, cid)
    return [split] if split is not None else []


def _greedy_split(graph: IdentificationGraph, cid: str) -> Alternative | None:
    """Bipartition seeded at the weakest intra-cluster edge, improved by
    single-vertex moves until no move lowers the crossing weight."""
    members = graph.members[cid]
    intra = [
        e
        for v in members
        for e in graph.vertex_edges[v]
        if e.a in members and e.b in members and e.a == v
    ]
    ordered = sorted(members)
    if not intra:
        side_a = frozenset([ordered[0]])
        side_b = frozenset(ordered[1:])
        return _make_alternative([side_a, side_b], 0, "split")

    seed = min(intra, key=lambda e: (e.weight, e.pair))
    side_a, side_b = {seed.a}, {seed.b}
    for v in ordered:
        if v in side_a or v in side_b:
            continue
        att_a = graph.intra_weight(v, frozenset(side_a))
        att_b = graph.intra_weight(v, frozenset(side_b))
        (side_a if att_a >= att_b else side_b).add(v)

    crossing = graph.cross_weight(frozenset(side_a), frozenset(side_b))
    while True:
        best_gain, best_vertex = 0, None
        for v in ordered:
            here, there = (side_a, side_b) if v in side_a else (side_b, side_a)
            if len(here) == 1:
                continue
            att_here = graph.intra_weight(v, frozenset(here) - {v})
            att_there = graph.intra_weight(v, frozenset(there))
            gain = att_there - att_here  # crossing reduction when moved
            if gain > best_gain:
                best_gain, best_vertex = gain, v
        if best_vertex is None:
            break
        if best_vertex in side_a:
            side_a.remove(best_vertex)
            side_b.add(best_vertex)
        else:
            side_b.remove(best_vertex)
            side_a.add(best_vertex)
        crossing -= best_gain
    return _make_alternative([frozenset(side_a), frozenset(side_b)], -2 * crossing, "split")


def _pair_alternatives(graph: IdentificationGraph, cid1: str, cid2: str) -> list[Alternative]:
    a_members = graph.members[cid1]
    b_members = graph.members[cid2]
    connecting = graph.cross_weight(a_members, b_members)
    alts = [_make_alternative([a_members | b_members], 2 * connecting, "merge")]

    for v in sorted(a_members):
        if len(a_members) == 1:
            break  # moving the only vertex duplicates the merge
        delta = 2 * (graph.intra_weight(v, b_members) - graph.intra_weight(v, a_members - {v}))
        alts.append(_make_alternative([a_members - {v}, b_members | {v}], delta, "transfer"))
    for v in sorted(b_members):
        if len(b_members) == 1:
            break
        delta = 2 * (graph.intra_weight(v, a_members) - graph.intra_weight(v, b_members - {v}))
        alts.append(_make_alternative([b_members - {v}, a_members | {v}], delta, "transfer"))
    return alts


def enumerate_alternatives(graph: IdentificationGraph, key: LocalKey) -> list[Alternative]:
    if key[0] == "s":
        return _split_alternatives(graph, key[1])
    if key[0] == "p":
        _, cid1, cid2 = key
        if not graph.edges_between(graph.members[cid1], graph.members[cid2]):
            raise ValueError(f"cluster pair {cid1}/{cid2} has no connecting edge")
        return _pair_alternatives(graph, cid1, cid2)
    raise ValueError(f"unknown local clustering key {key!r}")


def best_alternative(graph: IdentificationGraph, key: LocalKey) -> Alternative | None:
    """Highest-delta alternative; ties resolved by enumeration order."""
    best = None
    for alt in enumerate_alternatives(graph, key):
        if best is None or alt.score_delta > best.score_delta:
            best = alt
    return best


def decisive_pairs(graph: IdentificationGraph, key: LocalKey, alt: Alternative) -> list[Pair]:
    """Existing edges whose intra/inter status differs between the current
    partition and the alternative, ordered by pair."""
    if key[0] == "s":
        local_vertices = graph.members[key[1]]
    else:
        local_vertices = graph.members[key[1]] | graph.members[key[2]]

    alt_cluster: dict[str, int] = {}
    for idx, part in enumerate(alt.parts):
        for v in part:
            alt_cluster[v] = idx

    pairs: list[Pair] = []
    seen: set[Pair] = set()
    for v in sorted(local_vertices):
        for e in graph.vertex_edges[v]:
            if e.pair in seen:
                continue
            if e.a not in local_vertices or e.b not in local_vertices:
                continue
            seen.add(e.pair)
            now_same = graph.cluster_of[e.a] == graph.cluster_of[e.b]
            alt_same = alt_cluster[e.a] == alt_cluster[e.b]
            if now_same != alt_same:
                pairs.append(e.pair)
    return sorted(pairs)
