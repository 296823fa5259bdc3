from __future__ import annotations

import random
from itertools import combinations

import pytest

import oracles
from photocensus.lca import (
    Decision,
    IdentificationGraph,
    algorithmic_review,
    best_alternative,
    clustering_score,
    decisive_pairs,
    enumerate_alternatives,
    pair_key,
    single_key,
)


def weighted_graph(weights, vertices=None):
    vertices = vertices or sorted({v for pair in weights for v in pair})
    graph = IdentificationGraph(vertices)
    for (a, b), w in weights.items():
        edge = graph.add_edge(a, b)
        edge.reviews.append(algorithmic_review(a, b, Decision.SAME if w >= 0 else Decision.DIFFERENT, 0.5))
        edge.weight = w
    return graph


def apply_assignment(graph, alt):
    """Score the alternative's partition globally, via an exact recompute."""
    assignment = dict(graph.cluster_of)
    for idx, part in enumerate(alt.parts):
        for v in part:
            assignment[v] = f"alt{idx}"
    return clustering_score(graph, assignment)


def test_singleton_cluster_has_no_alternatives():
    graph = IdentificationGraph(["a", "b"])
    assert enumerate_alternatives(graph, single_key("a")) == []


def test_merge_of_singletons_doubles_edge_weight():
    graph = weighted_graph({("a", "b"): 10})
    alts = enumerate_alternatives(graph, pair_key("a", "b"))
    assert len(alts) == 1
    assert alts[0].kind == "merge"
    assert alts[0].score_delta == 20


def test_pair_key_requires_connecting_edge():
    graph = IdentificationGraph(["a", "b", "c"])
    graph.add_edge("a", "b")
    with pytest.raises(ValueError):
        enumerate_alternatives(graph, pair_key("a", "c"))


def random_weighted_graph(rng, n, edge_prob=0.8):
    vertices = [f"v{i}" for i in range(n)]
    weights = {}
    for a, b in combinations(vertices, 2):
        if rng.random() < edge_prob:
            weights[(a, b)] = rng.randint(-100, 100)
    return weighted_graph(weights, vertices), weights


def test_every_alternative_delta_is_exact():
    """score_delta must equal the global score difference, for every kind."""
    rng = random.Random(99)
    for _ in range(30):
        n = rng.randint(3, 8)
        graph, _ = random_weighted_graph(rng, n)
        parts = []
        vertices = graph.vertices[:]
        rng.shuffle(vertices)
        split_at = rng.randint(1, n - 1)
        parts = [set(vertices[:split_at]), set(vertices[split_at:])]
        graph.set_partition(parts)
        base = clustering_score(graph)
        keys = [single_key(cid) for cid in graph.cluster_ids()]
        cids = graph.cluster_ids()
        if len(cids) == 2 and graph.edges_between(graph.members[cids[0]], graph.members[cids[1]]):
            keys.append(pair_key(*cids))
        for key in keys:
            if key[0] == "p":
                pass
            for alt in enumerate_alternatives(graph, key):
                assert apply_assignment(graph, alt) - base == alt.score_delta, (key, alt)


def test_exhaustive_split_matches_brute_force():
    rng = random.Random(7)
    for _ in range(25):
        n = rng.randint(2, 8)
        graph, weights = random_weighted_graph(rng, n)
        graph.set_partition([set(graph.vertices)])
        base = clustering_score(graph)
        best = best_alternative(graph, single_key(graph.cluster_ids()[0]))
        # brute force over all 2-way splits
        vertices = graph.vertices
        best_brute = None
        for mask in range(1, 2 ** (n - 1)):
            side_a = {vertices[0]}
            side_b = set()
            for i, v in enumerate(vertices[1:]):
                (side_a if not mask >> i & 1 else side_b).add(v)
            if not side_b:
                continue
            assignment = {v: ("A" if v in side_a else "B") for v in vertices}
            delta = oracles.brute_score(weights, assignment) - base
            if best_brute is None or delta > best_brute:
                best_brute = delta
        assert best.score_delta == best_brute


def test_greedy_split_used_above_exhaustive_limit():
    rng = random.Random(21)
    graph, weights = random_weighted_graph(rng, 12, edge_prob=0.6)
    graph.set_partition([set(graph.vertices)])
    alts = enumerate_alternatives(graph, single_key(graph.cluster_ids()[0]))
    assert len(alts) == 1
    base = clustering_score(graph)
    assert apply_assignment(graph, alts[0]) - base == alts[0].score_delta


def test_merge_delta_identity():
    """Merging clusters A and B changes the score by exactly twice the sum of
    connecting edge weights."""
    rng = random.Random(33)
    for _ in range(20):
        n = rng.randint(4, 8)
        graph, weights = random_weighted_graph(rng, n)
        vertices = graph.vertices[:]
        rng.shuffle(vertices)
        cut = rng.randint(1, n - 1)
        side_a, side_b = set(vertices[:cut]), set(vertices[cut:])
        graph.set_partition([side_a, side_b])
        connecting = sum(
            w for (a, b), w in weights.items() if (a in side_a) != (b in side_a)
        )
        cids = graph.cluster_ids()
        if not graph.edges_between(graph.members[cids[0]], graph.members[cids[1]]):
            continue
        merge = [a for a in enumerate_alternatives(graph, pair_key(*cids)) if a.kind == "merge"][0]
        assert merge.score_delta == 2 * connecting


def test_decisive_pairs_are_the_flipped_edges():
    graph = weighted_graph(
        {("a", "b"): 50, ("a", "c"): 30, ("b", "c"): -10, ("c", "d"): 5}
    )
    graph.set_partition([{"a", "b", "c"}, {"d"}])
    key = single_key("a")
    for alt in enumerate_alternatives(graph, key):
        flipped = decisive_pairs(graph, key, alt)
        side = {v: idx for idx, part in enumerate(alt.parts) for v in part}
        expected = []
        for pair in [("a", "b"), ("a", "c"), ("b", "c")]:
            if side[pair[0]] != side[pair[1]]:
                expected.append(pair)
        assert flipped == sorted(expected)
    # pair local clustering: transfers flip edges on both sides
    key = pair_key("a", "d")
    merge = [a for a in enumerate_alternatives(graph, key) if a.kind == "merge"][0]
    assert decisive_pairs(graph, key, merge) == [("c", "d")]
