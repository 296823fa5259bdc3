from __future__ import annotations

import logging
import random

import pytest

import oracles
from photocensus.lca import (
    Decision,
    IdentificationGraph,
    LcaConfig,
    LcaEngine,
    ReviewSource,
    algorithmic_review,
    clustering_score,
    init_graph,
    run_lca,
    scoring_phase,
    stability_phase,
    weight_edges,
)
from photocensus.matchers import SimOracleModel, SimRanker, SimVerifier, SimulatedHumanChannel
from photocensus.simulate import evaluate, planted_population
from photocensus.state import load_state, save_state


class TruthVerifier:
    """Deterministic noiseless verifier with optional adversarial overrides."""

    def __init__(self, truth, same_conf=0.95, diff_conf=0.05, overrides=None):
        self.truth = truth
        self.same_conf = same_conf
        self.diff_conf = diff_conf
        self.overrides = overrides or {}

    def verify(self, a, b, attempt=1):
        pair = tuple(sorted((a, b)))
        if pair in self.overrides:
            return self.overrides[pair]
        if self.truth[a] == self.truth[b]:
            return Decision.SAME, self.same_conf
        return Decision.DIFFERENT, self.diff_conf


class TruthChannel:
    """Perfect human channel."""

    def __init__(self, truth):
        self.truth = truth
        self.requests = []

    def request(self, a, b, attempt):
        self.requests.append((tuple(sorted((a, b))), attempt))
        decision = Decision.SAME if self.truth[a] == self.truth[b] else Decision.DIFFERENT
        return decision, ReviewSource.SIMULATED_HUMAN


class ListRanker:
    """Ranker over explicit similarity tables, for tiny graphs."""

    def __init__(self, table):
        self.table = table

    def top_k(self, query, candidates, k):
        scored = [(c, self.table.get(tuple(sorted((query, c))), 0.0)) for c in candidates if c != query]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]


def make_model(truth, seed=0, **kwargs):
    return SimOracleModel(truth=truth, seed=seed, **kwargs)


# --- init_graph ------------------------------------------------------------


def test_init_graph_single_annotation():
    graph = init_graph(["a1"], ListRanker({}), LcaConfig())
    assert graph.vertices == ["a1"]
    assert graph.edges == {}


def test_init_graph_two_annotations_dedupes_symmetric_edges():
    graph = init_graph(["a1", "a2"], ListRanker({("a1", "a2"): 1.0}), LcaConfig(top_k=5))
    assert list(graph.edges) == [("a1", "a2")]


def test_init_graph_edge_set_matches_exhaustive_oracle():
    ids, truth = planted_population(10, 4, 6, seed=2)
    model = make_model(truth, seed=2)
    config = LcaConfig(top_k=5)
    graph = init_graph(ids, SimRanker(model), config)

    expected = set()
    for query in ids:
        scored = []
        for c in ids:
            if c == query:
                continue
            s = model.similarity(query, c) + oracles.pair_jitter(model.seed, query, c, model.jitter)
            if model.min_similarity is not None and s < model.min_similarity:
                continue
            scored.append((c, s))
        scored.sort(key=lambda item: (-item[1], item[0]))
        for c, _ in scored[: config.top_k]:
            expected.add(tuple(sorted((query, c))))
    assert set(graph.edges) == expected


def test_init_graph_ranker_failure_contributes_no_edges(caplog):
    class FlakyRanker:
        def top_k(self, query, candidates, k):
            if query == "a1":
                raise RuntimeError("ranker crashed")
            return [(c, 1.0) for c in candidates if c != query][:k]

    with caplog.at_level(logging.WARNING):
        graph = init_graph(["a1", "a2", "a3"], FlakyRanker(), LcaConfig(top_k=1))
    # a1's query fails, but a2 and a3 still propose their own edges to a1
    assert set(graph.edges) == {("a1", "a2"), ("a1", "a3")}
    assert any("ranker failed" in r.message for r in caplog.records)


# --- weight_edges -----------------------------------------------------------


def test_weight_edges_contribution_examples():
    graph = IdentificationGraph(["a", "b", "c"])
    graph.add_edge("a", "b")
    graph.add_edge("a", "c")

    class FixedVerifier:
        def verify(self, a, b, attempt=1):
            if (a, b) == ("a", "b"):
                return Decision.SAME, 1.0
            return Decision.SAME, 0.5

    weight_edges(graph, FixedVerifier(), LcaConfig())
    assert graph.edge("a", "b").weight == 100
    assert graph.edge("a", "c").weight == 0


def test_weight_edges_abstention_is_incomparable_zero():
    graph = IdentificationGraph(["a", "b"])
    graph.add_edge("a", "b")

    class Abstainer:
        def verify(self, a, b, attempt=1):
            return Decision.INCOMPARABLE, 0.5

    weight_edges(graph, Abstainer(), LcaConfig())
    edge = graph.edge("a", "b")
    assert edge.weight == 0
    assert edge.reviews[0].decision is Decision.INCOMPARABLE


def test_weight_edges_signs_match_truth_when_noiseless():
    ids, truth = planted_population(8, 3, 5, seed=4)
    model = make_model(truth, seed=4)
    graph = init_graph(ids, SimRanker(model), LcaConfig())
    weight_edges(graph, SimVerifier(model), LcaConfig())
    for edge in graph.edges.values():
        expected_same = truth[edge.a] == truth[edge.b]
        assert (edge.weight > 0) == expected_same


def test_weight_edges_skips_already_reviewed():
    graph = IdentificationGraph(["a", "b"])
    edge = graph.add_edge("a", "b")
    edge.add(algorithmic_review("a", "b", Decision.SAME, 1.0))

    class Exploding:
        def verify(self, a, b, attempt=1):
            raise AssertionError("should not be called")

    weight_edges(graph, Exploding(), LcaConfig())
    assert edge.weight == 100


# --- scoring phase ------------------------------------------------------------


def seeded_weighted_graph(weights):
    vertices = sorted({v for pair in weights for v in pair})
    graph = IdentificationGraph(vertices)
    for (a, b), w in weights.items():
        edge = graph.add_edge(a, b)
        edge.add(algorithmic_review(a, b, Decision.SAME if w >= 0 else Decision.DIFFERENT, (w + 100) / 200))
    return graph


def test_scoring_all_negative_keeps_singletons():
    graph = seeded_weighted_graph({("a", "b"): -80, ("b", "c"): -100, ("a", "c"): -60})
    clustering = scoring_phase(graph, LcaConfig())
    assert len(set(clustering.values())) == 3


def test_scoring_merges_strong_positive_pair():
    graph = seeded_weighted_graph({("a", "b"): 100})
    clustering = scoring_phase(graph, LcaConfig())
    assert clustering["a"] == clustering["b"]


def test_scoring_recovers_planted_three_clusters_and_global_optimum():
    rng = random.Random(17)
    vertices = [f"v{i}" for i in range(9)]
    planted = {v: f"ind{i // 3}" for i, v in enumerate(vertices)}
    weights = {}
    for i in range(9):
        for j in range(i + 1, 9):
            a, b = vertices[i], vertices[j]
            magnitude = rng.randint(60, 100)
            weights[(a, b)] = magnitude if planted[a] == planted[b] else -magnitude
    graph = seeded_weighted_graph(weights)
    clustering = scoring_phase(graph, LcaConfig())

    got = {frozenset(m for m in vertices if clustering[m] == cid) for cid in set(clustering.values())}
    want = {frozenset(v for v in vertices if planted[v] == ind) for ind in set(planted.values())}
    assert got == want

    best_score, best_partitions = oracles.optimal_partitions(vertices, weights)
    assert clustering_score(graph) == best_score
    assert frozenset(got) in best_partitions


def test_scoring_score_strictly_increases():
    rng = random.Random(23)
    vertices = [f"v{i}" for i in range(10)]
    weights = {}
    for i in range(10):
        for j in range(i + 1, 10):
            if rng.random() < 0.5:
                weights[(vertices[i], vertices[j])] = rng.randint(-100, 100)
    graph = seeded_weighted_graph(weights)
    engine = LcaEngine(graph, LcaConfig())
    start = clustering_score(graph)
    engine._scoring_pass()
    deltas = [t["delta"] for t in engine.trace if t["event"] == "move"]
    assert all(d >= 1 for d in deltas)
    assert clustering_score(graph) == start + sum(deltas)


def test_scoring_respects_max_iterations():
    graph = seeded_weighted_graph({("a", "b"): 100, ("c", "d"): 100, ("e", "f"): 100})
    engine = LcaEngine(graph, LcaConfig(max_iterations=1))
    engine._scoring_pass()
    result = engine.run()
    assert result.converged is False


# --- stability phase ------------------------------------------------------------


def stable_planted_graph():
    """Two planted clusters with margins comfortably above the default tau."""
    weights = {}
    members = {"A": ["a1", "a2", "a3"], "B": ["b1", "b2", "b3"]}
    for group in members.values():
        for i in range(3):
            for j in range(i + 1, 3):
                weights[(group[i], group[j])] = 200
    weights[("a1", "b1")] = -200
    vertices = sorted({v for pair in weights for v in pair})
    graph = IdentificationGraph(vertices)
    for (a, b), w in weights.items():
        edge = graph.add_edge(a, b)
        conf = 1.0 if w > 0 else 0.0
        edge.add(algorithmic_review(a, b, Decision.SAME if w > 0 else Decision.DIFFERENT, conf))
        edge.add(algorithmic_review(a, b, Decision.SAME if w > 0 else Decision.DIFFERENT, conf))
    return graph


class RefusingChannel:
    def __init__(self):
        self.requests = []

    def request(self, a, b, attempt):
        self.requests.append((a, b))
        return None


def test_stability_no_reviews_when_margins_large():
    graph = stable_planted_graph()
    channel = RefusingChannel()
    result = stability_phase(graph, verifier=None, review_channel=channel, config=LcaConfig())
    assert result.converged
    assert result.human_reviews == 0
    assert channel.requests == []
    assert result.cluster_count == 2


def test_stability_adversarial_flip_reaches_human_and_recovers():
    vertices = ["a1", "a2", "a3", "b1", "b2", "b3"]
    truth = {v: v[0] for v in vertices}
    pairs = [
        ("a1", "a2"), ("a1", "a3"), ("a2", "a3"),
        ("b1", "b2"), ("b1", "b3"), ("b2", "b3"),
        ("a1", "b1"), ("a2", "b2"),
    ]
    graph = IdentificationGraph(vertices)
    for a, b in pairs:
        graph.add_edge(a, b)
    verifier = TruthVerifier(truth, same_conf=0.95, diff_conf=0.05,
                             overrides={("a1", "b1"): (Decision.SAME, 0.95)})
    channel = TruthChannel(truth)
    engine = LcaEngine(graph, LcaConfig(), verifier=verifier, review_channel=channel)
    result = engine.run()

    assert result.converged
    assert result.human_reviews >= 1
    assert ("a1", "b1") in [p for p, _ in channel.requests]
    clustering = result.clustering
    got = {frozenset(v for v in vertices if clustering[v] == cid) for cid in set(clustering.values())}
    assert got == {frozenset({"a1", "a2", "a3"}), frozenset({"b1", "b2", "b3"})}


def test_stability_suspends_when_channel_closed():
    vertices = ["a1", "b1"]
    graph = IdentificationGraph(vertices)
    graph.add_edge("a1", "b1")
    # both algorithmic reviews land near zero: margin stays low, human needed
    verifier = TruthVerifier({"a1": "x", "b1": "y"}, diff_conf=0.45)
    channel = RefusingChannel()
    engine = LcaEngine(graph, LcaConfig(), verifier=verifier, review_channel=channel)
    result = engine.run()
    assert engine.phase == "suspended"
    assert result.converged is False
    assert len(channel.requests) == 1


def test_incomparable_cascade_counts_toward_caps():
    vertices = ["a1", "b1"]
    graph = IdentificationGraph(vertices)
    graph.add_edge("a1", "b1")

    class AbstainVerifier:
        def verify(self, a, b, attempt=1):
            return Decision.INCOMPARABLE, 0.5

    channel = TruthChannel({"a1": "x", "b1": "y"})
    engine = LcaEngine(graph, LcaConfig(), verifier=AbstainVerifier(), review_channel=channel)
    result = engine.run()
    assert result.converged
    edge = graph.edge("a1", "b1")
    assert edge.algo_count == 2
    assert all(r.contribution == 0 for r in edge.reviews if r.source is ReviewSource.ALGORITHMIC)
    assert edge.weight == -300 * edge.human_count


# --- full runs -------------------------------------------------------------------


def test_run_lca_single_annotation():
    ids, truth = planted_population(1, 1, 1, seed=9)
    model = make_model(truth, seed=9)
    result = run_lca(ids, SimRanker(model), SimVerifier(model), SimulatedHumanChannel(model), LcaConfig())
    assert result.cluster_count == 1
    assert result.total_reviews == 0
    assert result.automation_rate == 1.0
    assert result.converged


def test_run_lca_planted_noiseless_three_individuals():
    ids, truth = planted_population(3, 3, 3, seed=12)
    model = make_model(truth, seed=12, human_error_rate=0.0, human_incomparable_rate=0.0)
    result = run_lca(ids, SimRanker(model), SimVerifier(model), SimulatedHumanChannel(model), LcaConfig())
    assert result.converged
    assert result.human_reviews == 0
    assert result.cluster_count == 3
    report = evaluate(result.clustering, truth)
    assert report.f1 == 1.0


def test_run_lca_with_flips_recovers_with_humans():
    # seed chosen so the 5% flip noise actually lands on decisive edges
    ids, truth = planted_population(10, 3, 6, seed=7)
    model = make_model(truth, seed=7, flip_rate=0.05, human_error_rate=0.0, human_incomparable_rate=0.0)
    result = run_lca(ids, SimRanker(model), SimVerifier(model), SimulatedHumanChannel(model), LcaConfig())
    assert result.converged
    report = evaluate(result.clustering, truth)
    assert report.f1 == 1.0
    assert result.human_reviews > 0


def test_run_lca_deterministic_including_log():
    ids, truth = planted_population(6, 3, 5, seed=40)
    model = make_model(truth, seed=40, flip_rate=0.05, human_error_rate=0.0, human_incomparable_rate=0.0)

    def one_run():
        log = []
        result = run_lca(
            ids, SimRanker(model), SimVerifier(model), SimulatedHumanChannel(model), LcaConfig(), log_writer=log.append
        )
        return result, log

    first_result, first_log = one_run()
    second_result, second_log = one_run()
    assert first_result.clustering == second_result.clustering
    assert first_log == second_log


def test_review_accounting_matches_log():
    ids, truth = planted_population(6, 3, 5, seed=41)
    model = make_model(truth, seed=41, flip_rate=0.08, human_error_rate=0.0, human_incomparable_rate=0.0)
    log = []
    result = run_lca(
        ids, SimRanker(model), SimVerifier(model), SimulatedHumanChannel(model), LcaConfig(), log_writer=log.append
    )
    reviews = [e for e in log if e["kind"] == "review"]
    init_entries = [e for e in log if e["kind"] != "review"]
    assert result.total_reviews == len(log) - len(init_entries) == len(reviews)
    assert result.algorithmic_reviews == sum(1 for e in reviews if e["source"] == "algorithmic")
    assert result.human_reviews == sum(1 for e in reviews if e["source"] != "algorithmic")
    assert [e["seq"] for e in log] == list(range(len(log)))
    assert result.automation_rate == result.algorithmic_reviews / result.total_reviews


def test_per_pair_caps_respected():
    ids, truth = planted_population(8, 3, 5, seed=42)
    model = make_model(truth, seed=42, flip_rate=0.2, human_error_rate=0.1, human_incomparable_rate=0.05)
    graph = init_graph(ids, SimRanker(model), LcaConfig())
    engine = LcaEngine(graph, LcaConfig(), verifier=SimVerifier(model), review_channel=SimulatedHumanChannel(model))
    engine.run()
    config = engine.config
    for edge in graph.edges.values():
        assert edge.algo_count <= config.max_algo_reviews_per_pair
        assert edge.human_count <= config.max_human_reviews_per_pair
        assert edge.weight == edge.recomputed_weight()


def test_convergence_certificate():
    ids, truth = planted_population(8, 3, 5, seed=43)
    model = make_model(truth, seed=43, flip_rate=0.05, human_error_rate=0.0, human_incomparable_rate=0.0)
    graph = init_graph(ids, SimRanker(model), LcaConfig())
    engine = LcaEngine(graph, LcaConfig(), verifier=SimVerifier(model), review_channel=SimulatedHumanChannel(model))
    result = engine.run()
    assert result.converged
    certificate = engine.certificate()
    assert certificate["no_positive_delta"]
    assert certificate["all_margins_ok"]


def test_resume_equivalence_through_snapshots(tmp_path):
    ids, truth = planted_population(6, 3, 5, seed=44)
    model = make_model(truth, seed=44, flip_rate=0.1, human_error_rate=0.0, human_incomparable_rate=0.0)
    config = LcaConfig()

    def fresh_engine():
        graph = init_graph(ids, SimRanker(model), config)
        return LcaEngine(graph, config, verifier=SimVerifier(model), review_channel=SimulatedHumanChannel(model))

    baseline_engine = fresh_engine()
    baseline = baseline_engine.run()
    assert baseline.converged

    for k in (1, 5, 20):
        engine = fresh_engine()
        for _ in range(100_000):
            engine.run(max_new_reviews=k)
            if engine.phase == "converged":
                break
            path = tmp_path / f"state_{k}.json"
            save_state(engine.to_state(), path)
            engine = LcaEngine.from_state(
                load_state(path),
                verifier=SimVerifier(model),
                review_channel=SimulatedHumanChannel(model),
            )
        assert engine.phase == "converged"
        assert engine.graph.clustering() == baseline.clustering
        assert engine.review_log == baseline_engine.review_log


def test_config_validation():
    with pytest.raises(ValueError):
        LcaConfig(top_k=0)
    with pytest.raises(ValueError):
        LcaConfig(stability_margin=700, human_weight=300)
    config = LcaConfig(seed=7)
    assert LcaConfig.from_dict(config.to_dict()) == config
