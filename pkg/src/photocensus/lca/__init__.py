from .alternatives import Alternative, best_alternative, decisive_pairs, enumerate_alternatives, pair_key, single_key
from .engine import (
    LcaConfig,
    LcaEngine,
    RunResult,
    RunState,
    init_graph,
    run_lca,
    scoring_phase,
    stability_phase,
    weight_edges,
)
from .graph import Edge, IdentificationGraph, clustering_score
from .reviews import (
    Decision,
    Pair,
    ReviewDecision,
    ReviewSource,
    algorithmic_contribution,
    algorithmic_review,
    human_review,
    norm_pair,
)

__all__ = [
    "Alternative",
    "Decision",
    "Edge",
    "IdentificationGraph",
    "LcaConfig",
    "LcaEngine",
    "Pair",
    "ReviewDecision",
    "ReviewSource",
    "RunResult",
    "RunState",
    "algorithmic_contribution",
    "algorithmic_review",
    "best_alternative",
    "clustering_score",
    "decisive_pairs",
    "enumerate_alternatives",
    "human_review",
    "init_graph",
    "norm_pair",
    "pair_key",
    "run_lca",
    "scoring_phase",
    "single_key",
    "stability_phase",
    "weight_edges",
]
