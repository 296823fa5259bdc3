"""Independent brute-force oracles used by the tests.

These deliberately re-derive results from first principles (exhaustive
enumeration, direct pair counting, closed forms) without calling the code
paths they check.
"""

from __future__ import annotations

import hashlib
from itertools import combinations


def all_partitions(items):
    """Every set partition of items (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in all_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1 :]
        yield part + [[first]]


def brute_score(edge_weights: dict[tuple[str, str], int], assignment: dict[str, str]) -> int:
    """Sum intra-cluster weights minus inter-cluster weights, directly."""
    score = 0
    for (a, b), w in edge_weights.items():
        score += w if assignment[a] == assignment[b] else -w
    return score


def partition_to_assignment(partition) -> dict[str, str]:
    assignment = {}
    for part in partition:
        label = min(part)
        for v in part:
            assignment[v] = label
    return assignment


def optimal_partitions(vertices, edge_weights):
    """All partitions achieving the maximum score, as frozensets of frozensets."""
    best_score = None
    best = []
    for partition in all_partitions(list(vertices)):
        assignment = partition_to_assignment(partition)
        score = brute_score(edge_weights, assignment)
        if best_score is None or score > best_score:
            best_score = score
            best = [frozenset(frozenset(p) for p in partition)]
        elif score == best_score:
            best.append(frozenset(frozenset(p) for p in partition))
    return best_score, best


def brute_pair_counts(predicted: dict[str, str], truth: dict[str, str]):
    """Direct enumeration of all unordered pairs into (tp, fp, fn, tn)."""
    ids = sorted(predicted)
    tp = fp = fn = tn = 0
    for a, b in combinations(ids, 2):
        pred_same = predicted[a] == predicted[b]
        true_same = truth[a] == truth[b]
        if pred_same and true_same:
            tp += 1
        elif pred_same:
            fp += 1
        elif true_same:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def pair_jitter(seed, query: str, candidate: str, scale: float) -> float:
    """Re-derivation of the ranker's hash-keyed jitter."""
    blob = "\x1f".join(str(p) for p in (seed, "rank", query, candidate)).encode()
    unit = int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") / 2**64
    return scale * (2.0 * unit - 1.0)
