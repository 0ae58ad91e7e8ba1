"""Score-level metrics shared by the trainer and the evaluator.

Kept free of model imports so both sides can use them without cycles.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .errors import EmptySet


def pairwise_auc(pos_scores, neg_scores) -> float:
    """Probability a positive outranks a negative; ties credit 0.5.

    Computed exactly over all pos x neg pairs (fine at desk scale).
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise EmptySet("AUC needs both positive and negative scores")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def rank_by_score(scores: np.ndarray, ids: list[str], target_pos: int) -> int:
    """1-based rank of position target_pos under (score desc, id asc) order."""
    s_t = scores[target_pos]
    id_t = ids[target_pos]
    ahead = 0
    for k in range(len(ids)):
        if scores[k] > s_t or (scores[k] == s_t and ids[k] < id_t):
            ahead += 1
    return ahead + 1


def sign_test_one_sided(deltas) -> float:
    """One-sided sign test p-value for the hypothesis median(delta) > 0.

    Zero deltas are dropped (standard practice); with no informative pairs
    the p-value is 1.0.
    """
    wins = sum(1 for d in deltas if d > 0)
    losses = sum(1 for d in deltas if d < 0)
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(comb(n, i) for i in range(wins, n + 1)) / 2.0 ** n


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation of a metric over runs."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EmptySet("no values")
    return float(arr.mean()), float(arr.std())
