"""Ranking quality metrics against a ground-truth order.

Top-m sensitivity at k counts how many of the true worst-m offenders a
predicted top-k catches; DCG discounts ground-truth relevance by
predicted position; AUSC averages the sensitivity curve over all k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Ranking, format_float

__all__ = [
    "MetricsReport",
    "sensitivity_at_k",
    "dcg_at_k",
    "ausc",
    "expected_random_ausc",
    "spearman",
]


def _check_pair(pred: Ranking, truth: Ranking) -> int:
    if len(pred) != len(truth):
        raise ValueError("rankings must cover the same agents")
    return len(pred)


def sensitivity_at_k(pred: Ranking, truth: Ranking, k: int, top_m: int = 5) -> float:
    """Fraction of the true top-m agents inside the predicted top-k."""
    K = _check_pair(pred, truth)
    if not 1 <= k <= K:
        raise ValueError(f"k must be in 1..{K}, got {k}")
    if not 1 <= top_m <= K:
        raise ValueError(f"top_m must be in 1..{K}, got {top_m}")
    worst = set(truth.order[:top_m])
    hits = sum(1 for a in pred.order[:k] if a in worst)
    return hits / top_m


def dcg_at_k(
    pred: Ranking, truth: Ranking, k: int, shifted_relevance: bool = False
) -> float:
    """Sum of (K - true_rank) / log2(i + 1) over the predicted top-k.

    True ranks are 1-based, so the least gaming-prone agent carries zero
    relevance. ``shifted_relevance`` switches to K + 1 - rank, a
    constant shift that changes values but never the induced ordering
    of rankings at fixed k.
    """
    K = _check_pair(pred, truth)
    if not 1 <= k <= K:
        raise ValueError(f"k must be in 1..{K}, got {k}")
    true_rank = {agent: pos + 1 for pos, agent in enumerate(truth.order)}
    offset = 1 if shifted_relevance else 0
    total = 0.0
    for i, agent in enumerate(pred.order[:k], start=1):
        total += (K - true_rank[agent] + offset) / np.log2(i + 1)
    return float(total)


def ausc(pred: Ranking, truth: Ranking, top_m: int = 5) -> float:
    """Mean of the top-m sensitivity over k = 1..K; in [0, 1]."""
    K = _check_pair(pred, truth)
    return float(
        np.mean([sensitivity_at_k(pred, truth, k, top_m) for k in range(1, K + 1)])
    )


def expected_random_ausc(K: int) -> float:
    """Closed-form AUSC of a uniform random ranking: (K - 1) / (2K)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return (K - 1) / (2 * K)


def _rank_vector(r) -> np.ndarray:
    if isinstance(r, Ranking):
        # rank of each agent id, 1-based
        out = np.empty(len(r))
        for pos, agent in enumerate(r.order):
            out[agent] = pos + 1
        return out
    values = np.asarray(r, dtype=float)
    # average ranks for ties
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    ranks[order] = np.arange(1, values.size + 1)
    for v in np.unique(values):
        mask = values == v
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def spearman(rank_a, rank_b) -> float:
    """Spearman rank correlation: Pearson correlation of rank vectors."""
    ra = _rank_vector(rank_a)
    rb = _rank_vector(rank_b)
    if ra.size != rb.size:
        raise ValueError("inputs must have equal length")
    if ra.size < 2:
        raise ValueError("need at least 2 items")
    if np.all(ra == ra[0]) or np.all(rb == rb[0]):
        raise ValueError("rank correlation is undefined for constant input")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    return float(np.sum(ra * rb) / np.sqrt(np.sum(ra * ra) * np.sum(rb * rb)))


@dataclass(frozen=True)
class MetricsReport:
    """Sensitivity and DCG curves over k plus the AUSC summary."""

    sensitivity: np.ndarray
    dcg: np.ndarray
    ausc: float
    K: int
    top_m: int

    @staticmethod
    def compute(pred: Ranking, truth: Ranking, top_m: int = 5) -> "MetricsReport":
        K = _check_pair(pred, truth)
        sens = np.array([sensitivity_at_k(pred, truth, k, top_m) for k in range(1, K + 1)])
        dcg = np.array([dcg_at_k(pred, truth, k) for k in range(1, K + 1)])
        return MetricsReport(
            sensitivity=sens, dcg=dcg, ausc=float(sens.mean()), K=K, top_m=top_m
        )

    def write_csv(self, path) -> None:
        lines = ["k,sensitivity,dcg"]
        for k in range(1, self.K + 1):
            lines.append(
                f"{k},{format_float(self.sensitivity[k - 1])},{format_float(self.dcg[k - 1])}"
            )
        lines.append(f"ausc,{format_float(self.ausc)},")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
