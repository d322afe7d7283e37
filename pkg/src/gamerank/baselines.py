"""Non-causal ranking baselines: payout rate, random, and anomaly scores.

The anomaly detectors score pooled (x, d) rows and rank agents by their
mean within-agent score, descending. Features are used raw; the unit
variance of the synthetic covariates makes the scales comparable. Set
``standardize=True`` for data where that does not hold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Ranking, Rng, format_float

__all__ = [
    "AnomalyScores",
    "payout_only_ranking",
    "random_ranking",
    "knn_anomaly_ranking",
    "ecod_ranking",
]


@dataclass(frozen=True)
class AnomalyScores:
    """Per-record anomaly scores plus the induced per-agent means."""

    record_scores: np.ndarray
    agent_ids: tuple[int, ...]
    agent_means: np.ndarray

    def write_csv(self, ds: Dataset, path) -> None:
        lines = ["record_index,agent_id,score"]
        for i, s in enumerate(self.record_scores):
            lines.append(f"{i},{int(ds.p[i])},{format_float(s)}")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")


def _rank_desc(ids: np.ndarray, values: np.ndarray) -> Ranking:
    # Descending value, ties broken by ascending agent id.
    order = np.lexsort((ids, -values))
    return Ranking(tuple(int(ids[i]) for i in order))


def _agent_means(ds: Dataset, scores: np.ndarray) -> AnomalyScores:
    ids = ds.agent_ids
    means = np.array([
        scores[ds.p == a].mean() if np.any(ds.p == a) else -np.inf for a in ids
    ])
    return AnomalyScores(record_scores=scores, agent_ids=tuple(int(i) for i in ids),
                         agent_means=means)


def payout_only_ranking(ds: Dataset) -> Ranking:
    """Agents by descending empirical decision rate."""
    if ds.n_records == 0:
        raise ValueError("empty dataset")
    ids = ds.agent_ids
    rates = np.array([
        ds.d[ds.p == a].mean() if np.any(ds.p == a) else -np.inf for a in ids
    ])
    return _rank_desc(ids, rates)


def random_ranking(agents, rng: Rng) -> Ranking:
    """Uniform random permutation of the agents; deterministic per seed."""
    ids = sorted(int(a.id) for a in agents)
    perm = rng.generator().permutation(len(ids))
    return Ranking(tuple(ids[i] for i in perm))


def _anomaly_features(ds: Dataset, standardize: bool) -> np.ndarray:
    feats = np.hstack([ds.x, ds.d[:, None].astype(float)])
    if standardize:
        std = feats.std(axis=0)
        std[std == 0] = 1.0
        feats = (feats - feats.mean(axis=0)) / std
    return feats


def knn_anomaly_ranking(
    ds: Dataset, k: int = 5, standardize: bool = False
) -> tuple[Ranking, AnomalyScores]:
    """Distance to the k-th nearest neighbour in pooled (x, d) space.

    Exact brute-force neighbours, computed in row blocks to bound
    memory; the record itself never counts as its own neighbour.
    """
    n = ds.n_records
    if n == 0:
        raise ValueError("empty dataset")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the dataset size {n}")
    feats = _anomaly_features(ds, standardize)
    sq = np.sum(feats * feats, axis=1)
    scores = np.empty(n)
    block = max(1, int(2**22 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] - 2.0 * (feats[start:stop] @ feats.T) + sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        # Row i includes its own zero distance, so the k-th neighbour
        # excluding self is order statistic k including self.
        part = np.partition(d2, k, axis=1)[:, k]
        scores[start:stop] = np.sqrt(part)
    agg = _agent_means(ds, scores)
    return _rank_desc(np.array(agg.agent_ids), agg.agent_means), agg


def _ecdf_tail_probs(col: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left tail P(X <= x) and right tail P(X >= x), each at least 1/n."""
    n = col.size
    order = np.sort(col)
    left = np.searchsorted(order, col, side="right") / n
    right = (n - np.searchsorted(order, col, side="left")) / n
    return left, right


def ecod_ranking(
    ds: Dataset, standardize: bool = False
) -> tuple[Ranking, AnomalyScores]:
    """Empirical-CDF tail scores summed over the (x, d) dimensions.

    Per dimension the score is the larger of the two -log tail
    probabilities and the skewness-directed tail; a record sitting in
    the extreme of every dimension gets the maximal total.
    """
    if ds.n_records == 0:
        raise ValueError("empty dataset")
    feats = _anomaly_features(ds, standardize)
    n, dims = feats.shape
    total = np.zeros(n)
    for j in range(dims):
        col = feats[:, j]
        left, right = _ecdf_tail_probs(col)
        u_left = -np.log(left)
        u_right = -np.log(right)
        centered = col - col.mean()
        m2 = float(np.mean(centered**2))
        skew = 0.0 if m2 == 0 else float(np.mean(centered**3) / m2**1.5)
        u_skew = u_left if skew < 0 else u_right
        total += np.maximum(np.maximum(u_left, u_right), u_skew)
    agg = _agent_means(ds, total)
    return _rank_desc(np.array(agg.agent_ids), agg.agent_means), agg
