"""Turn a pairwise effect matrix into a total order over agents.

Estimated effect matrices can be intransitive, so instead of sorting
with the matrix as a comparator (order-dependent on intransitive
input) agents are scored: Borda by mean effect against all others
(default), or Copeland by number of positive comparisons. Both recover
the exact order whenever the matrix is induced by a monotone score.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import Ranking, Rng, format_float
from .estimators import EffectMatrix

__all__ = [
    "AggregationRule",
    "rank_from_effects",
    "ranking_scores",
    "perturbation_stability",
    "StabilityReport",
    "write_ranking_csv",
    "read_ranking_csv",
]

_ANTISYM_TOL = 1e-12


class AggregationRule(enum.Enum):
    BORDA_MEAN = "borda_mean"
    COPELAND_WINS = "copeland_wins"


def _check_matrix(T: EffectMatrix) -> np.ndarray:
    tau = np.asarray(T.tau, dtype=float)
    if np.max(np.abs(tau + tau.T)) > _ANTISYM_TOL:
        raise ValueError("effect matrix is not antisymmetric")
    if np.max(np.abs(np.diag(tau))) > 0:
        raise ValueError("effect matrix diagonal must be zero")
    return tau


def ranking_scores(
    T: EffectMatrix, rule: AggregationRule = AggregationRule.BORDA_MEAN
) -> np.ndarray:
    """Per-agent aggregation score; larger means more gaming-prone."""
    tau = _check_matrix(T)
    P = tau.shape[0]
    if rule is AggregationRule.BORDA_MEAN:
        if P == 1:
            return np.zeros(1)
        return tau.sum(axis=1) / (P - 1)
    if rule is AggregationRule.COPELAND_WINS:
        return (tau > 0).sum(axis=1).astype(float)
    raise ValueError(f"unknown aggregation rule {rule!r}")


def rank_from_effects(
    T: EffectMatrix, rule: AggregationRule = AggregationRule.BORDA_MEAN
) -> Ranking:
    """Sort agents by descending aggregation score, ties by agent id.

    A positive mean effect means the agent's counterfactual decision
    rate exceeds the others', i.e. it games more.
    """
    scores = ranking_scores(T, rule)
    ids = np.array(T.agent_ids)
    order = np.lexsort((ids, -scores))
    return Ranking(tuple(int(ids[i]) for i in order))


@dataclass(frozen=True)
class StabilityReport:
    stable_fraction: float
    trials: int
    unstable_adjacent_pairs: tuple[tuple[int, int], ...]


def perturbation_stability(
    T: EffectMatrix,
    epsilon: float,
    trials: int,
    rng: Rng,
    rule: AggregationRule = AggregationRule.BORDA_MEAN,
) -> StabilityReport:
    """Re-rank under bounded noise on the off-diagonal effects.

    Each trial adds independent noise uniform in [-epsilon, epsilon] to
    the upper triangle (mirrored to keep antisymmetry) and re-ranks.
    Reports the fraction of trials whose order matched the unperturbed
    ranking and all adjacent pairs that ever swapped.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if trials <= 0:
        raise ValueError("trials must be positive")
    base = rank_from_effects(T, rule)
    tau = np.asarray(T.tau)
    P = tau.shape[0]
    iu = np.triu_indices(P, k=1)
    g = rng.generator()
    stable = 0
    unstable: set[tuple[int, int]] = set()
    for _ in range(trials):
        noise = np.zeros_like(tau)
        noise[iu] = g.uniform(-epsilon, epsilon, size=iu[0].size)
        noise = noise - noise.T
        perturbed = EffectMatrix(tau=tau + noise, agent_ids=T.agent_ids)
        order = rank_from_effects(perturbed, rule).order
        if order == base.order:
            stable += 1
        else:
            for a, b in zip(base.order[:-1], base.order[1:]):
                if order.index(a) > order.index(b):
                    unstable.add((a, b))
    return StabilityReport(
        stable_fraction=stable / trials,
        trials=trials,
        unstable_adjacent_pairs=tuple(sorted(unstable)),
    )


def write_ranking_csv(ranking: Ranking, path, scores: np.ndarray | None = None) -> None:
    """`position,agent_id,score` rows; score blank when not applicable."""
    lines = ["position,agent_id,score"]
    for pos, agent in enumerate(ranking.order):
        s = "" if scores is None else format_float(scores[pos])
        lines.append(f"{pos},{agent},{s}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_ranking_csv(path) -> Ranking:
    with open(path, "r", encoding="utf-8") as f:
        f.readline()
        order = [int(line.split(",")[1]) for line in f if line.strip()]
    return Ranking(tuple(order))
