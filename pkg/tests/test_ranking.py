import numpy as np
import pytest

from gamerank.core import Ranking, Rng
from gamerank.estimators import EffectMatrix
from gamerank.ranking import (
    AggregationRule,
    perturbation_stability,
    rank_from_effects,
    read_ranking_csv,
    write_ranking_csv,
)
from gamerank.strategic import CostSpec, RewardSpec, optimal_response


def _consistent_matrix(values):
    """T[i, j] = v_i - v_j: induced by a monotone score."""
    v = np.asarray(values, dtype=float)
    return EffectMatrix(tau=v[:, None] - v[None, :], agent_ids=tuple(range(len(v))))


class TestRankFromEffects:
    def test_oracle_matrix_recovers_lambda_order(self):
        # best responses at a shared ground-truth rate order the agents
        lams = [3.0, 40.0, 8.0, 150.0, 1.2]
        reward, cost = RewardSpec.log(), CostSpec.quadratic()
        deltas = [optimal_response(reward, cost, lam, 0.05) for lam in lams]
        T = _consistent_matrix(deltas)
        want = tuple(int(i) for i in np.argsort(lams, kind="stable"))
        assert rank_from_effects(T, AggregationRule.BORDA_MEAN).order == want
        assert rank_from_effects(T, AggregationRule.COPELAND_WINS).order == want

    def test_symmetric_cycle_breaks_ties_by_id(self):
        cycle = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
        T = EffectMatrix(tau=cycle, agent_ids=(0, 1, 2))
        assert rank_from_effects(T).order == (0, 1, 2)

    def test_two_agents(self):
        T = EffectMatrix(tau=np.array([[0.0, 0.03], [-0.03, 0.0]]), agent_ids=(0, 1))
        assert rank_from_effects(T).order == (0, 1)

    def test_non_antisymmetric_rejected(self):
        T = _consistent_matrix([0.3, 0.1, 0.2])
        broken = np.array(T.tau)
        broken[0, 1] += 1e-6  # bypass the constructor's antisymmetrization
        object.__setattr__(T, "tau", broken)
        with pytest.raises(ValueError, match="antisymmetric"):
            rank_from_effects(T)

    def test_monotone_score_matrices_recover_order(self):
        g = Rng(31).generator()
        for _ in range(50):
            n = int(g.integers(2, 12))
            scores = g.standard_normal(n)
            T = _consistent_matrix(scores)
            want = tuple(int(i) for i in np.lexsort((np.arange(n), -scores)))
            for rule in AggregationRule:
                assert rank_from_effects(T, rule).order == want

    def test_scale_invariance(self):
        g = Rng(32).generator()
        scores = g.standard_normal(8)
        T = _consistent_matrix(scores)
        scaled = EffectMatrix(tau=T.tau * 37.5, agent_ids=T.agent_ids)
        assert rank_from_effects(T).order == rank_from_effects(scaled).order

    def test_antisymmetrize_consistent_matrix_is_noop(self):
        T = _consistent_matrix([0.5, 0.2, -0.1])
        rebuilt = EffectMatrix(tau=np.array(T.tau), agent_ids=T.agent_ids)
        assert np.array_equal(rebuilt.tau, T.tau)


class TestPerturbationStability:
    def test_large_margins_fully_stable(self):
        T = _consistent_matrix([0.4, 0.3, 0.2, 0.1])
        report = perturbation_stability(T, epsilon=0.01, trials=300, rng=Rng(33))
        assert report.stable_fraction == 1.0
        assert report.unstable_adjacent_pairs == ()

    def test_small_margins_flagged(self):
        T = _consistent_matrix([0.4, 0.3, 0.2999, 0.1])
        report = perturbation_stability(T, epsilon=0.05, trials=300, rng=Rng(34))
        assert report.stable_fraction < 1.0
        assert (1, 2) in report.unstable_adjacent_pairs

    def test_oracle_default_epsilon_rule(self):
        # epsilon at half the minimum pairwise effect never flips Borda
        lams = [2.0, 5.0, 11.0, 29.0, 80.0]
        reward, cost = RewardSpec.log(), CostSpec.quadratic()
        deltas = [optimal_response(reward, cost, lam, 0.05) for lam in lams]
        T = _consistent_matrix(deltas)
        off = np.abs(T.tau[~np.eye(5, dtype=bool)])
        report = perturbation_stability(T, float(off.min()) / 2, 1000, Rng(35))
        assert report.stable_fraction == 1.0

    def test_contract(self):
        T = _consistent_matrix([0.2, 0.1])
        with pytest.raises(ValueError):
            perturbation_stability(T, 0.0, 10, Rng(0))
        with pytest.raises(ValueError):
            perturbation_stability(T, 0.1, 0, Rng(0))


class TestRankingCsv:
    def test_roundtrip(self, tmp_path):
        ranking = Ranking((2, 0, 3, 1))
        path = tmp_path / "r.csv"
        write_ranking_csv(ranking, path, scores=np.array([0.3, 0.1, 0.0, -0.4]))
        assert read_ranking_csv(path).order == ranking.order
        lines = path.read_text().splitlines()
        assert lines[0] == "position,agent_id,score"
        assert lines[1].startswith("0,2,0.3")
