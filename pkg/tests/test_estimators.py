import numpy as np
import pytest

from gamerank.core import AgentSpec, Dataset, Rng, split_dataset
from gamerank.estimators import (
    EffectMatrix,
    FitHyper,
    effect_matrix,
    fit_logistic,
    fit_propensity,
    fit_s_ipw,
    fit_s_learner,
    fit_t_learner,
    logistic_loss_grad,
    mlp_loss_grad,
    pairwise_ate,
    psm_ate,
)
from gamerank.synthgen import SynthConfig, TrueResponseModel, generate_dataset


def _synth(lambdas, per_agent, mean_range, seed, **kwargs):
    cfg = SynthConfig(
        lambdas=tuple(lambdas), per_agent_count=per_agent, mean_range=mean_range, **kwargs
    )
    return cfg, generate_dataset(cfg, Rng(seed).substream("est-tests"))


class TestFitLogistic:
    def test_separable_1d(self):
        X = np.array([[-1.0], [1.0]] * 100)
        y = np.array([0.0, 1.0] * 100)
        model = fit_logistic(X, y, hyper=FitHyper(l2=0.01))
        assert model.predict_proba(np.array([[1.0]]))[0] > 0.95

    def test_degenerate_labels_warn_and_stay_low(self):
        X = np.linspace(-1, 1, 50)[:, None]
        y = np.zeros(50)
        with pytest.warns(UserWarning, match="labels identical"):
            model = fit_logistic(X, y)
        assert np.all(model.predict_proba(X) < 0.01)

    def test_weight_scale_invariance(self):
        g = Rng(41).generator()
        X = g.standard_normal((200, 3))
        y = (g.uniform(size=200) < 0.3).astype(float)
        m1 = fit_logistic(X, y, sample_weights=np.ones(200))
        m2 = fit_logistic(X, y, sample_weights=np.full(200, 2.0))
        assert np.allclose(m1.weights, m2.weights, atol=1e-6)
        assert m1.bias == pytest.approx(m2.bias, abs=1e-6)

    def test_bad_weights_rejected(self):
        X = np.zeros((4, 1))
        y = np.array([0.0, 1.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            fit_logistic(X, y, sample_weights=np.array([1.0, -1.0, 1.0, 1.0]))


class TestGradients:
    def test_logistic_matches_finite_differences(self):
        g = Rng(42).generator()
        for _ in range(5):
            X = g.standard_normal((10, 3))
            y = (g.uniform(size=10) < 0.5).astype(float)
            nw = np.full(10, 0.1)
            w = g.standard_normal(3) * 0.3
            b = 0.2
            _, gw, gb = logistic_loss_grad(w, b, X, y, nw, 1e-3)
            h = 1e-6
            for j in range(3):
                wp, wm = w.copy(), w.copy()
                wp[j] += h
                wm[j] -= h
                num = (
                    logistic_loss_grad(wp, b, X, y, nw, 1e-3)[0]
                    - logistic_loss_grad(wm, b, X, y, nw, 1e-3)[0]
                ) / (2 * h)
                assert gw[j] == pytest.approx(num, rel=1e-4, abs=1e-8)
            num_b = (
                logistic_loss_grad(w, b + h, X, y, nw, 1e-3)[0]
                - logistic_loss_grad(w, b - h, X, y, nw, 1e-3)[0]
            ) / (2 * h)
            assert gb == pytest.approx(num_b, rel=1e-4, abs=1e-8)

    def test_mlp_matches_finite_differences(self):
        g = Rng(43).generator()
        X = g.standard_normal((8, 2))
        y = (g.uniform(size=8) < 0.5).astype(float)
        nw = np.full(8, 1 / 8)
        layers = [
            (g.standard_normal((2, 3)) * 0.4, g.standard_normal(3) * 0.1),
            (g.standard_normal((3, 3)) * 0.4, g.standard_normal(3) * 0.1),
            (g.standard_normal((3, 1)) * 0.4, g.standard_normal(1) * 0.1),
        ]
        _, grads = mlp_loss_grad(layers, X, y, nw, 1e-3)
        h = 1e-6
        for li in range(3):
            W, b = layers[li]
            for pos in {(0, 0), (W.shape[0] - 1, W.shape[1] - 1)}:
                plus = [(w_.copy(), b_.copy()) for w_, b_ in layers]
                minus = [(w_.copy(), b_.copy()) for w_, b_ in layers]
                plus[li][0][pos] += h
                minus[li][0][pos] -= h
                num = (
                    mlp_loss_grad(plus, X, y, nw, 1e-3)[0]
                    - mlp_loss_grad(minus, X, y, nw, 1e-3)[0]
                ) / (2 * h)
                assert grads[li][0][pos] == pytest.approx(num, rel=1e-4, abs=1e-8)


class TestPropensity:
    def test_uniform_when_unconfounded(self):
        _, labeled = _synth([0.001, 0.01, 0.05, 0.2], 400, 0.0, seed=1)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(2))
        model = fit_propensity(train)
        probs = model.predict_proba(test.x)
        assert np.allclose(probs.mean(axis=0), 0.25, atol=0.05)
        assert np.allclose(probs.sum(axis=1), 1.0)

    def test_separable_agents(self):
        x = np.concatenate([np.full(100, -3.0), np.full(100, 3.0)])[:, None]
        x = x + Rng(3).generator().standard_normal((200, 1)) * 0.1
        ds = Dataset(
            x=x, d=np.zeros(200, dtype=int), p=np.repeat([0, 1], 100),
            agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)],
        )
        model = fit_propensity(ds)
        p0 = model.predict_proba(np.array([[-3.0]]))[0, model.column_of(0)]
        assert p0 > 0.95

    def test_permuted_labels_give_marginal_frequencies(self):
        g = Rng(4).generator()
        x = g.standard_normal((400, 2))
        p = np.array([0] * 300 + [1] * 100)
        p = p[g.permutation(400)]  # no relation between x and p
        ds = Dataset(
            x=x, d=np.zeros(400, dtype=int), p=p,
            agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)],
        )
        model = fit_propensity(ds)
        probs = model.predict_proba(x)
        assert probs[:, model.column_of(0)].mean() == pytest.approx(0.75, abs=0.05)

    def test_single_agent_rejected(self):
        ds = Dataset(
            x=np.zeros((10, 1)), d=np.zeros(10, dtype=int), p=np.zeros(10, dtype=int),
            agents=[AgentSpec(0, 1.0)],
        )
        with pytest.raises(ValueError):
            fit_propensity(ds)


class TestSLearner:
    def test_oracle_level_counterfactual_means(self):
        cfg, labeled = _synth([0.001, 0.01, 0.05, 0.2], 2000, 0.5, seed=5)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(6))
        model = fit_s_learner(train)
        oracle = TrueResponseModel.for_dataset(cfg, labeled)
        for a in range(4):
            got = float(np.mean(model.predict(test.x, a)))
            want = float(np.mean(oracle.predict(test.x, a)))
            assert got == pytest.approx(want, abs=0.05)

    def test_exchangeable_agents_agree(self):
        cfg, labeled = _synth([0.05, 0.05], 8000, 0.0, seed=7)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(8))
        model = fit_s_learner(train)
        diff = abs(
            float(np.mean(model.predict(test.x, 0)))
            - float(np.mean(model.predict(test.x, 1)))
        )
        assert diff < 0.01

    def test_unknown_agent_rejected(self):
        _, labeled = _synth([0.01, 0.1], 50, 0.0, seed=9)
        model = fit_s_learner(labeled.dataset)
        with pytest.raises(ValueError):
            model.predict(labeled.dataset.x, 5)

    def test_mlp_family_end_to_end(self):
        cfg, labeled = _synth([0.001, 0.2], 300, 0.0, seed=26)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(27))
        hyper = FitHyper(mlp_width=8, epochs=200)
        model = fit_s_learner(train, model_kind="mlp", hyper=hyper)
        preds = model.predict(test.x, 0)
        assert np.all((preds > 0) & (preds < 1))
        T = effect_matrix(model, test)
        assert np.allclose(T.tau, -T.tau.T)
        # refit is bit-deterministic given the same seed and hyper
        again = fit_s_learner(train, model_kind="mlp", hyper=hyper)
        assert np.array_equal(again.predict(test.x, 0), preds)


class TestTLearner:
    def test_matches_s_learner_structure(self):
        cfg, labeled = _synth([0.001, 0.2], 1500, 0.0, seed=10)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(11))
        model = fit_t_learner(train)
        oracle = TrueResponseModel.for_dataset(cfg, labeled)
        for a in (0, 1):
            got = float(np.mean(model.predict(test.x, a)))
            want = float(np.mean(oracle.predict(test.x, a)))
            assert got == pytest.approx(want, abs=0.05)

    def test_zero_row_agent_rejected(self):
        ds = Dataset(
            x=np.zeros((10, 1)), d=np.zeros(10, dtype=int), p=np.zeros(10, dtype=int),
            agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)],
        )
        with pytest.raises(ValueError, match="no training rows"):
            fit_t_learner(ds)

    def test_small_agent_warns(self):
        x = np.random.default_rng(0).standard_normal((60, 1))
        p = np.array([0] * 55 + [1] * 5)
        d = np.array([0, 1] * 30)
        ds = Dataset(x=x, d=d, p=p, agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)])
        with pytest.warns(UserWarning, match="only 5 training rows"):
            fit_t_learner(ds)

    def test_unknown_agent_rejected(self):
        _, labeled = _synth([0.01, 0.1], 60, 0.0, seed=28)
        model = fit_t_learner(labeled.dataset)
        with pytest.raises(ValueError):
            model.predict(labeled.dataset.x, 9)

    def test_overlap_violation_flagged(self):
        g = Rng(12).generator()
        x = np.concatenate([
            g.normal(-3.0, 0.1, size=(100, 1)), g.normal(3.0, 0.1, size=(100, 1))
        ])
        ds = Dataset(
            x=x, d=(g.uniform(size=200) < 0.2).astype(int), p=np.repeat([0, 1], 100),
            agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)],
        )
        model = fit_t_learner(ds)
        report = model.overlap_report(x)
        assert report[0] > 0.4 and report[1] > 0.4


class TestSIpw:
    def test_unconfounded_weights_near_one(self):
        # Absent confounding the stabilized weights concentrate at 1.
        # Tail covariates amplify the propensity fit's coefficient noise,
        # so the guarantee is distributional, not a hard per-row band.
        _, labeled = _synth([0.001, 0.01, 0.05, 0.2], 400, 0.0, seed=13)
        train, test = split_dataset(labeled.dataset, 0.7, Rng(14))
        fit = fit_s_ipw(train)
        dev = np.abs(fit.weights - 1.0)
        assert float(np.mean(dev < 0.1)) > 0.75
        assert float(fit.weights.mean()) == pytest.approx(1.0, abs=0.01)
        plain = fit_s_learner(train)
        for a in range(4):
            assert float(np.mean(fit.model.predict(test.x, a))) == pytest.approx(
                float(np.mean(plain.predict(test.x, a))), abs=0.02
            )

    def test_stabilized_weights_average_near_one_per_agent(self):
        _, labeled = _synth(SynthConfig().lambdas, 300, 1.0, seed=15)
        train, _ = split_dataset(labeled.dataset, 0.7, Rng(16))
        fit = fit_s_ipw(train)
        for a in range(20):
            rows = train.p == a
            assert float(fit.weights[rows].mean()) == pytest.approx(1.0, abs=0.2)

    def test_raw_mode_scales_weights(self):
        _, labeled = _synth([0.01, 0.1], 200, 0.0, seed=17)
        train, _ = split_dataset(labeled.dataset, 0.7, Rng(18))
        stab = fit_s_ipw(train, stabilized=True)
        raw = fit_s_ipw(train, stabilized=False)
        assert np.allclose(raw.weights, 2.0 * stab.weights)


@pytest.fixture(scope="module")
def oracle_setup():
    cfg, labeled = _synth([0.001, 0.01, 0.05, 0.2], 500, 0.8, seed=19)
    _, test = split_dataset(labeled.dataset, 0.7, Rng(20))
    return cfg, labeled, test, TrueResponseModel.for_dataset(cfg, labeled)


class TestPairwiseAte:

    def test_same_agent_is_exactly_zero(self, oracle_setup):
        _, _, test, oracle = oracle_setup
        assert pairwise_ate(oracle, test, 2, 2) == 0.0

    def test_antisymmetry_exact(self, oracle_setup):
        _, _, test, oracle = oracle_setup
        assert pairwise_ate(oracle, test, 0, 3) == -pairwise_ate(oracle, test, 3, 0)

    def test_oracle_signs_follow_lambda_order(self, oracle_setup):
        cfg, _, test, oracle = oracle_setup
        for p in range(4):
            for q in range(4):
                if p == q:
                    continue
                tau = pairwise_ate(oracle, test, p, q)
                assert np.sign(tau) == np.sign(cfg.lambdas[q] - cfg.lambdas[p])

    def test_identifiability_against_fresh_draws(self, oracle_setup):
        # independent route: integrate the best response over freshly
        # sampled covariates from the same mixture population
        cfg, labeled, test, oracle = oracle_setup
        g = Rng(21).generator()
        m = 200_000
        means = np.array(
            [labeled.dataset.x[labeled.dataset.p == a].mean(axis=0) for a in range(4)]
        )
        comp = g.integers(0, 4, size=m)
        fresh = means[comp] + g.standard_normal((m, 2))
        diff_fresh = oracle.predict(fresh, 0) - oracle.predict(fresh, 3)
        diff_test = oracle.predict(test.x, 0) - oracle.predict(test.x, 3)
        tol = 3.0 * (
            float(np.std(diff_test)) / np.sqrt(test.n_records)
            + float(np.std(diff_fresh)) / np.sqrt(m)
        )
        assert pairwise_ate(oracle, test, 0, 3) == pytest.approx(
            float(diff_fresh.mean()), abs=tol
        )

    def test_sign_preserved_under_bounded_noise(self, oracle_setup):
        # sufficiently accurate estimates cannot flip well-separated pairs
        cfg, _, test, oracle = oracle_setup
        T = effect_matrix(oracle, test)
        eps = 0.4 * float(np.min(np.abs(T.tau[~np.eye(4, dtype=bool)])))
        g = Rng(22).generator()
        for _ in range(200):
            noise = g.uniform(-eps, eps, size=(4, 4))
            noisy = T.tau + (noise - noise.T) / 2
            for i in range(4):
                for j in range(4):
                    if abs(T.tau[i, j]) > eps:
                        assert np.sign(noisy[i, j]) == np.sign(T.tau[i, j])


class TestWeightedAveraging:
    def test_uniform_weights_match_unweighted(self, oracle_setup):
        _, _, test, oracle = oracle_setup
        ones = np.ones(test.n_records)
        assert pairwise_ate(oracle, test, 0, 2, weights=ones) == pytest.approx(
            pairwise_ate(oracle, test, 0, 2), rel=1e-12
        )
        Tw = effect_matrix(oracle, test, weights=ones)
        T = effect_matrix(oracle, test)
        assert np.allclose(Tw.tau, T.tau, atol=1e-15)

    def test_skewed_weights_move_the_average(self, oracle_setup):
        _, _, test, oracle = oracle_setup
        # weight mass onto the rows where the pairwise gap is largest
        diff = np.abs(oracle.predict(test.x, 0) - oracle.predict(test.x, 3))
        w = np.where(diff > np.median(diff), 10.0, 0.1)
        weighted = pairwise_ate(oracle, test, 0, 3, weights=w)
        unweighted = pairwise_ate(oracle, test, 0, 3)
        assert weighted > unweighted


def _brute_force_match_cost(a, b):
    import itertools

    m, n = len(a), len(b)
    if m > n:
        a, b = b, a
        m, n = n, m
    best = np.inf
    for combo in itertools.permutations(range(n), m):
        best = min(best, sum(abs(a[i] - b[j]) for i, j in enumerate(combo)))
    return best


class TestOptimalMatchCost:
    def test_matches_exhaustive_search(self):
        from gamerank.estimators import _optimal_match_cost

        g = Rng(29).generator()
        for _ in range(25):
            m = int(g.integers(1, 5))
            n = int(g.integers(m, 6))
            a = g.uniform(0, 1, size=m)
            b = g.uniform(0, 1, size=n)
            assert _optimal_match_cost(a, b) == pytest.approx(
                _brute_force_match_cost(a, b), abs=1e-12
            )


class TestEffectMatrix:
    def test_antisymmetrized_on_construction(self):
        raw = np.array([[0.5, 1.0], [0.0, -0.3]])
        T = EffectMatrix(tau=raw, agent_ids=(0, 1))
        assert np.allclose(T.tau, -T.tau.T)
        assert T.tau[0, 0] == 0.0 and T.tau[1, 1] == 0.0
        assert T.tau[0, 1] == pytest.approx(0.5)

    def test_csv_roundtrip(self, tmp_path):
        g = Rng(23).generator()
        T = EffectMatrix(tau=g.standard_normal((5, 5)), agent_ids=tuple(range(5)))
        path = tmp_path / "effects.csv"
        T.write_csv(path)
        back = EffectMatrix.read_csv(path)
        assert back.agent_ids == T.agent_ids
        assert np.allclose(back.tau, T.tau, atol=1e-8)


class TestPsm:
    def _two_agent_ds(self, n0, n1, seed=24, rate0=0.2, rate1=0.2):
        g = Rng(seed).generator()
        x = g.standard_normal((n0 + n1, 2))
        p = np.array([0] * n0 + [1] * n1)
        rates = np.where(p == 0, rate0, rate1)
        d = (g.uniform(size=n0 + n1) < rates).astype(int)
        return Dataset(x=x, d=d, p=p, agents=[AgentSpec(0, 1.0), AgentSpec(1, 1.0)])

    def test_equal_counts_all_matched(self):
        ds = self._two_agent_ds(80, 80)
        prop = fit_propensity(ds)
        _, diag = psm_ate(prop, ds, 0, 1)
        assert diag.n_matched == 80
        assert diag.n_dropped_p == 0 and diag.n_dropped_p2 == 0

    def test_unequal_counts_drop_excess(self):
        ds = self._two_agent_ds(100, 60)
        prop = fit_propensity(ds)
        _, diag = psm_ate(prop, ds, 0, 1)
        assert diag.n_matched == 60
        assert diag.n_dropped_p == 40 and diag.n_dropped_p2 == 0
        assert diag.greedy_cost >= diag.optimal_cost - 1e-12

    def test_missing_agent_rejected(self):
        ds = self._two_agent_ds(10, 10)
        prop = fit_propensity(ds)
        with pytest.raises(ValueError):
            psm_ate(prop, ds, 0, 3)

    def test_oracle_quality_sign_agreement_without_confounding(self):
        # effect sizes chosen so pairs are either well separated (>0.01)
        # or negligible; matched-difference signs must track lambda order
        cfg, labeled = _synth([0.001, 0.004, 0.01, 0.16], 2000, 0.0, seed=25)
        ds = labeled.dataset
        prop = fit_propensity(ds)
        oracle = TrueResponseModel.for_dataset(cfg, labeled)
        checked = agreed = 0
        for p in range(4):
            for q in range(p + 1, 4):
                tau_true = pairwise_ate(oracle, ds, p, q)
                if abs(tau_true) <= 0.01:
                    continue
                tau_psm, _ = psm_ate(prop, ds, p, q)
                checked += 1
                agreed += int(np.sign(tau_psm) == np.sign(tau_true))
        assert checked >= 3
        assert agreed / checked >= 0.9
