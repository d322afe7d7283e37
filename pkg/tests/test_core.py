import numpy as np
import pytest

from gamerank.core import (
    AgentSpec,
    Dataset,
    Ranking,
    Rng,
    read_dataset_csv,
    split_dataset,
    write_dataset_csv,
)


def _toy_dataset(n=100, agents=4, seed=0, hidden=False):
    g = Rng(seed).generator()
    x = g.standard_normal((n, 2))
    p = g.integers(0, agents, size=n)
    d = (g.uniform(size=n) < 0.3).astype(int)
    kwargs = {}
    if hidden:
        alpha = g.uniform(0.1, 0.4, size=n)
        kwargs = dict(
            d_star=(g.uniform(size=n) < alpha).astype(float),
            alpha_star=alpha,
            alpha_gamed=np.minimum(alpha + 0.1, 1.0),
        )
    return Dataset(x=x, d=d, p=p, agents=[AgentSpec(i, 0.1 * (i + 1)) for i in range(agents)], **kwargs)


class TestTypes:
    def test_agent_spec_validation(self):
        with pytest.raises(ValueError):
            AgentSpec(-1, 0.5)
        with pytest.raises(ValueError):
            AgentSpec(0, 0.0)
        assert AgentSpec(0).lam is None

    def test_dataset_validation(self):
        ds = _toy_dataset()
        assert ds.covariate_dim == 2
        with pytest.raises(ValueError):
            Dataset(x=np.zeros((3, 2)), d=[0, 1, 2], p=[0, 0, 0], agents=[AgentSpec(0)])
        with pytest.raises(ValueError):
            Dataset(x=np.zeros((3, 2)), d=[0, 1, 1], p=[0, 0, 5], agents=[AgentSpec(0)])
        with pytest.raises(ValueError):
            Dataset(x=np.zeros(3), d=[0, 1, 1], p=[0, 0, 0], agents=[AgentSpec(0)])

    def test_dataset_arrays_immutable(self):
        ds = _toy_dataset()
        with pytest.raises(ValueError):
            ds.x[0, 0] = 99.0

    def test_record_view(self):
        ds = _toy_dataset(hidden=True)
        rec = ds.record(3)
        assert rec.d == ds.d[3] and rec.p == ds.p[3]
        assert rec.alpha_gamed == pytest.approx(ds.alpha_gamed[3])

    def test_ranking_must_be_permutation(self):
        Ranking((2, 0, 1))
        with pytest.raises(ValueError):
            Ranking((0, 0, 1))
        with pytest.raises(ValueError):
            Ranking((1, 2, 3))

    def test_ranking_random_constructions(self):
        g = Rng(7).generator()
        for _ in range(50):
            n = int(g.integers(1, 30))
            r = Ranking(tuple(int(i) for i in g.permutation(n)))
            assert sorted(r.order) == list(range(n))
            agent = int(g.integers(0, n))
            assert r.order[r.position_of(agent)] == agent


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(123).generator().standard_normal(10)
        b = Rng(123).generator().standard_normal(10)
        assert np.array_equal(a, b)

    def test_substreams_differ_and_are_stable(self):
        root = Rng(9)
        s1 = root.substream("stage", 0).generator().standard_normal(5)
        s2 = root.substream("stage", 1).generator().standard_normal(5)
        s1_again = root.substream("stage", 0).generator().standard_normal(5)
        assert not np.array_equal(s1, s2)
        assert np.array_equal(s1, s1_again)

    def test_string_and_int_labels(self):
        assert Rng(1).substream("a").path != Rng(1).substream("b").path
        assert Rng(1).substream(3).path == Rng(1).substream(3).path


class TestSplit:
    def test_sizes_7030(self):
        ds = _toy_dataset(n=10000, agents=20, seed=1)
        train, test = split_dataset(ds, 0.7, Rng(5))
        assert train.n_records == 7000 and test.n_records == 3000

    def test_small_floor(self):
        ds = _toy_dataset(n=10, agents=2, seed=2)
        train, test = split_dataset(ds, 0.7, Rng(5))
        assert train.n_records == 7 and test.n_records == 3
        # union equals the original record multiset
        both = np.sort(np.concatenate([train.x[:, 0], test.x[:, 0]]))
        assert np.array_equal(both, np.sort(ds.x[:, 0]))

    def test_deterministic(self):
        ds = _toy_dataset(n=500, agents=5, seed=3)
        t1, _ = split_dataset(ds, 0.7, Rng(11).substream("split"))
        t2, _ = split_dataset(ds, 0.7, Rng(11).substream("split"))
        assert np.array_equal(t1.x, t2.x) and np.array_equal(t1.p, t2.p)

    def test_contract_errors(self):
        ds = _toy_dataset(n=20)
        with pytest.raises(ValueError):
            split_dataset(ds, 1.0, Rng(0))
        empty = Dataset(x=np.zeros((0, 2)), d=[], p=[], agents=[AgentSpec(0)])
        with pytest.raises(ValueError):
            split_dataset(empty, 0.7, Rng(0))

    def test_warns_when_agent_missing_from_split(self):
        # one agent with a single record cannot appear in both splits
        x = np.zeros((50, 1))
        p = np.array([0] * 49 + [1])
        d = np.zeros(50, dtype=int)
        ds = Dataset(x=x, d=d, p=p, agents=[AgentSpec(0), AgentSpec(1)])
        with pytest.warns(UserWarning, match="no records"):
            split_dataset(ds, 0.5, Rng(2))


class TestCsvRoundtrip:
    def test_plain_roundtrip(self, tmp_path):
        ds = _toy_dataset(n=40, agents=3, seed=4)
        path = tmp_path / "ds.csv"
        write_dataset_csv(ds, path)
        header = path.read_text().splitlines()[0]
        assert header == "agent_id,d,x0,x1"
        back = read_dataset_csv(path)
        assert np.array_equal(back.d, ds.d) and np.array_equal(back.p, ds.p)
        assert np.allclose(back.x, ds.x, atol=1e-8)
        assert back.d_star is None

    def test_hidden_roundtrip(self, tmp_path):
        ds = _toy_dataset(n=40, agents=3, seed=5, hidden=True)
        path = tmp_path / "ds.csv"
        write_dataset_csv(ds, path)
        header = path.read_text().splitlines()[0]
        assert header.endswith("d_star,alpha_star,alpha_gamed")
        back = read_dataset_csv(path, lambdas=[0.1, 0.2, 0.3])
        assert np.allclose(back.alpha_gamed, ds.alpha_gamed, atol=1e-8)
        assert back.agents[1].lam == pytest.approx(0.2)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("agent_id,d,x0\n")
        with pytest.raises(ValueError):
            read_dataset_csv(path)
