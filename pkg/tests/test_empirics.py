import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrfq.empirics import (
    EmpiricalProbCache, SampleIndex, brute_force_v_hat, empirical_prob, threshold_test, true_v, v_hat,
)
from mrfq.model import CliqueTensor, MrfModel, neighborhoods, random_model
from mrfq.sampler import SampleSet, exact_joint, sample_exact

from conftest import zb


def test_empirical_prob_constant_column():
    s = SampleSet(3, np.array([[1, -1, 1]] * 6))
    assert empirical_prob(s, (1,)) == {(-1,): 1.0}


def test_empirical_prob_direct_count():
    s = SampleSet(2, np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]]))
    assert empirical_prob(s, (0,))[(1,)] == 0.5


def test_empirical_prob_errors():
    s = SampleSet(2, np.array([[1, 1]]))
    with pytest.raises(ValueError):
        empirical_prob(s, ())
    with pytest.raises(ValueError):
        empirical_prob(s, (0, 0))


def test_empirical_prob_vs_exact_marginal():
    m = random_model(3, 2, 2, 0.3, 1.0, seed=4)
    t = exact_joint(m)
    M = 50_000
    s = sample_exact(t, M, seed=2)
    emp = empirical_prob(s, (0, 2))
    exact = t.marginal((0, 2))
    assert max(abs(emp.get(k, 0.0) - p) for k, p in exact.items()) <= 4 / math.sqrt(M)


def test_v_hat_independent_is_small():
    m = MrfModel(4, 2, tuple(CliqueTensor((i,), [0.0, 0.0]) for i in range(4)), 0.0, 1.0)
    s = sample_exact(exact_joint(m), 100_000, seed=5)
    cache = EmpiricalProbCache(s, 0, ())
    for l in (1, 2):
        for cand in itertools.combinations(range(1, 4), l):
            assert cache.v_hat(cand) <= 0.05


def test_v_hat_perfectly_correlated_pair_from_contingency_table():
    # x_u == x_i always; counts: (+,+)=30, (-,-)=70
    data = np.array([[1, 1]] * 30 + [[-1, -1]] * 70)
    s = SampleSet(2, data)
    pu = {1: 0.3, -1: 0.7}
    # only the two observed diagonal cells contribute
    want = sum(pu[a] * pu[a] * abs(pu[a] - pu[a] * pu[a]) for a in (1, -1))
    assert v_hat(s, 0, (), (1,)) == pytest.approx(want, abs=1e-15)
    assert brute_force_v_hat(s, 0, (), (1,)) == pytest.approx(want, abs=1e-15)


def test_v_hat_errors():
    s = SampleSet(3, np.array([[1, 1, -1]]))
    with pytest.raises(ValueError):
        v_hat(s, 0, (1,), (1,))
    with pytest.raises(ValueError):
        v_hat(s, 0, (), (0,))
    with pytest.raises(ValueError):
        v_hat(SampleSet(3, np.zeros((0, 3))), 0, (), (1,))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(1, 300))
def test_v_hat_equals_naive_enumeration(seed, m):
    rng = np.random.default_rng(seed)
    model = random_model(6, 3, 3, 0.3, 1.0, seed=seed)
    s = sample_exact(exact_joint(model), m, seed=seed)
    index = SampleIndex(s)
    u = int(rng.integers(6))
    rest = [v for v in range(6) if v != u]
    rng.shuffle(rest)
    k = int(rng.integers(0, 3))
    S, pool = tuple(sorted(rest[:k])), rest[k:]
    I = tuple(sorted(pool[: int(rng.integers(1, 3))]))
    cache = EmpiricalProbCache(index, u, S)
    assert cache.v_hat(I) == brute_force_v_hat(s, u, S, I)
    assert cache.v_hat(I) >= 0
    assert cache.consistent(I)


def test_v_hat_zero_for_constant_columns():
    rng = np.random.default_rng(0)
    data = rng.choice([-1, 1], size=(200, 4))
    data[:, 2] = 1
    data[:, 3] = -1
    assert v_hat(SampleSet(4, data), 0, (1,), (2, 3)) == 0.0


def test_context_counts(fig1_samples):
    cache = EmpiricalProbCache(fig1_samples, 0, (1, 4))
    ctx = cache.context
    assert ctx.u == 0 and ctx.s_set == (1, 4)
    assert sum(ctx.s_configs.values()) == fig1_samples.m_count
    assert ctx.s <= min(4, fig1_samples.m_count)


def test_breakdown_sums_to_v_hat(fig1_samples):
    cache = EmpiricalProbCache(fig1_samples, 0, (1,))
    rows = cache.breakdown((2, 4))
    assert math.fsum(r["term"] for r in rows) == cache.v_hat((2, 4))


def test_true_v_independence_is_zero():
    m = MrfModel(4, 2, tuple(CliqueTensor((i,), [0.2, -0.1]) for i in range(4)), 0.0, 1.0)
    t = exact_joint(m)
    assert true_v(t, 0, (1,), (2, 3)) == pytest.approx(0.0, abs=1e-15)


def test_true_v_figure1_edge_13_positive(fig1_table):
    assert true_v(fig1_table, 0, (), zb(3)) > 0


def test_true_v_markov_blanket_zero(fig1, fig1_table):
    nbrs, _ = neighborhoods(fig1)
    assert nbrs[0] == set(zb(2, 3, 5))
    assert true_v(fig1_table, 0, zb(2, 3, 5), zb(4)) <= 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_markov_zero_random_models(seed):
    m = random_model(7, 3, 3, 0.3, 1.0, seed=seed)
    t = exact_joint(m)
    nbrs, _ = neighborhoods(m)
    for u in range(7):
        others = [v for v in range(7) if v != u and v not in nbrs[u]]
        for l in (1, 2):
            for I in itertools.combinations(others, l):
                assert true_v(t, u, tuple(sorted(nbrs[u])), I) <= 1e-10


def test_true_v_matches_v_hat_in_the_limit(fig1_table):
    s = sample_exact(fig1_table, 400_000, seed=1)
    for S, I in [((), (2,)), ((1,), (2, 4)), ((1, 2), (3,))]:
        assert abs(v_hat(s, 0, S, I) - true_v(fig1_table, 0, S, I)) < 0.01


def test_threshold_test():
    assert threshold_test(0.5, 0.1)
    assert not threshold_test(0.1, 0.1)
    with pytest.raises(ValueError):
        threshold_test(0.1, 0.0)


def test_threshold_at_markov_blanket(fig1_table):
    assert not threshold_test(true_v(fig1_table, 0, zb(2, 3, 5), zb(4)), 1e-9)


def test_error_shrinks_with_m(fig1_table):
    big = sample_exact(fig1_table, 64_000, seed=3)
    triples = [(0, (), (2,)), (1, (0,), (3,)), (3, (1,), (2, 4)), (4, (), (0, 1))]
    medians = []
    for M in (1000, 4000, 16000, 64000):
        sub = SampleSet(5, big.data[:M])
        errs = [abs(v_hat(sub, u, S, I) - true_v(fig1_table, u, S, I)) for u, S, I in triples]
        medians.append(float(np.median(errs)))
    assert medians[-1] < medians[0]
