import math

import numpy as np
import pytest

from ipdist.oracle import Matrix, handle_pair
from ipdist.rng import Streams
from ipdist.rowdist import (
    RowDistParams, SetEmptiness, SubsetBatch, bernoulli_subsets, default_reps, dist_bet_rows,
    exact_mismatch_set, identity_test, identity_tests, restrict_dist_bet_rows, subset_size_estimate,
)
from ipdist.refcheck import exact_neq_set

from conftest import planted_rows


def test_params_defaults():
    p = RowDistParams(0.25, 0.1)
    assert p.trials_for(1024) == math.ceil(12 * math.log(2 * 1024 / 0.1) / 0.25**2)
    assert p.query_budget(1024) == 4 * 10 * p.trials_for(1024)
    assert p.reps_for(1024) == math.ceil(math.log2(1 / p.test_delta(1024))) + 2
    assert p.exact_limit_value() == 16
    assert default_reps(0.25) == 4
    with pytest.raises(ValueError):
        RowDistParams(0, 0.1)
    with pytest.raises(ValueError):
        RowDistParams(0.5, 1.0)


def test_subset_batch_constructors():
    b = SubsetBatch.from_ranges([0, 3], [2, 6])
    assert [b.members(q).tolist() for q in range(2)] == [[0, 1], [3, 4, 5]]
    c = SubsetBatch.from_lists([[4], [], [1, 2]])
    assert c.lengths().tolist() == [1, 0, 2]


def test_bernoulli_subsets_rates():
    gen = np.random.default_rng(3)
    for p in (0.5, 0.125, 1 / 64):
        b = bernoulli_subsets(1024, p, 400, gen)
        assert b.indices.min() >= 0 and b.indices.max() < 1024
        assert abs(b.lengths().mean() - 1024 * p) < 6 * math.sqrt(1024 * p / 400) + 0.5
        # no element repeats inside a subset
        assert all(np.unique(b.members(q)).size == b.lengths()[q] for q in range(20))


def test_identity_equal_rows_always_identical():
    A, _ = planted_rows(32, {})
    h = handle_pair(A, A)
    s = Streams.from_seed(1)
    assert all(identity_test(h, i % 32, range(32), 0.1, s) for i in range(200))


def test_identity_mismatch_outside_support():
    A, B = planted_rows(16, {3: [10]})
    h = handle_pair(A, B)
    s = Streams.from_seed(2)
    assert all(identity_test(h, 3, range(8), 0.1, s) for _ in range(100))
    assert identity_test(h, 3, [], 0.1, s)


def test_identity_detects_single_mismatch():
    A, B = planted_rows(16, {3: [5]})
    h = handle_pair(A, B)
    batch = SubsetBatch.from_lists([range(16)] * 10000)
    hits = identity_tests(h, 3, batch, 0.1, np.random.default_rng(0))
    assert hits.mean() <= 0.1 + 3 * math.sqrt(0.09 / 10000)


@pytest.mark.parametrize("reps", [1, 2, 4])
def test_false_identical_rate_within_bound(reps):
    N = 10000
    batch = SubsetBatch.from_lists([range(16)] * N)
    bound = 2.0**-reps
    sd = math.sqrt(bound * (1 - bound) / N)
    A, B = planted_rows(16, {0: [7]})
    single = identity_tests(handle_pair(A, B), 0, batch, 0.5, np.random.default_rng(reps), reps=reps).mean()
    assert single <= bound + 3 * sd
    # two unit differences cancel with probability exactly 1/2 per vector: the bound is attained
    A, B = planted_rows(16, {0: [3, 7]})
    pair = identity_tests(handle_pair(A, B), 0, batch, 0.5, np.random.default_rng(reps), reps=reps).mean()
    assert abs(pair - bound) <= 3 * sd


def test_subset_size_empty_and_full():
    s = Streams.from_seed(0)
    assert subset_size_estimate(SetEmptiness([], 64), 64, 0.25, 0.1, s) == 0.0
    est = subset_size_estimate(SetEmptiness(range(64), 64), 64, 0.25, 0.1, s)
    assert 0.75 * 64 <= est <= 1.25 * 64


def test_subset_size_planted_37():
    gen = np.random.default_rng(5)
    X = gen.choice(1024, 37, replace=False)
    ok = sum(
        abs(subset_size_estimate(SetEmptiness(X, 1024), 1024, 0.25, 0.1, seed) / 37 - 1) <= 0.25
        for seed in range(200)
    )
    assert ok >= 180


def test_subset_size_sampling_regime_query_budget():
    oracle = SetEmptiness(range(0, 1024, 2), 1024)
    p = RowDistParams(0.25, 0.1)
    subset_size_estimate(oracle, 1024, 0.25, 0.1, 3)
    assert oracle.queries <= p.query_budget(1024)


def test_restricted_examples():
    A, B = planted_rows(256, {0: [], 1: [77]}, seed=1)
    h = handle_pair(A, B)
    p = RowDistParams(0.25, 0.1)
    assert restrict_dist_bet_rows(h, 0, range(256), p, 0) == 0
    assert restrict_dist_bet_rows(h, 1, [], p, 0) == 0
    one = restrict_dist_bet_rows(h, 1, range(256), p, 0)
    assert 0.75 <= one <= 1.25
    assert restrict_dist_bet_rows(h, 1, range(256), RowDistParams(0.25, 0.1, rounding=True), 0) == 1


def test_restricted_twenty_inside_support():
    gen = np.random.default_rng(9)
    S = np.sort(gen.choice(256, 128, replace=False))
    inside = gen.choice(S, 20, replace=False)
    outside = gen.choice(np.setdiff1d(np.arange(256), S), 10, replace=False)
    A, B = planted_rows(256, {4: np.concatenate([inside, outside])})
    h = handle_pair(A, B)
    p = RowDistParams(0.25, 0.1)
    ok = sum(abs(restrict_dist_bet_rows(h, 4, S, p, seed) / 20 - 1) <= 0.25 for seed in range(100))
    assert ok >= 90


def test_full_row_examples():
    n = 64
    h = handle_pair(Matrix.zeros(n), Matrix.ones(n))
    p = RowDistParams(0.25, 0.1)
    for seed in range(5):
        assert 48 <= dist_bet_rows(h, seed, p, seed) <= 80
    A, B = planted_rows(n, {2: [1, 9, 33, 40, 41]})
    assert dist_bet_rows(handle_pair(A, B), 2, p, 0) == 5
    assert dist_bet_rows(handle_pair(A, A), 2, p, 0) == 0


def test_exact_mismatch_examples():
    A, B = planted_rows(16, {3: [2, 5, 9]})
    h = handle_pair(A, B)
    assert exact_mismatch_set(h, 0, range(16), 0.01, 0) == frozenset()
    assert exact_mismatch_set(h, 3, range(16), 0.01, 0) == frozenset({2, 5, 9})
    allrows = handle_pair(Matrix.zeros(16), Matrix.ones(16))
    S = [1, 4, 6, 7, 15]
    assert exact_mismatch_set(allrows, 8, S, 0.01, 0) == frozenset(S)


def test_exact_mismatch_subset_even_with_one_rep():
    # a single sign vector misses often, but never invents a mismatch
    A, B = planted_rows(64, {0: range(0, 64, 3)})
    truth = exact_neq_set(A, B, 0)
    h = handle_pair(A, B)
    from ipdist.rowdist import RowEmptiness, _descend
    for seed in range(50):
        em = RowEmptiness(h, 0, np.arange(64), 0.5, 1, np.random.default_rng(seed))
        found = _descend(em, 64, None)
        assert set(found.tolist()) <= truth


def test_monotone_truth_under_restriction():
    gen = np.random.default_rng(0)
    A, B = planted_rows(32, {0: gen.choice(32, 10, replace=False)})
    neq = exact_neq_set(A, B, 0)
    for _ in range(100):
        S2 = set(gen.choice(32, 20, replace=False).tolist())
        S1 = set(list(S2)[:10])
        assert len(neq & S1) <= len(neq & S2)
