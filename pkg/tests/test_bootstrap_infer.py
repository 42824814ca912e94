import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankvar.bootstrap_infer import (
    Binomial,
    MannWhitneyIndex,
    Replicates,
    TwoClass,
    allocate_classes,
    bootstrap_rank_intervals,
    bootstrap_rank_samples,
    item_statistics,
    location_stat,
    mann_whitney,
    mann_whitney_columns,
    percentile_bounds,
    rank_items,
    sort_intervals,
    top_set_probability,
)
from rankvar.errors import DataError, DomainError, ResourceError


def brute_mann_whitney(x, y):
    lt = sum(a < b for a in x for b in y)
    gt = sum(a > b for a in x for b in y)
    return max(lt, gt)


def separated_twoclass(seed=0, p=30, m0=15, m1=20, effects=(6.0, 5.0, 4.0)):
    rng = np.random.default_rng(seed)
    labels = np.r_[np.zeros(m0, int), np.ones(m1, int)]
    X = rng.normal(size=(m0 + m1, p))
    for g, e in enumerate(effects):
        X[labels == 1, g] += e
    return TwoClass(labels, X, [f"g{i}" for i in range(p)])


# -- statistics ------------------------------------------------------------------


@pytest.mark.parametrize("x,y,expected", [((1, 2), (3, 4), 4), ((1, 3), (2, 4), 3), ((1, 2), (1, 2), 1)])
def test_mann_whitney_examples(x, y, expected):
    assert mann_whitney(x, y) == expected


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=12), st.lists(st.integers(0, 6), min_size=1, max_size=12))
def test_mann_whitney_brute_force(x, y):
    assert mann_whitney(x, y) == brute_mann_whitney(x, y)
    assert mann_whitney(x, y) >= 0


def test_mann_whitney_columns_matches_pairs():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 4, size=(13, 9)).astype(float)
    labels = np.r_[np.zeros(5, int), np.ones(8, int)]
    expected = [brute_mann_whitney(X[labels == 0, j], X[labels == 1, j]) for j in range(9)]
    np.testing.assert_array_equal(mann_whitney_columns(X, labels), expected)


@pytest.mark.parametrize("ties", [False, True])
def test_weighted_index_matches_materialized_resample(ties):
    rng = np.random.default_rng(2)
    m, p = 25, 40
    X = rng.integers(0, 5, size=(m, p)).astype(float) if ties else rng.normal(size=(m, p))
    labels = (np.arange(m) >= 10).astype(int)
    index = MannWhitneyIndex(X, labels)
    for _ in range(5):
        rows = np.r_[rng.choice(10, 10), rng.choice(np.arange(10, m), 15)]
        weights = np.bincount(rows, minlength=m)
        np.testing.assert_array_equal(index.statistics(weights), mann_whitney_columns(X[rows], labels[rows]))


def test_location_stat_examples():
    assert location_stat("mean", [1, 2, 3]) == 2
    assert location_stat("median", [1, 2, 3, 4]) == 2
    assert location_stat("median", [4, 1, 3]) == 3
    assert location_stat("proportion", (9, 12)) == 0.75
    assert location_stat("mann_whitney", ([1, 2], [3, 4])) == 4
    with pytest.raises(DomainError):
        location_stat("mode", [1])
    with pytest.raises(DomainError):
        location_stat("mean", [])


def test_kind_dataset_mismatch():
    reps = Replicates(["a"], [[1.0]])
    with pytest.raises(DomainError):
        item_statistics(reps, "proportion")
    with pytest.raises(DomainError):
        item_statistics(Binomial(["a"], [1], [2]), "mean")
    with pytest.raises(DomainError):
        item_statistics(separated_twoclass(), "median")


def test_rank_items_examples():
    assert list(rank_items([3, 1, 2])[1]) == [3, 1, 2]
    assert list(rank_items([5, 5])[1]) == [1, 2]
    assert list(rank_items([3, 1, 2], "descending")[1]) == [1, 3, 2]
    assert list(rank_items([5, 5], "descending")[1]) == [1, 2]


def test_dataset_validation():
    with pytest.raises(DataError):
        Replicates(["a", "a"], [[1], [2]])
    with pytest.raises(DataError):
        Replicates(["a"], [[]])
    with pytest.raises(DataError):
        Binomial(["a"], [13], [12])
    with pytest.raises(DataError):
        TwoClass([0, 0], np.zeros((2, 1)), ["g"])
    rep = Replicates(["a", "b"], [[1, 2], [3]])
    assert list(rep.sizes) == [2, 1] and rep.n_ratio == 2.0


def test_allocate_classes():
    labels = np.r_[np.zeros(22, int), np.ones(40, int)]
    assert allocate_classes(labels, 62) == (22, 40)
    assert sum(allocate_classes(labels, 250)) == 250
    assert allocate_classes(labels, 250) == (89, 161)
    assert allocate_classes(np.r_[np.zeros(1, int), np.ones(99, int)], 3) == (1, 2)
    with pytest.raises(DomainError):
        allocate_classes(labels, 1)


# -- intervals ---------------------------------------------------------------------


def test_disjoint_supports():
    ds = Replicates(["A", "B"], [[0.0, 0.5, 1.0], [2.0, 3.0, 2.5, 4.0]])
    for seed in (0, 1, 2):
        ivs = bootstrap_rank_intervals(ds, "mean", B=200, seed=seed)
        assert [(iv.lower, iv.upper) for iv in ivs] == [(1, 1), (2, 2)]


def test_enumeration_example_matches_independent_oracle():
    a, b = (0.0, 2.0), (1.0, 1.0)
    # A wins ties because it has the smaller index
    ranks = sorted(1 if np.mean(ra) <= np.mean(rb) else 2 for ra in itertools.product(a, repeat=2) for rb in itertools.product(b, repeat=2))
    assert ranks.count(1) / len(ranks) == 0.75
    k_lo, k_hi = int(np.ceil(0.05 * len(ranks))), int(np.ceil(0.95 * len(ranks)))
    oracle = (ranks[k_lo - 1], ranks[k_hi - 1])
    assert oracle == (1, 2)

    ds = Replicates(["A", "B"], [a, b])
    ivs = bootstrap_rank_intervals(ds, "mean", level=0.9, exhaustive=True)
    assert (ivs[0].lower, ivs[0].upper) == oracle
    assert ivs[0].B == 16
    samples = bootstrap_rank_samples(ds, "mean", B=None, exhaustive=True)
    assert np.mean(samples[:, 0] == 1) == 0.75


def test_exhaustive_limits():
    with pytest.raises(ResourceError):
        bootstrap_rank_intervals(Replicates(["A"], [np.arange(9.0)]), "mean", exhaustive=True)
    with pytest.raises(DomainError):
        bootstrap_rank_intervals(Binomial(["a"], [1], [2]), "proportion", exhaustive=True)


def test_percentile_bounds_order_statistics():
    samples = np.arange(1, 101)[:, None]
    lo, hi = percentile_bounds(samples, 0.9)
    assert (lo[0], hi[0]) == (5, 95)
    lo, hi = percentile_bounds(np.arange(1, 11)[:, None], 0.5)
    assert (lo[0], hi[0]) == (3, 8)


def normal_means(seed, p=50, n=20, noise=1e-3):
    rng = np.random.default_rng(seed)
    theta = rng.permutation(np.linspace(0, 10, p))
    samples = [t + noise * rng.normal(size=n) for t in theta]
    return Replicates([f"i{k}" for k in range(p)], samples), rank_items(theta)[1]


def test_tiny_noise_covers_truth_and_shrinks_with_m():
    ds, truth = normal_means(3, noise=0.05)
    ivs = bootstrap_rank_intervals(ds, "mean", B=300, seed=1)
    assert all(iv.lower <= t <= iv.upper for iv, t in zip(ivs, truth))
    ds, _ = normal_means(3, noise=0.3)
    wide = bootstrap_rank_intervals(ds, "mean", B=300, seed=1, m=2)
    narrow = bootstrap_rank_intervals(ds, "mean", B=300, seed=1, m=20)
    assert sum(iv.upper - iv.lower for iv in narrow) < sum(iv.upper - iv.lower for iv in wide)


def test_interval_sanity_and_nesting():
    rng = np.random.default_rng(4)
    ds = Replicates([f"i{k}" for k in range(25)], [rng.normal(k / 10, 1, size=rng.integers(3, 15)) for k in range(25)])
    outer = bootstrap_rank_intervals(ds, "median", B=400, level=0.99, seed=7)
    inner = bootstrap_rank_intervals(ds, "median", B=400, level=0.5, seed=7)
    for o, i in zip(outer, inner):
        assert 1 <= o.lower <= i.lower <= i.upper <= o.upper <= ds.p
        assert o.point_rank == i.point_rank


def test_degenerate_data_gives_point_intervals():
    ds = Replicates(["a", "b", "c", "d"], [[2.0] * 3, [1.0] * 5, [2.0], [0.0] * 2])
    ivs = bootstrap_rank_intervals(ds, "mean", B=100, seed=0)
    assert [(iv.lower, iv.upper) for iv in ivs] == [(iv.point_rank, iv.point_rank) for iv in ivs]
    assert [iv.point_rank for iv in ivs] == [3, 2, 4, 1]


def test_monotone_transform_invariance():
    rng = np.random.default_rng(5)
    raw = [rng.exponential(size=9) + k / 20 for k in range(15)]
    ids = [f"i{k}" for k in range(15)]
    a = bootstrap_rank_intervals(Replicates(ids, raw), "median", B=200, seed=3)
    b = bootstrap_rank_intervals(Replicates(ids, [np.log(x) for x in raw]), "median", B=200, seed=3)
    assert a == b
    c = bootstrap_rank_intervals(Replicates(ids, raw), "mean", B=200, seed=3)
    d = bootstrap_rank_intervals(Replicates(ids, [4.0 * x - 1.0 for x in raw]), "mean", B=200, seed=3)
    assert c == d
    ds = separated_twoclass(1)
    t = TwoClass(ds.labels, np.exp(ds.matrix), ds.item_ids)
    assert bootstrap_rank_intervals(ds, "mann_whitney", B=100, seed=2) == bootstrap_rank_intervals(t, "mann_whitney", B=100, seed=2)
    assert top_set_probability(ds, j_list=(1, 3), B=100, seed=2) == top_set_probability(t, j_list=(1, 3), B=100, seed=2)


def test_binomial_intervals():
    ds = Binomial(["A", "B", "C"], [9, 1, 500], [12, 12, 1000])
    ivs = bootstrap_rank_intervals(ds, "proportion", B=300, seed=2, direction="descending")
    assert [iv.point_rank for iv in ivs] == [1, 3, 2]
    assert ivs[1].lower == ivs[1].upper == 3
    assert [iv.m for iv in ivs] == [12, 12, 1000]
    assert ivs[0].lower == 1 and ivs[2].upper == 2


def test_worker_and_seed_determinism():
    ds, _ = normal_means(8, noise=1.0)
    a = bootstrap_rank_intervals(ds, "mean", B=300, seed=5, workers=1)
    b = bootstrap_rank_intervals(ds, "mean", B=300, seed=5, workers=8)
    assert a == b
    assert bootstrap_rank_intervals(ds, "mean", B=300, seed=6) != a


def test_errors_and_warnings():
    ds = Replicates(["a", "b"], [[1.0, 2.0], [3.0]])
    with pytest.raises(ResourceError):
        bootstrap_rank_intervals(ds, "mean", m=10**7 + 1)
    with pytest.raises(DomainError):
        bootstrap_rank_intervals(ds, "mean", level=1.0)
    with pytest.warns(UserWarning, match="small"):
        bootstrap_rank_intervals(ds, "mean", B=20)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bootstrap_rank_intervals(ds, "mean", B=100)


def test_sort_intervals():
    ds, _ = normal_means(9, p=10, noise=2.0)
    ivs = bootstrap_rank_intervals(ds, "mean", B=200, seed=0)
    assert [iv.point_rank for iv in sort_intervals(ivs)] == list(range(1, 11))
    by_lower = sort_intervals(ivs, "lower")
    assert all(a.lower <= b.lower for a, b in zip(by_lower, by_lower[1:]))
    with pytest.raises(DomainError):
        sort_intervals(ivs, "upper")


# -- top-set probabilities ---------------------------------------------------------------


def test_top_set_large_nprime_converges():
    ds = separated_twoclass(2)
    probs = top_set_probability(ds, j_list=(1, 2, 3), B=100, n_prime=100 * 35, seed=1)
    assert probs == {1: 1.0, 2: 1.0, 3: 1.0}


def test_top_set_properties():
    ds = separated_twoclass(3, effects=(1.2, 1.0, 0.8))
    probs = top_set_probability(ds, j_list=(1, 2, 3, 6), B=200, seed=4)
    assert all(0 <= v <= 1 for v in probs.values())
    assert probs[1] > probs[6]
    assert probs == top_set_probability(ds, j_list=(1, 2, 3, 6), B=200, seed=4, workers=4)
    with pytest.raises(DomainError):
        top_set_probability(ds, j_list=(31,))
    with pytest.raises(DomainError):
        top_set_probability(ds, j_list=(3,), p_subsample=2)


def test_top_set_subsample_keeps_reference_items():
    ds = separated_twoclass(4, p=60)
    full = top_set_probability(ds, j_list=(3,), B=200, n_prime=100, seed=3)
    sub = top_set_probability(ds, j_list=(3,), B=200, n_prime=100, seed=3, p_subsample=20)
    assert abs(full[3] - sub[3]) < 0.1
