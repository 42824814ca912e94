import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rankvar.errors import DomainError
from rankvar.tail_models import (
    BoundedPower,
    Exponential,
    Normal,
    Pareto,
    StretchedExp,
    from_dict,
    quantile,
    sample_extreme_order_stats,
    sample_iid,
    uniform_extreme_order_stats,
)

MODELS = [
    Exponential(1.0),
    Exponential(2.5),
    Pareto(4.0),
    Pareto(0.7),
    BoundedPower(1.0),
    BoundedPower(6.0),
    Normal(0.0, 1.0),
    Normal(-3.0, 0.2),
    StretchedExp(0.85, 0.5, 0.0),
    StretchedExp(0.19, 2.0, 1.0),
]
GRID = np.arange(1, 100) / 100


class FixedStream:
    """Stand-in random stream emitting preset values."""

    def __init__(self, uniforms=(), exponentials=()):
        self.uniforms = list(uniforms)
        self.exponentials = list(exponentials)

    def random(self, size):
        out, self.uniforms = self.uniforms[:size], self.uniforms[size:]
        return np.array(out)

    def standard_exponential(self, size):
        out, self.exponentials = self.exponentials[:size], self.exponentials[size:]
        return np.array(out)


def test_quantile_examples():
    # u = 1 - 2**-4 inverts the Pareto(4) CDF at x = 2
    assert quantile(Pareto(4.0), 0.9375) == pytest.approx(2.0, abs=1e-14)
    assert quantile(BoundedPower(1.0), 0.25) == 0.25
    assert quantile(Exponential(1.0), 1 - math.exp(-1)) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(u):
    with pytest.raises(DomainError):
        quantile(Exponential(1.0), u)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_round_trip_and_monotone(model):
    q = model.quantile(GRID)
    assert np.all(np.diff(q) > 0)
    np.testing.assert_allclose(model.cdf(q), GRID, rtol=0, atol=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_isf_matches_quantile(model):
    np.testing.assert_allclose(model.isf(1 - GRID), model.quantile(GRID), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_cdf_matches_scipy_reference(model):
    ref = {
        "exponential": lambda m: stats.expon(scale=1 / m.rate),
        "pareto": lambda m: stats.pareto(m.alpha),
        "bounded_power": lambda m: stats.powerlaw(m.alpha),
        "normal": lambda m: stats.norm(m.mu, m.sigma),
        "stretched_exp": lambda m: stats.weibull_min(m.gamma, loc=m.shift, scale=m.lam ** (-1 / m.gamma)),
    }[model.family](model)
    x = ref.ppf(GRID)
    np.testing.assert_allclose(model.cdf(x), GRID, atol=1e-10)


@pytest.mark.parametrize(
    "ctor",
    [lambda: Exponential(0), lambda: Pareto(-1), lambda: BoundedPower(0), lambda: Normal(0, 0), lambda: StretchedExp(1, 0, 0)],
)
def test_invalid_parameters(ctor):
    with pytest.raises(DomainError):
        ctor()


def test_dict_round_trip():
    for m in MODELS:
        assert from_dict(m.to_dict()) == m


def test_sample_iid_fixed_stream():
    out = sample_iid(Exponential(1.0), 1, FixedStream(uniforms=[0.5]))
    assert out == pytest.approx([math.log(2)], abs=1e-15)


def test_sample_iid_empty():
    assert sample_iid(Pareto(4.0), 0, np.random.default_rng(0)).size == 0


def test_sample_iid_pareto_cdf_value():
    x = sample_iid(Pareto(4.0), 100_000, np.random.default_rng(3))
    assert abs(np.mean(x <= 2.0) - 0.9375) < 0.01


def test_sample_iid_deterministic():
    a = sample_iid(Normal(), 50, np.random.default_rng(11))
    b = sample_iid(Normal(), 50, np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)


def test_renyi_single_term():
    # Z = ln 2 gives U_(1) = 1 - exp(-ln 2) = 0.5
    model = Exponential(1.0)
    out = sample_extreme_order_stats(model, 1, 1, "lower", FixedStream(exponentials=[math.log(2)]))
    assert out == pytest.approx([model.quantile(0.5)], abs=1e-15)


def test_renyi_upper_single_term():
    model = Pareto(4.0)
    out = sample_extreme_order_stats(model, 1, 1, "upper", FixedStream(exponentials=[math.log(2)]))
    assert out == pytest.approx([model.quantile(0.5)], rel=1e-14)


def test_renyi_empty_and_errors():
    rng = np.random.default_rng(0)
    assert sample_extreme_order_stats(Exponential(), 5, 0, "lower", rng).size == 0
    with pytest.raises(DomainError):
        sample_extreme_order_stats(Exponential(), 5, 6, "lower", rng)
    with pytest.raises(DomainError):
        sample_extreme_order_stats(Exponential(), 5, 2, "middle", rng)


@settings(max_examples=60, deadline=None)
@given(
    p=st.integers(1, 10**8),
    kfrac=st.floats(0, 1),
    side=st.sampled_from(["lower", "upper"]),
    midx=st.integers(0, len(MODELS) - 1),
    seed=st.integers(0, 2**32 - 1),
)
def test_renyi_output_nondecreasing(p, kfrac, side, midx, seed):
    k = min(p, int(kfrac * min(p, 200)))
    out = sample_extreme_order_stats(MODELS[midx], p, k, side, np.random.default_rng(seed))
    assert out.shape == (k,)
    assert np.all(np.diff(out) >= 0)


def test_renyi_deterministic():
    a = sample_extreme_order_stats(Pareto(4.0), 1000, 10, "upper", np.random.default_rng(5))
    b = sample_extreme_order_stats(Pareto(4.0), 1000, 10, "upper", np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_renyi_matches_beta_marginals():
    # U_(j) of p uniforms is Beta(j, p - j + 1)
    rng = np.random.default_rng(17)
    p, k = 200, 5
    draws = np.array([uniform_extreme_order_stats(p, k, rng) for _ in range(4000)])
    for j in range(k):
        assert stats.kstest(draws[:, j], stats.beta(j + 1, p - j).cdf).pvalue > 0.001


def test_renyi_upper_matches_full_sort_small():
    rng = np.random.default_rng(23)
    model = Exponential(1.0)
    p, k, reps = 60, 4, 4000
    fast = np.array([sample_extreme_order_stats(model, p, k, "upper", rng) for _ in range(reps)])
    full = np.sort(model.quantile(rng.random((reps, p))), axis=1)[:, -k:]
    for j in range(k):
        assert stats.ks_2samp(fast[:, j], full[:, j]).pvalue > 0.001
