import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st_
from scipy import integrate

from vmme import stochastic as st
from vmme.stochastic import ParameterError, RandomStream

EXP30 = st.exponential(30.0)
CALL = st.generalized_pareto(-0.39, 69.33, 0.0)
EMBEDDED = st.truncated_lognormal(6.17, 2.36, 50.0, 2e6)

CLOSED_FORM = [
    EXP30,
    CALL,
    EMBEDDED,
    st.truncated_lognormal(math.log(175.0), 1.0, 10.0, 3600.0),
    st.truncated_pareto(shape=1.1, max=55.0, mean=22.0),
    st.uniform(2.5e6, 3.0e6),
]


def ks_distance(spec, x):
    """Sup distance between the empirical CDF of ``x`` and 1 - survival."""
    x = np.sort(x)
    n = x.size
    idx = np.unique(np.concatenate((np.arange(0, n, 250), [n - 1])))
    cdf = np.array([1.0 - st.survival(spec, v) for v in x[idx]])
    return max(np.max(np.abs((idx + 1) / n - cdf)), np.max(np.abs(idx / n - cdf)))


class TestSample:
    def test_lognormal_bounds(self):
        x = st.sample(EMBEDDED, RandomStream(3), 200_000)
        assert x.min() >= 50 and x.max() <= 2e6

    def test_exponential_mean(self):
        x = st.sample(EXP30, RandomStream(4), 10**6)
        assert abs(x.mean() - 30.0) < 0.5

    def test_uniform_range(self):
        x = st.sample(st.uniform(2.5e6, 3.0e6), RandomStream(5), 100_000)
        assert x.min() >= 2.5e6 and x.max() <= 3.0e6

    def test_scalar_draw(self):
        v = st.sample(EXP30, RandomStream(1))
        assert isinstance(v, float) and v >= 0

    def test_same_seed_same_bytes(self):
        a = st.sample(EMBEDDED, RandomStream(42, 7), 1000)
        b = st.sample(EMBEDDED, RandomStream(42, 7), 1000)
        assert a.tobytes() == b.tobytes()
        c = st.sample(EMBEDDED, RandomStream(42, 8), 1000)
        assert a.tobytes() != c.tobytes()

    def test_geometric_counts_start_at_one(self):
        x = st.sample(st.geometric(0.6), RandomStream(2), 100_000)
        assert x.min() == 1
        # P(N=1) = 1 - p
        assert abs(np.mean(x == 1) - 0.4) < 0.005

    @pytest.mark.parametrize("spec", CLOSED_FORM, ids=lambda s: s.kind)
    def test_ks_against_survival(self, spec):
        x = st.sample(spec, RandomStream(11), 10**6)
        assert ks_distance(spec, x) < 0.005


class TestValidation:
    @pytest.mark.parametrize("kind,params", [
        ("Exponential", {"mean": 0}),
        ("Exponential", {"mean": -1}),
        ("TruncatedLognormal", {"mu": 1, "sigma": 1, "min": 5, "max": 5}),
        ("TruncatedLognormal", {"mu": 1, "sigma": 0, "min": 1, "max": 5}),
        ("Geometric", {"p": 1.0}),
        ("Geometric", {"p": -0.1}),
        ("Uniform", {"low": 3, "high": 2}),
        ("GeneralizedPareto", {"k": 0.1, "s": 0, "m": 0}),
        ("TruncatedPareto", {"shape": 1.1, "scale": 60, "max": 55}),
        ("Bogus", {}),
        ("Exponential", {}),
        ("Exponential", {"mean": 1, "extra": 2}),
    ])
    def test_rejected_at_construction(self, kind, params):
        with pytest.raises(ParameterError):
            st.DistributionSpec(kind, params)

    def test_infinite_mean(self):
        with pytest.raises(ParameterError):
            st.mean(st.generalized_pareto(1.2, 1.0, 0.0))

    def test_negative_cap(self):
        with pytest.raises(ParameterError):
            st.truncated_expectation(EXP30, -1.0)

    def test_roundtrip_dict(self):
        for spec in CLOSED_FORM:
            assert st.DistributionSpec.from_dict(spec.to_dict()) == spec


class TestSurvival:
    def test_exponential_closed_form(self):
        assert st.survival(EXP30, 10.0) == pytest.approx(math.exp(-1 / 3), abs=1e-12)
        assert st.survival(EXP30, 10.0) == pytest.approx(0.716531, abs=1e-6)

    @pytest.mark.parametrize("spec", CLOSED_FORM + [st.geometric(0.893)], ids=lambda s: s.kind)
    def test_below_support(self, spec):
        assert st.survival(spec, -1.0) == 1.0

    def test_gpd_bounded_support(self):
        # support ends at s/|k| ~ 177.77
        assert st.survival(CALL, 200.0) == 0.0
        assert st.survival(CALL, 177.0) > 0.0

    def test_geometric(self):
        g = st.geometric(0.6)
        assert st.survival(g, 0.5) == 1.0
        assert st.survival(g, 1.0) == pytest.approx(0.6)
        assert st.survival(g, 2.7) == pytest.approx(0.36)

    def test_tiny_sigma_lognormal(self):
        main = st.truncated_lognormal(15.098, 4.390e-5, 100.0, 6e6)
        centre = math.exp(15.098)
        assert st.survival(main, centre * 0.999) == pytest.approx(1.0)
        assert st.survival(main, centre * 1.001) == pytest.approx(0.0, abs=1e-12)
        assert st.survival(main, centre) == pytest.approx(0.5, abs=1e-9)


class TestMean:
    def test_geometric_table_value(self):
        assert st.mean(st.geometric(0.6)) == pytest.approx(2.5)

    def test_exponential(self):
        assert st.mean(st.exponential(1200.0)) == 1200.0

    def test_gpd_against_monte_carlo(self):
        x = st.sample(CALL, RandomStream(9), 10**7)
        se = x.std() / math.sqrt(x.size)
        assert st.mean(CALL) == pytest.approx(69.33 / 1.39, rel=1e-12)
        assert abs(x.mean() - st.mean(CALL)) < 4 * se

    def test_pareto_scale_solved_for_mean(self):
        tp = st.truncated_pareto(shape=1.1, max=55.0, mean=22.0)
        assert st.mean(tp) == pytest.approx(22.0, rel=1e-9)
        # numeric oracle: integrate x f(x) over the support
        a, xm, top = tp["shape"], tp["scale"], tp["max"]
        norm = 1 - (xm / top) ** a
        val, _ = integrate.quad(lambda x: x * a * xm**a / x ** (a + 1) / norm, xm, top)
        assert val == pytest.approx(22.0, rel=1e-8)

    def test_lognormal_against_quadrature(self):
        from scipy import stats
        mu, sig, lo, hi = 6.17, 2.36, 50.0, 2e6
        dist = stats.lognorm(s=sig, scale=math.exp(mu))
        mass = dist.cdf(hi) - dist.cdf(lo)
        val, _ = integrate.quad(lambda x: x * dist.pdf(x), lo, hi, limit=500, points=[1e3, 1e4, 1e5])
        assert st.mean(EMBEDDED) == pytest.approx(val / mass, rel=1e-6)


class TestTruncatedExpectation:
    def test_exponential_closed_form_and_quadrature(self):
        closed = 30.0 * (1.0 - math.exp(-1 / 3))
        # independent route: cap * P(X > cap) + integral of x f(x) on [0, cap]
        integral, _ = integrate.quad(lambda x: x * math.exp(-x / 30.0) / 30.0, 0.0, 10.0)
        oracle = 10.0 * math.exp(-1 / 3) + integral
        assert closed == pytest.approx(oracle, rel=1e-12)
        assert st.truncated_expectation(EXP30, 10.0) == pytest.approx(oracle, rel=1e-8)
        assert st.truncated_expectation(EXP30, 10.0) == pytest.approx(8.5041, abs=1e-4)

    def test_zero_cap(self):
        for spec in CLOSED_FORM:
            assert st.truncated_expectation(spec, 0.0) == 0.0

    def test_cap_beyond_support(self):
        assert st.truncated_expectation(CALL, 1000.0) == pytest.approx(st.mean(CALL))

    @pytest.mark.parametrize("cap", [5.0, 30.0, 120.0])
    def test_gpd_against_density_quadrature(self, cap):
        k, s = -0.39, 69.33
        pdf = lambda x: (1 + k * x / s) ** (-1 / k - 1) / s
        body, _ = integrate.quad(lambda x: x * pdf(x), 0.0, cap)
        oracle = cap * st.survival(CALL, cap) + body
        assert st.truncated_expectation(CALL, cap) == pytest.approx(oracle, rel=1e-8)

    def test_geometric_against_enumeration(self):
        g = st.geometric(0.893)
        for cap in (0.5, 1.0, 3.3, 12.0):
            pmf = [(1 - 0.893) * 0.893 ** (n - 1) for n in range(1, 2000)]
            oracle = sum(min(n, cap) * p for n, p in zip(range(1, 2000), pmf))
            assert st.truncated_expectation(g, cap) == pytest.approx(oracle, rel=1e-9)

    def test_empirical(self):
        e = st.empirical([0.0, 0.0, 5.0, 20.0])
        assert st.survival(e, 0.0) == 0.5
        assert st.truncated_expectation(e, 10.0) == pytest.approx(15.0 / 4)


specs = st_.sampled_from(CLOSED_FORM + [st.geometric(0.6), st.exponential(1200.0)])
caps = st_.floats(min_value=0.0, max_value=1e7, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(spec=specs, a=caps, b=caps)
def test_truncated_expectation_bounds_and_monotone(spec, a, b):
    lo, hi = min(a, b), max(a, b)
    te_lo = st.truncated_expectation(spec, lo)
    te_hi = st.truncated_expectation(spec, hi)
    m = st.mean(spec)
    tol = 1e-9 * max(1.0, m)
    assert -tol <= te_lo <= min(lo, m) + tol
    assert te_lo <= te_hi + tol


@settings(max_examples=200, deadline=None)
@given(spec=specs, a=st_.floats(-10, 1e7), b=st_.floats(-10, 1e7))
def test_survival_nonincreasing(spec, a, b):
    lo, hi = min(a, b), max(a, b)
    s_lo, s_hi = st.survival(spec, lo), st.survival(spec, hi)
    assert 0.0 <= s_hi <= s_lo + 1e-12 <= 1.0 + 1e-12


@pytest.mark.parametrize("spec", CLOSED_FORM, ids=lambda s: s.kind)
def test_survival_vanishes_at_support_max(spec):
    lo, hi = spec.support
    if math.isfinite(hi):
        assert st.survival(spec, hi) == 0.0
    assert st.survival(spec, lo - 1e-9 * max(1.0, abs(lo))) == 1.0
