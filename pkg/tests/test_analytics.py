import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st_

from vmme import analytics as an
from vmme import stochastic as st
from vmme.stochastic import RandomStream
from vmme.traffic import ApplicationMix, TrafficParams

EXP30 = st.exponential(30.0)


def inputs(**kw):
    base = dict(session_rate=1 / 1200, mean_periods=9.346, reading_time=EXP30,
                inter_session=st.constant(1e6), timer=10.0, mean_on=5.0, ccr=0.02005)
    base.update(kw)
    return an.RateModelInputs(**base)


def test_lambda_sr_worked_example():
    # P(T_IS > 10) = 1 through a constant gap far above the timer
    expected = (1 / 1200) * (8.346 * math.exp(-1 / 3) + 1)
    assert an.lambda_sr(inputs()) == pytest.approx(expected, rel=1e-12)
    assert an.lambda_sr(inputs()) == pytest.approx(0.005817, abs=5e-7)


def test_lambda_sr_zero_timer_counts_every_period():
    assert an.lambda_sr(inputs(timer=0.0)) == pytest.approx(9.346 / 1200)


def test_lambda_sr_vanishes_for_bounded_laws():
    inp = inputs(reading_time=st.uniform(0, 50), inter_session=st.uniform(10, 100), timer=1e9)
    assert an.lambda_sr(inp) == 0.0
    assert an.lambda_srr(inp) == an.lambda_sr(inp)


def test_mean_tua_closed_form():
    assert an.mean_tua(EXP30, 10.0) == pytest.approx(8.5041, abs=1e-4)
    assert an.mean_tua(EXP30, 0.0) == 0.0


@pytest.mark.parametrize("spec,cap", [
    (EXP30, 10.0),
    (st.generalized_pareto(-0.39, 69.33, 0.0), 40.0),
    (st.truncated_lognormal(math.log(175.0), 1.0, 10.0, 3600.0), 200.0),
])
def test_mean_tua_against_monte_carlo(spec, cap):
    x = st.sample(spec, RandomStream(21), 10**7)
    mc = float(np.minimum(x, cap).mean())
    assert an.mean_tua(spec, cap) == pytest.approx(mc, rel=2e-3)


def test_p_ua_worked_example():
    inp = inputs(mean_periods=1.0, mean_on=50.0, inter_session=st.constant(10.0), timer=10.0)
    assert an.p_ua(inp) == pytest.approx(0.05)
    assert an.p_ua(inputs(mean_on=0.0, timer=0.0)) == 0.0
    assert an.p_ua(inputs(session_rate=0.0)) == 0.0


def test_p_ua_linear_in_session_rate():
    a = an.p_ua(inputs(session_rate=1e-4))
    b = an.p_ua(inputs(session_rate=3e-4))
    assert b == pytest.approx(3 * a, rel=1e-12)


def test_p_ua_above_one_raises():
    with pytest.raises(an.ModelConsistencyError):
        an.p_ua(inputs(session_rate=1.0, mean_on=100.0))


def test_lambda_hr_product():
    inp = inputs(mean_periods=1.0, mean_on=50.0, inter_session=st.constant(10.0))
    assert an.lambda_hr(inp) == pytest.approx(0.02005 * 0.05)
    assert an.lambda_hr(inp) == pytest.approx(1.0025e-3)
    assert an.lambda_hr(inputs(ccr=0.0)) == 0.0


def test_invalid_inputs():
    with pytest.raises(st.ParameterError):
        inputs(mean_periods=0.5)
    with pytest.raises(st.ParameterError):
        inputs(timer=-1.0)


@settings(max_examples=100, deadline=None)
@given(a=st_.floats(0, 500), b=st_.floats(0, 500),
       d=st_.floats(1, 100), gap=st_.floats(10, 2000))
def test_monotone_in_timer(a, b, d, gap):
    lo, hi = min(a, b), max(a, b)
    inp = inputs(reading_time=st.exponential(d), inter_session=st.exponential(gap), mean_on=2.0)
    x, y = inp.with_timer(lo), inp.with_timer(hi)
    assert an.lambda_sr(y) <= an.lambda_sr(x) + 1e-15
    assert an.lambda_hr(y) >= an.lambda_hr(x) - 1e-15


def test_predict_rows():
    rows = an.predict(inputs(), [1, 5, 10, 20, 40])
    assert rows.shape == (5, 4)
    assert np.array_equal(rows[:, 1], rows[:, 2])
    assert np.all(np.diff(rows[:, 1]) < 0)
    assert np.all(np.diff(rows[:, 3]) > 0)


def test_derive_inputs_calls_only():
    inp = an.derive_inputs(ApplicationMix(0, 0, 1), n_sessions=100_000, stream=RandomStream(8))
    assert inp.mean_periods == 1.0
    assert inp.mean_on == pytest.approx(69.33 / 1.39, abs=0.3)
    assert inp.stderr["mean_on"] < 0.2
    assert inp.ccr == pytest.approx(0.02005, abs=1e-5)


def test_derive_inputs_web_only():
    inp = an.derive_inputs(ApplicationMix(1, 0, 0), n_sessions=100_000, stream=RandomStream(9))
    assert abs(inp.mean_periods - 1 / (1 - 0.893)) < 0.1
    assert inp.reading_time == TrafficParams().web.reading_time


def test_derive_inputs_session_rate_and_gap():
    inp = an.derive_inputs(ApplicationMix(0, 0, 1), n_sessions=100_000, stream=RandomStream(10))
    # calls are far shorter than the 1200 s inter-arrival mean, so deferral is rare
    assert inp.session_rate == pytest.approx(1 / 1200, rel=0.02)
    assert st.mean(inp.inter_session) == pytest.approx(1200 - 69.33 / 1.39, rel=0.02)


def test_default_inter_session():
    spec = an.default_inter_session(200.0)
    assert st.mean(spec) == 1000.0
    with pytest.raises(st.ParameterError):
        an.default_inter_session(1300.0)
