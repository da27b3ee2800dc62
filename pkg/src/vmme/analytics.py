"""Closed-form predictors of per-user SR, SRR and HR procedure rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import stochastic as st
from .mobility import CellGrid, analytic_ccr
from .stochastic import DistributionSpec, ParameterError, RandomStream
from .traffic import ApplicationMix, LinkProfile, TrafficParams, session_batch


class ModelConsistencyError(ValueError):
    """Predicted activity time exceeds wall time."""


@dataclass(frozen=True)
class RateModelInputs:
    session_rate: float          # sessions/s per user
    mean_periods: float          # mean activity periods per session
    reading_time: DistributionSpec
    inter_session: DistributionSpec
    timer: float                 # inactivity timer, s
    mean_on: float               # mean activity-period duration, s
    ccr: float                   # cell crossings/s per user
    # standard errors of the Monte Carlo estimates, when derived
    stderr: dict | None = None

    def __post_init__(self):
        if self.session_rate < 0 or self.timer < 0 or self.mean_on < 0 or self.ccr < 0:
            raise ParameterError("RateModelInputs: rates and times must be nonnegative")
        if self.mean_periods < 1:
            raise ParameterError("RateModelInputs: mean_periods must be at least 1")

    def with_timer(self, timer: float) -> "RateModelInputs":
        return replace(self, timer=timer)


def lambda_sr(inp: RateModelInputs) -> float:
    """SR (and SRR) procedures per second per user."""
    t = inp.timer
    return inp.session_rate * ((inp.mean_periods - 1.0) * st.survival(inp.reading_time, t)
                               + st.survival(inp.inter_session, t))


lambda_srr = lambda_sr


def mean_tua(x: DistributionSpec, timer: float) -> float:
    """Mean time a UE stays active after an activity period ends."""
    return st.truncated_expectation(x, timer)


def p_ua(inp: RateModelInputs) -> float:
    """Probability that a user is in the Active state."""
    n = inp.mean_periods
    if inp.session_rate == 0:
        return 0.0
    busy = (n * inp.mean_on + (n - 1.0) * mean_tua(inp.reading_time, inp.timer)
            + mean_tua(inp.inter_session, inp.timer))
    p = inp.session_rate * busy
    if p > 1.0:
        raise ModelConsistencyError(f"P_UA = {p:.4g} > 1: session activity exceeds wall time")
    return p


def lambda_hr(inp: RateModelInputs) -> float:
    if inp.ccr == 0:
        return 0.0
    return inp.ccr * p_ua(inp)


def predict(inp: RateModelInputs, timers) -> np.ndarray:
    """Rows of (timer, lambda_sr, lambda_srr, lambda_hr)."""
    rows = []
    for t in timers:
        x = inp.with_timer(float(t))
        sr = lambda_sr(x)
        rows.append((float(t), sr, sr, lambda_hr(x)))
    return np.asarray(rows)


def derive_inputs(mix: ApplicationMix, params: TrafficParams | None = None,
                  grid: CellGrid | None = None, speed: DistributionSpec | None = None,
                  link: LinkProfile | None = None, timer: float = 10.0,
                  n_sessions: int = 200_000, stream: RandomStream | None = None,
                  inter_session: DistributionSpec | None = None) -> RateModelInputs:
    """Estimate model inputs by Monte Carlo over generated sessions.

    The inter-session gap is taken from the deferral rule of the timeline
    generator: a session starts ``max(IAST, L)`` after the previous one did,
    where ``L`` is the previous session length, so ``T_IS = max(IAST - L, 0)``.
    Pass ``inter_session`` to override it with a fixed law.
    """
    from .mobility import DEFAULT_SPEED

    params = params or TrafficParams()
    grid = grid or CellGrid()
    speed = speed or DEFAULT_SPEED
    link = link or LinkProfile()
    stream = stream or RandomStream(0, 99)

    apps, counts, on, lengths = session_batch(n_sessions, mix, params, link, stream)
    n_bar = float(counts.mean())
    on_bar = float(on.mean())
    iast = st.sample(params.inter_session, stream, n_sessions)
    gaps = np.maximum(iast, lengths)
    session_rate = 1.0 / float(gaps.mean())
    if inter_session is None:
        inter_session = st.empirical(np.maximum(iast - lengths, 0.0))

    # the reading-time law is whatever the session mix draws gaps from
    web_share = float(np.sum(counts[apps == 0] - 1))
    video_share = float(np.sum(counts[apps == 1] - 1))
    reading = _reading_law(params, web_share, video_share)

    stderr = {
        "mean_periods": float(counts.std(ddof=1) / math.sqrt(n_sessions)),
        "mean_on": float(on.std(ddof=1) / math.sqrt(on.size)),
        "session_rate": float(session_rate ** 2 * gaps.std(ddof=1) / math.sqrt(n_sessions)),
    }
    ccr = analytic_ccr(st.mean(speed), grid.cell_perimeter, grid.cell_area)
    return RateModelInputs(session_rate, n_bar, reading, inter_session, timer, on_bar, ccr, stderr)


def _reading_law(params: TrafficParams, web_gaps: float, video_gaps: float) -> DistributionSpec:
    web, video = params.web.reading_time, params.video.reading_time
    if web == video or video_gaps == 0:
        return web
    if web_gaps == 0:
        return video
    raise ParameterError("web and video reading-time laws differ; pass a combined law explicitly")


def default_inter_session(mean_session_length: float, iast_mean: float = 1200.0) -> DistributionSpec:
    """Plain exponential stand-in for the inter-session gap."""
    if not mean_session_length < iast_mean:
        raise ParameterError("mean session length must be below the inter-arrival mean")
    return st.exponential(iast_mean - mean_session_length)
