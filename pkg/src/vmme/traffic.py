"""Per-UE application session timelines.

A session is N activity periods separated by N-1 reading times.  Session
starts follow exponential inter-arrival gaps; a session whose nominal start
falls before the previous session ended is deferred to that end.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .stochastic import (
    DistributionSpec,
    ParameterError,
    RandomStream,
    exponential,
    generalized_pareto,
    geometric,
    sample,
    truncated_lognormal,
    truncated_pareto,
)

WEB, VIDEO, CALL = 0, 1, 2
APP_NAMES = ("web", "video", "call")


@dataclass(frozen=True)
class ApplicationMix:
    p_web: float = 0.74
    p_video: float = 0.03
    p_call: float = 0.23

    def __post_init__(self):
        probs = (self.p_web, self.p_video, self.p_call)
        if any(p < 0 for p in probs):
            raise ParameterError("ApplicationMix: probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ParameterError(f"ApplicationMix: probabilities sum to {sum(probs)}, not 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_web, self.p_video, self.p_call])


@dataclass(frozen=True)
class LinkProfile:
    downlink_rate: float = 3e8  # bits/s
    uplink_rate: float = 3e8

    def __post_init__(self):
        if not (self.downlink_rate > 0 and self.uplink_rate > 0):
            raise ParameterError("LinkProfile: rates must be positive")


@dataclass(frozen=True)
class WebParams:
    main_object_size: DistributionSpec = truncated_lognormal(15.098, 4.390e-5, 100.0, 6e6)
    embedded_object_size: DistributionSpec = truncated_lognormal(6.17, 2.36, 50.0, 2e6)
    embedded_object_count: DistributionSpec = truncated_pareto(shape=1.1, max=55.0, mean=22.0)
    parsing_time: DistributionSpec = exponential(0.13)
    reading_time: DistributionSpec = exponential(30.0)
    pageviews: DistributionSpec = geometric(0.893)


@dataclass(frozen=True)
class VideoParams:
    # (low, high) encoding rate in bits/s, one range per itag 137/264/266/315
    encoding_ranges: tuple = ((2.5e6, 3.0e6), (4.0e6, 4.5e6), (12.5e6, 16.0e6), (20.0e6, 25.0e6))
    duration: DistributionSpec = truncated_lognormal(float(np.log(175.0)), 1.0, 10.0, 3600.0)
    reading_time: DistributionSpec = exponential(30.0)
    videoviews: DistributionSpec = geometric(0.6)
    burst_seconds: float = 40.0
    throttle_factor: float = 1.25

    def __post_init__(self):
        for lo, hi in self.encoding_ranges:
            if not 0 < lo < hi:
                raise ParameterError("VideoParams: encoding ranges need 0 < low < high")
        if self.burst_seconds < 0:
            raise ParameterError("VideoParams: burst_seconds must be nonnegative")
        if self.throttle_factor <= 1:
            raise ParameterError("VideoParams: throttle_factor must exceed 1")


@dataclass(frozen=True)
class CallParams:
    holding_time: DistributionSpec = generalized_pareto(-0.39, 69.33, 0.0)
    rate_bps: float = 1.5e6  # recorded only, does not affect timing


@dataclass(frozen=True)
class TrafficParams:
    web: WebParams = field(default_factory=WebParams)
    video: VideoParams = field(default_factory=VideoParams)
    call: CallParams = field(default_factory=CallParams)
    inter_session: DistributionSpec = exponential(1200.0)


class SessionDraw(NamedTuple):
    """Activity durations of one session and the reading gaps between them."""
    app: int
    on: np.ndarray
    off: np.ndarray

    @property
    def length(self) -> float:
        return float(self.on.sum() + self.off.sum())


@dataclass
class SessionTrace:
    ue_id: int
    start: np.ndarray
    end: np.ndarray
    app: np.ndarray
    session: np.ndarray  # index into session_starts for each period
    session_starts: np.ndarray

    def __len__(self):
        return len(self.start)

    def periods(self):
        return list(zip(self.start.tolist(), self.end.tolist(), self.app.tolist()))


# -- per-application generators ---------------------------------------------

def web_page_durations(n_pages: int, params: WebParams, link: LinkProfile,
                       stream: RandomStream) -> np.ndarray:
    """Activity duration of ``n_pages`` independent page downloads."""
    rate = link.downlink_rate
    main = sample(params.main_object_size, stream, n_pages)
    counts = np.rint(sample(params.embedded_object_count, stream, n_pages)).astype(np.int64)
    total = int(counts.sum())
    per_object = (sample(params.parsing_time, stream, total)
                  + sample(params.embedded_object_size, stream, total) * 8.0 / rate)
    embedded = np.zeros(n_pages)
    nonempty = counts > 0
    if total:
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
        embedded[nonempty] = np.add.reduceat(per_object, offsets[nonempty])
    return main * 8.0 / rate + embedded


def page_duration(main_size: float, embedded_sizes: Sequence[float],
                  parsing_times: Sequence[float], link: LinkProfile) -> float:
    rate = link.downlink_rate
    return main_size * 8.0 / rate + sum(p + s * 8.0 / rate for s, p in zip(embedded_sizes, parsing_times))


def generate_web_session(params: WebParams, link: LinkProfile, stream: RandomStream) -> SessionDraw:
    n = int(sample(params.pageviews, stream))
    on = web_page_durations(n, params, link, stream)
    off = sample(params.reading_time, stream, n - 1)
    return SessionDraw(WEB, on, off)


def video_activity(duration, encoding_rate, link: LinkProfile, params: VideoParams):
    """Initial burst at link rate, then throttled delivery of the remainder."""
    duration = np.asarray(duration, dtype=float)
    burst = np.minimum(duration, params.burst_seconds)
    throttled = np.maximum(0.0, duration - params.burst_seconds)
    return burst * encoding_rate / link.downlink_rate + throttled / params.throttle_factor


def video_durations(n: int, params: VideoParams, link: LinkProfile, stream: RandomStream) -> np.ndarray:
    ranges = np.asarray(params.encoding_ranges, dtype=float)
    if params.throttle_factor * ranges[:, 1].max() >= link.downlink_rate:
        raise ParameterError("video throttle rate must stay below the link rate")
    itag = stream.integers(0, len(ranges), n)
    enc = stream.uniform(ranges[itag, 0], ranges[itag, 1])
    dur = sample(params.duration, stream, n)
    return video_activity(dur, enc, link, params)


def generate_video_session(params: VideoParams, link: LinkProfile, stream: RandomStream) -> SessionDraw:
    n = int(sample(params.videoviews, stream))
    on = video_durations(n, params, link, stream)
    off = sample(params.reading_time, stream, n - 1)
    return SessionDraw(VIDEO, on, off)


def call_durations(n: int, params: CallParams, stream: RandomStream) -> np.ndarray:
    h = sample(params.holding_time, stream, n)
    bad = h <= 0
    while bad.any():
        h[bad] = sample(params.holding_time, stream, int(bad.sum()))
        bad = h <= 0
    return h


def generate_call_session(params: CallParams, stream: RandomStream) -> SessionDraw:
    return SessionDraw(CALL, call_durations(1, params, stream), np.empty(0))


def generate_session(app: int, params: TrafficParams, link: LinkProfile, stream: RandomStream) -> SessionDraw:
    if app == WEB:
        return generate_web_session(params.web, link, stream)
    if app == VIDEO:
        return generate_video_session(params.video, link, stream)
    return generate_call_session(params.call, stream)


def session_batch(n: int, mix: ApplicationMix, params: TrafficParams, link: LinkProfile,
                  stream: RandomStream):
    """Vectorized draw of ``n`` sessions for Monte Carlo estimation.

    Returns ``(apps, periods_per_session, on_durations, session_lengths)``.
    """
    apps = stream.generator.choice(3, n, p=mix.as_array())
    counts = np.ones(n, dtype=np.int64)
    is_web, is_video = apps == WEB, apps == VIDEO
    counts[is_web] = sample(params.web.pageviews, stream, int(is_web.sum())).astype(np.int64)
    counts[is_video] = sample(params.video.videoviews, stream, int(is_video.sum())).astype(np.int64)

    owner = np.repeat(np.arange(n), counts)
    period_app = apps[owner]
    on = np.empty(owner.size)
    for code in (WEB, VIDEO, CALL):
        sel = period_app == code
        k = int(sel.sum())
        if code == WEB:
            on[sel] = web_page_durations(k, params.web, link, stream)
        elif code == VIDEO:
            on[sel] = video_durations(k, params.video, link, stream)
        else:
            on[sel] = call_durations(k, params.call, stream)

    gaps = np.zeros(n)
    for code, spec in ((WEB, params.web.reading_time), (VIDEO, params.video.reading_time)):
        sel = apps == code
        n_gaps = counts[sel] - 1
        total = int(n_gaps.sum())
        if total:
            draws = sample(spec, stream, total)
            gaps[sel] = np.bincount(np.repeat(np.arange(n_gaps.size), n_gaps), draws, n_gaps.size)
    lengths = np.bincount(owner, on, n) + gaps
    return apps, counts, on, lengths


# -- timelines ----------------------------------------------------------------

def mix_cdf(mix: ApplicationMix) -> np.ndarray:
    return np.cumsum(mix.as_array())


def draw_app(cdf: np.ndarray, stream: RandomStream) -> int:
    """Application code for a new session given the cumulative mix."""
    return min(int(np.searchsorted(cdf, stream.uniform(), side="right")), CALL)


def generate_user_timeline(ue_id: int, sim_duration: float, mix: ApplicationMix,
                           link: LinkProfile, stream: RandomStream,
                           params: TrafficParams | None = None) -> SessionTrace:
    if not sim_duration > 0:
        raise ParameterError("sim_duration must be positive")
    params = params or TrafficParams()
    probs = mix_cdf(mix)
    starts, ends, apps, owner, sess_starts = [], [], [], [], []
    nominal = 0.0
    prev_end = 0.0
    while True:
        nominal += sample(params.inter_session, stream)
        t = max(nominal, prev_end)
        if t >= sim_duration:
            break
        app = draw_app(probs, stream)
        draw = generate_session(app, params, link, stream)
        k = len(sess_starts)
        sess_starts.append(t)
        for i, on in enumerate(draw.on):
            if i:
                t += draw.off[i - 1]
            if t >= sim_duration:
                break
            starts.append(t)
            t += on
            ends.append(min(t, sim_duration))
            apps.append(app)
            owner.append(k)
        prev_end = t
        nominal = max(nominal, sess_starts[-1])
    return SessionTrace(
        ue_id=ue_id,
        start=np.asarray(starts, dtype=float),
        end=np.asarray(ends, dtype=float),
        app=np.asarray(apps, dtype=np.int8),
        session=np.asarray(owner, dtype=np.int64),
        session_starts=np.asarray(sess_starts, dtype=float),
    )


def generate_timelines(num_users: int, sim_duration: float, mix: ApplicationMix,
                       link: LinkProfile, seed: int,
                       params: TrafficParams | None = None) -> list[SessionTrace]:
    """One timeline per UE, each from its own stream keyed by (seed, ue_id)."""
    return [generate_user_timeline(ue, sim_duration, mix, link, RandomStream(seed, 1, ue), params)
            for ue in range(num_users)]


def write_sessions_csv(path, traces: Sequence[SessionTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ue_id", "app", "start_s", "end_s"])
        for tr in traces:
            for s, e, a in zip(tr.start, tr.end, tr.app):
                w.writerow([tr.ue_id, APP_NAMES[a], f"{s:.6f}", f"{e:.6f}"])
