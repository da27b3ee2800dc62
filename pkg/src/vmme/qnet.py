"""Discrete-event model of the virtualized MME processing chain.

Every control message visits, in order: the ingress balancer, the shared
database (with probability ``db_probability``), one of ``m`` NFV instances
chosen by the balancer, and the egress switch.  All stations are single
server FIFO queues.

Because every station is FIFO with one server, a job's departure is fixed
the moment it arrives: ``max(arrival, server_free_at) + service``.  The
calendar therefore only carries station-arrival events; it still has to be
processed in time order so that each station sees its arrivals in order and
the balancer sees up-to-date instance loads.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .signaling import MessageType, SignalingTrace, InputFormatError
from .stochastic import ParameterError, RandomStream

DEFAULT_INSTRUCTIONS = {
    MessageType.SR1: 1.45e6,
    MessageType.SR2: 1.07e6,
    MessageType.SR3: 1.06e6,
    MessageType.SRR1: 1.07e6,
    MessageType.SRR2: 1.07e6,
    MessageType.SRR3: 1.06e6,
    MessageType.HR1: 1.07e6,
    MessageType.HR2: 1.07e6,
}

DETERMINISTIC, EXPONENTIAL = "deterministic", "exponential"


@dataclass(frozen=True)
class ProcessingProfile:
    instructions: Mapping[MessageType, float] = field(default_factory=lambda: dict(DEFAULT_INSTRUCTIONS))
    cpu_capacity: float = 11.38e9  # operations/s

    def __post_init__(self):
        missing = [m.name for m in MessageType if m not in self.instructions]
        if missing:
            raise ParameterError(f"ProcessingProfile: no instruction count for {missing}")
        if any(not v > 0 for v in self.instructions.values()):
            raise ParameterError("ProcessingProfile: instruction counts must be positive")
        if not self.cpu_capacity > 0:
            raise ParameterError("ProcessingProfile: cpu_capacity must be positive")

    def service_times(self) -> np.ndarray:
        """NFV service time indexed by MessageType code."""
        return np.array([nfv_service_time(m, self) for m in MessageType])


def nfv_service_time(msg: MessageType, profile: ProcessingProfile) -> float:
    return profile.instructions[MessageType(msg)] / profile.cpu_capacity


@dataclass(frozen=True)
class QueueNetworkConfig:
    balancer_rate: float = 120_000.0
    db_rate: float = 100_000.0
    db_probability: float = 1.0
    egress_rate: float = 5e6
    m: int = 1
    nfv_profile: ProcessingProfile = field(default_factory=ProcessingProfile)
    service_model: str = DETERMINISTIC

    def __post_init__(self):
        for name in ("balancer_rate", "db_rate", "egress_rate"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"QueueNetworkConfig.{name} must be positive, got {v}")
        if not 0.0 <= self.db_probability <= 1.0:
            raise ParameterError("QueueNetworkConfig.db_probability must lie in [0, 1]")
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError("QueueNetworkConfig.m must be an integer >= 1")
        if self.service_model not in (DETERMINISTIC, EXPONENTIAL):
            raise ParameterError(f"QueueNetworkConfig.service_model must be "
                                 f"{DETERMINISTIC!r} or {EXPONENTIAL!r}")


class Station:
    """Single-server FIFO queue."""

    __slots__ = ("name", "free_at", "busy", "served", "last_arrival")

    def __init__(self, name: str):
        self.name = name
        self.free_at = 0.0
        self.busy = 0.0
        self.served = 0
        self.last_arrival = -math.inf

    def admit(self, t: float, service: float) -> tuple[float, float]:
        """Queue a job arriving at ``t``; returns (service start, departure)."""
        start = t if t > self.free_at else self.free_at
        self.free_at = start + service
        self.busy += service
        self.served += 1
        self.last_arrival = t
        return start, self.free_at


class EventCalendar:
    """Binary heap keyed by (time, insertion sequence)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0

    def push(self, t: float, *payload) -> None:
        heapq.heappush(self._heap, (t, self._seq, payload))
        self._seq += 1

    def pop(self):
        t, _, payload = heapq.heappop(self._heap)
        return t, payload

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self):
        return len(self._heap)


def least_loaded(loads: Sequence[int]) -> int:
    """Index of the smallest load, lowest index on ties."""
    best = 0
    for i in range(1, len(loads)):
        if loads[i] < loads[best]:
            best = i
    return best


# stage codes in the calendar
_DB, _NFV, _EGRESS, _DONE = 1, 2, 3, 4


@dataclass
class RunResult:
    stats: "DelayStats"
    records: np.ndarray  # structured, one row per message in trace order
    utilization: dict[str, float]
    horizon: float

    def procedure_sojourns(self) -> dict[int, float]:
        """Sum of message sojourns per procedure id."""
        pid = self.records["procedure_id"]
        uniq, inv = np.unique(pid, return_inverse=True)
        sums = np.bincount(inv, self.records["sojourn"], uniq.size)
        return dict(zip(uniq.tolist(), sums.tolist()))


RECORD_DTYPE = np.dtype([
    ("arrival", "f8"), ("msg", "i1"), ("procedure_id", "i8"), ("instance", "i4"),
    ("visited_db", "?"), ("balancer_wait", "f8"), ("db_wait", "f8"), ("nfv_wait", "f8"),
    ("egress_wait", "f8"), ("service", "f8"), ("departure", "f8"), ("sojourn", "f8"),
])


def run(trace: SignalingTrace, cfg: QueueNetworkConfig,
        stream: RandomStream | None = None) -> RunResult:
    """Push every message of ``trace`` through the chain and collect sojourn times."""
    n = len(trace)
    arrivals = np.asarray(trace.time, dtype=float)
    if n and np.any(np.diff(arrivals) < 0):
        raise InputFormatError("trace must be sorted by time")
    stream = stream or RandomStream(0)
    msgs = np.asarray(trace.msg, dtype=np.int64)

    s_bal = np.full(n, 1.0 / cfg.balancer_rate)
    s_db = np.full(n, 1.0 / cfg.db_rate)
    s_nfv = cfg.nfv_profile.service_times()[msgs]
    s_eg = np.full(n, 1.0 / cfg.egress_rate)
    visit_db = np.ones(n, dtype=bool) if cfg.db_probability >= 1.0 else \
        stream.uniform(size=n) < cfg.db_probability
    if cfg.service_model == EXPONENTIAL:
        g = stream.generator
        s_bal, s_db, s_nfv, s_eg = (g.exponential(s) if n else s for s in (s_bal, s_db, s_nfv, s_eg))

    rec = np.zeros(n, dtype=RECORD_DTYPE)
    rec["arrival"] = arrivals
    rec["msg"] = msgs
    rec["procedure_id"] = trace.procedure_id
    rec["visited_db"] = visit_db

    balancer, db, egress = Station("balancer"), Station("db"), Station("egress")
    nfv = [Station(f"nfv{i}") for i in range(cfg.m)]
    loads = [0] * cfg.m
    instance = np.zeros(n, dtype=np.int64)
    w_bal, w_db, w_nfv, w_eg, dep = (np.zeros(n) for _ in range(5))

    cal = EventCalendar()
    heap = cal._heap
    push, pop = heapq.heappush, heapq.heappop
    seq = 0
    arr = arrivals.tolist()
    sb, sd, sn, se = s_bal.tolist(), s_db.tolist(), s_nfv.tolist(), s_eg.tolist()
    vdb = visit_db.tolist()
    m = cfg.m
    i = 0
    # external arrivals win ties against internal events, then insertion order
    while i < n or heap:
        if i < n and (not heap or arr[i] <= heap[0][0]):
            t = arr[i]
            start, d = balancer.admit(t, sb[i])
            w_bal[i] = start - t
            push(heap, (d, seq, _DB, i))
            seq += 1
            i += 1
            continue
        t, _, stage, j = pop(heap)
        if stage == _DB:
            # balancer hand-off: pick the instance now
            k = 0 if m == 1 else least_loaded(loads)
            instance[j] = k
            loads[k] += 1
            if vdb[j]:
                start, d = db.admit(t, sd[j])
                w_db[j] = start - t
                push(heap, (d, seq, _NFV, j))
                seq += 1
                continue
            stage = _NFV
        if stage == _NFV:
            start, d = nfv[instance[j]].admit(t, sn[j])
            w_nfv[j] = start - t
            push(heap, (d, seq, _EGRESS, j))
            seq += 1
        elif stage == _EGRESS:
            loads[instance[j]] -= 1
            start, d = egress.admit(t, se[j])
            w_eg[j] = start - t
            dep[j] = d

    rec["instance"] = instance
    rec["balancer_wait"], rec["db_wait"], rec["nfv_wait"], rec["egress_wait"] = w_bal, w_db, w_nfv, w_eg
    rec["service"] = s_bal + np.where(visit_db, s_db, 0.0) + s_nfv + s_eg
    rec["departure"] = dep
    rec["sojourn"] = dep - arrivals

    horizon = float(dep.max() - arrivals[0]) if n else 0.0
    util = {}
    for st_ in [balancer, db, *nfv, egress]:
        util[st_.name] = st_.busy / horizon if horizon > 0 else 0.0
    return RunResult(delay_stats(rec, util), rec, util, horizon)


def single_station(arrivals: np.ndarray, service: np.ndarray) -> np.ndarray:
    """Queue waits of one FIFO station fed through the event calendar."""
    st_ = Station("station")
    cal = EventCalendar()
    for i, t in enumerate(np.asarray(arrivals, dtype=float).tolist()):
        cal.push(t, i)
    svc = np.asarray(service, dtype=float).tolist()
    waits = np.empty(len(svc))
    while len(cal):
        t, (i,) = cal.pop()
        start, _ = st_.admit(t, svc[i])
        waits[i] = start - t
    return waits


# -- statistics ----------------------------------------------------------------

@dataclass
class DelayRow:
    count: int
    mean: float
    p95: float
    p99: float
    max: float


@dataclass
class DelayStats:
    per_type: dict[str, DelayRow]
    overall: DelayRow
    utilization: dict[str, float]

    def rows(self):
        for name, row in self.per_type.items():
            yield name, row
        yield "overall", self.overall


def _row(x: np.ndarray) -> DelayRow:
    if x.size == 0:
        return DelayRow(0, 0.0, 0.0, 0.0, 0.0)
    p95, p99 = np.percentile(x, [95, 99])
    return DelayRow(int(x.size), float(x.mean()), float(p95), float(p99), float(x.max()))


def delay_stats(rec: np.ndarray, utilization: dict[str, float] | None = None) -> DelayStats:
    per_type = {}
    for m in MessageType:
        per_type[m.name] = _row(rec["sojourn"][rec["msg"] == m])
    return DelayStats(per_type, _row(rec["sojourn"]), dict(utilization or {}))


def write_delays_csv(path, stats: DelayStats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["msg_type", "count", "mean_s", "p95_s", "p99_s", "max_s"])
        for name, r in stats.rows():
            w.writerow([name, r.count, f"{r.mean:.9e}", f"{r.p95:.9e}", f"{r.p99:.9e}", f"{r.max:.9e}"])


def write_utilization_csv(path, utilization: dict[str, float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station", "utilization"])
        for name, u in utilization.items():
            w.writerow([name, f"{u:.6f}"])


# -- load replay and capacity ----------------------------------------------------

def replay(trace: SignalingTrace, base_users: int, base_duration: float, target_users: float,
           window: float, stream: RandomStream) -> SignalingTrace:
    """Fold a desk-scale trace into ``window`` seconds at the load of ``target_users``.

    Procedures keep their internal message spacing.  Each procedure is placed
    at its start time modulo the window, once per copy; copies get a uniform
    random offset and procedures are thinned so that the expected load
    matches ``target_users`` users.
    """
    if not (window > 0 and base_duration > 0 and base_users > 0):
        raise ParameterError("replay: window, base_duration and base_users must be positive")
    if target_users <= 0 or len(trace) == 0:
        return SignalingTrace.empty()
    # multiplicity of the folded trace relative to base_users users over the window
    fold = base_duration / window
    need = target_users / base_users
    copies = max(1, math.ceil(need / fold))
    keep = need / (fold * copies)

    pid = trace.procedure_id
    uniq, first_idx, inv = np.unique(pid, return_index=True, return_inverse=True)
    t0 = trace.time[first_idx]
    parts_t, parts_msg, parts_pid, parts_ue = [], [], [], []
    for c in range(copies):
        offset = stream.uniform(0.0, window) if c else 0.0
        kept = stream.uniform(size=uniq.size) < keep
        sel = kept[inv]
        shift = (np.mod(t0 + offset, window) - t0)[inv[sel]]
        parts_t.append(trace.time[sel] + shift)
        parts_msg.append(trace.msg[sel])
        parts_pid.append(inv[sel] + c * uniq.size)
        parts_ue.append(trace.ue[sel] + c * base_users)
    t = np.concatenate(parts_t)
    order = np.lexsort((np.concatenate(parts_msg), np.concatenate(parts_pid), t))
    return SignalingTrace(t[order], np.concatenate(parts_ue)[order],
                          np.concatenate(parts_msg)[order], np.concatenate(parts_pid)[order])


@dataclass
class SweepPoint:
    users: float
    m: int
    procedures_per_s: float
    mean_delay: float


def capacity_sweep(traces: Callable[[float], SignalingTrace] | Mapping[float, SignalingTrace],
                   cfg: QueueNetworkConfig, user_counts: Iterable[float], ms: Iterable[int],
                   delay_budget: float = 1e-3, stream: RandomStream | None = None):
    """Mean sojourn per (users, m) and, per m, the largest tested user count within budget.

    ``traces`` maps a user count to the trace to simulate (a callable or a dict).
    The window length used for the procedure rate is the span of the trace.
    """
    if not delay_budget > 0:
        raise ParameterError("delay budget must be positive")
    stream = stream or RandomStream(0)
    user_counts = list(user_counts)
    points: list[SweepPoint] = []
    capacity: dict[int, float | None] = {}
    get = traces if callable(traces) else traces.__getitem__
    cache = {u: get(u) for u in user_counts}
    for m in ms:
        c = QueueNetworkConfig(cfg.balancer_rate, cfg.db_rate, cfg.db_probability, cfg.egress_rate,
                               m, cfg.nfv_profile, cfg.service_model)
        best = None
        for u in user_counts:
            tr = cache[u]
            res = run(tr, c, stream.child(m, len(points)))
            span = float(tr.time[-1] - tr.time[0]) if len(tr) > 1 else 0.0
            n_proc = len(np.unique(tr.procedure_id))
            rate = n_proc / span if span > 0 else 0.0
            points.append(SweepPoint(u, m, rate, res.stats.overall.mean))
            if res.stats.overall.mean <= delay_budget and (best is None or u > best):
                best = u
        capacity[m] = best
    return points, capacity


def find_capacity(traces: Callable[[float], SignalingTrace], cfg: QueueNetworkConfig,
                  delay_budget: float, lo: float, hi: float, steps: int = 14,
                  stream: RandomStream | None = None) -> float:
    """Largest user count in [lo, hi] whose mean sojourn meets the budget, by bisection.

    Assumes delay grows with load, which holds up to replay noise.  Returns
    ``lo`` if even ``lo`` misses the budget and ``hi`` if ``hi`` meets it.
    """
    if not (0 < lo < hi):
        raise ParameterError("find_capacity: need 0 < lo < hi")
    stream = stream or RandomStream(0)

    def ok(u):
        return run(traces(u), cfg, stream.child(int(u))).stats.overall.mean <= delay_budget

    if ok(hi):
        return hi
    if not ok(lo):
        return lo
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def write_sweep_csv(path, points: Sequence[SweepPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["users", "m", "procedures_per_s", "mean_delay_s"])
        for p in points:
            w.writerow([f"{p.users:.0f}", p.m, f"{p.procedures_per_s:.6f}", f"{p.mean_delay:.9e}"])


ADVISOR_SLOPE = 2.50e-6
ADVISOR_INTERCEPT = 6.36e-2
ADVISOR_VALID_USERS = 1.2e6


def scaling_advisor(users: float, slope: float = ADVISOR_SLOPE,
                    intercept: float = ADVISOR_INTERCEPT) -> int:
    """Number of vMME instances for ``users`` users (fit valid up to 1.2e6 users)."""
    if users < 0:
        raise ParameterError("user count must be nonnegative")
    return max(1, math.ceil(slope * users + intercept))


def fit_advisor(capacities: Mapping[int, float]) -> tuple[float, float]:
    """Least-squares line m ~ slope*u + intercept through measured (capacity, m) points."""
    pts = [(u, m) for m, u in capacities.items() if u is not None]
    if len(pts) < 2:
        raise ParameterError("need capacities for at least two instance counts")
    u, m = np.asarray(pts, dtype=float).T
    if np.ptp(u) == 0:
        raise ParameterError("measured capacities coincide; the line is undetermined")
    slope, intercept = np.polyfit(u, m, 1)
    return float(slope), float(intercept)
