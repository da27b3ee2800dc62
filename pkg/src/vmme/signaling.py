"""Connection state machine turning user activity into control messages.

A UE goes Active when an activity period starts while Idle (SR procedure)
and back to Idle when the inactivity timer, armed at the end of each
activity period, expires before the next period starts (SRR procedure).
Cell crossings while Active produce HR procedures.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .stochastic import ParameterError

SR, SRR, HR = 0, 1, 2
PROCEDURE_NAMES = ("SR", "SRR", "HR")
MESSAGES_PER_PROCEDURE = (3, 3, 2)


class InputFormatError(ValueError):
    pass


class MessageType(IntEnum):
    SR1 = 0
    SR2 = 1
    SR3 = 2
    SRR1 = 3
    SRR2 = 4
    SRR3 = 5
    HR1 = 6
    HR2 = 7

    @property
    def procedure(self) -> int:
        return _PROC_OF[self]

    @property
    def index(self) -> int:
        return _INDEX_OF[self]

    @classmethod
    def of(cls, procedure: int, index: int) -> "MessageType":
        return cls(_FIRST[procedure] + index - 1)


_FIRST = (0, 3, 6)
_PROC_OF = np.array([SR, SR, SR, SRR, SRR, SRR, HR, HR], dtype=np.int8)
_INDEX_OF = np.array([1, 2, 3, 1, 2, 3, 1, 2], dtype=np.int8)


@dataclass(frozen=True)
class ProcedureTiming:
    inter_message_gap: float = 0.020

    def __post_init__(self):
        if not self.inter_message_gap >= 0:
            raise ParameterError("ProcedureTiming: inter_message_gap must be nonnegative")


@dataclass
class SignalingTrace:
    """Control-message arrivals, sorted by time (ties by procedure id, then message)."""
    time: np.ndarray
    ue: np.ndarray
    msg: np.ndarray  # MessageType codes
    procedure_id: np.ndarray

    def __len__(self):
        return len(self.time)

    @property
    def procedure(self) -> np.ndarray:
        return _PROC_OF[self.msg]

    @property
    def index(self) -> np.ndarray:
        return _INDEX_OF[self.msg]

    @classmethod
    def empty(cls) -> "SignalingTrace":
        return cls(np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8),
                   np.empty(0, dtype=np.int64))

    def procedure_counts(self) -> dict[str, int]:
        first = self.index == 1
        counts = np.bincount(self.procedure[first], minlength=3)
        return dict(zip(PROCEDURE_NAMES, counts.tolist()))

    def check_sorted(self) -> None:
        if np.any(np.diff(self.time) < 0):
            raise InputFormatError("signaling trace is not sorted by time")


def _active_intervals(start: np.ndarray, end: np.ndarray, timer: float, horizon: float):
    """(SR times, SRR times) for one UE; SRR after the horizon is dropped."""
    sr, srr = [], []
    active = False
    deadline = -math.inf
    for s, e in zip(start.tolist(), end.tolist()):
        if active and deadline <= s:
            srr.append(deadline)
            active = False
        if not active:
            sr.append(s)
            active = True
        deadline = e + timer
    if active and deadline <= horizon and math.isfinite(deadline):
        srr.append(deadline)
    return sr, srr


def active_intervals(start, end, timer: float, horizon: float = math.inf):
    """List of ``(sr_time, srr_time)``; an interval still open at the horizon ends at inf."""
    sr, srr = _active_intervals(np.asarray(start, float), np.asarray(end, float), timer, horizon)
    srr = srr + [math.inf] * (len(sr) - len(srr))
    return list(zip(sr, srr))


def build_trace(sessions: Sequence, crossings: Sequence, timer: float,
                timing: ProcedureTiming = ProcedureTiming(),
                horizon: float = math.inf) -> SignalingTrace:
    """Merge per-UE activity and crossings into one time-ordered message trace.

    ``sessions[i]`` is a SessionTrace (or anything with ``ue_id``, ``start``
    and ``end``); ``crossings[i]`` is the matching sequence of crossing times
    (or CrossingEvent objects).  ``timer`` may be ``math.inf``.
    """
    if not timer >= 0:
        raise ParameterError("inactivity timer must be nonnegative")
    if len(sessions) != len(crossings):
        raise InputFormatError("sessions and crossings must be given per UE")
    t_parts, ue_parts, kind_parts = [], [], []
    for tr, cx in zip(sessions, crossings):
        start = np.asarray(tr.start, dtype=float)
        end = np.asarray(tr.end, dtype=float)
        ct = _crossing_times(cx)
        if np.any(end < start) or np.any(start[1:] < end[:-1]):
            raise InputFormatError(f"UE {tr.ue_id}: activity periods unordered or overlapping")
        if np.any(np.diff(ct) < 0):
            raise InputFormatError(f"UE {tr.ue_id}: crossing events unordered")
        sr, srr = _active_intervals(start, end, timer, horizon)
        sr = np.asarray(sr)
        srr_full = np.concatenate((srr, np.full(len(sr) - len(srr), math.inf)))
        # HR iff the crossing falls in [sr_k, srr_k) of the latest SR before it
        if len(sr):
            k = np.searchsorted(sr, ct, side="right") - 1
            hr = ct[(k >= 0) & (ct < srr_full[np.maximum(k, 0)])]
        else:
            hr = ct[:0]
        t_parts += [sr, np.asarray(srr), hr]
        n = len(sr) + len(srr) + len(hr)
        ue_parts.append(np.full(n, tr.ue_id, dtype=np.int64))
        kind_parts += [np.full(len(sr), SR, np.int8), np.full(len(srr), SRR, np.int8),
                       np.full(len(hr), HR, np.int8)]
    if not t_parts:
        return SignalingTrace.empty()
    return _expand(np.concatenate(t_parts), np.concatenate(ue_parts),
                   np.concatenate(kind_parts), timing.inter_message_gap)


def _crossing_times(cx) -> np.ndarray:
    if isinstance(cx, np.ndarray):
        return cx.astype(float)
    return np.asarray([getattr(c, "time", c) for c in cx], dtype=float)


def _expand(trigger: np.ndarray, ue: np.ndarray, kind: np.ndarray, gap: float) -> SignalingTrace:
    order = np.lexsort((kind, ue, trigger))
    trigger, ue, kind = trigger[order], ue[order], kind[order]
    pid = np.arange(trigger.size, dtype=np.int64)
    n_msgs = np.asarray(MESSAGES_PER_PROCEDURE)[kind]
    rep = np.repeat(np.arange(trigger.size), n_msgs)
    offsets = np.arange(rep.size) - np.repeat(np.cumsum(n_msgs) - n_msgs, n_msgs)
    time = trigger[rep] + offsets * gap
    msg = (np.asarray(_FIRST)[kind[rep]] + offsets).astype(np.int8)
    order = np.lexsort((offsets, pid[rep], time))
    return SignalingTrace(time[order], ue[rep][order], msg[order], pid[rep][order])


def empirical_rates(trace: SignalingTrace, num_users: int, duration: float) -> tuple[float, float, float]:
    """Per-user procedure rates (SR, SRR, HR), counted by procedure instance."""
    if not duration > 0:
        raise ParameterError("duration must be positive")
    if len(trace) == 0:
        return 0.0, 0.0, 0.0
    proc = trace.procedure
    counts = [len(np.unique(trace.procedure_id[proc == p])) for p in (SR, SRR, HR)]
    denom = num_users * duration
    return tuple(c / denom for c in counts)


def procedure_sequence(trace: SignalingTrace, ue_id: int) -> list[tuple[str, list[int]]]:
    """Procedures of one UE in trigger order, each with its message indices in time order."""
    sel = trace.ue == ue_id
    pids = trace.procedure_id[sel]
    procs = trace.procedure[sel]
    idx = trace.index[sel]
    times = trace.time[sel]
    out: dict[int, tuple[float, str, list[int]]] = {}
    for p, k, i, t in zip(pids.tolist(), procs.tolist(), idx.tolist(), times.tolist()):
        if p not in out:
            out[p] = (t, PROCEDURE_NAMES[k], [])
        out[p][2].append(i)
    return [(name, msgs) for _, name, msgs in sorted(out.values(), key=lambda v: v[0])]


def write_trace_csv(path, trace: SignalingTrace) -> None:
    proc = trace.procedure
    idx = trace.index
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "ue_id", "procedure", "message", "procedure_id"])
        for t, u, p, i, pid in zip(trace.time.tolist(), trace.ue.tolist(), proc.tolist(),
                                   idx.tolist(), trace.procedure_id.tolist()):
            w.writerow([f"{t:.9f}", u, PROCEDURE_NAMES[p], i, pid])


def read_trace_csv(path) -> SignalingTrace:
    """Parse a trace file; malformed rows raise InputFormatError naming the line."""
    names = {n: k for k, n in enumerate(PROCEDURE_NAMES)}
    times, ues, msgs, pids = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "ue_id", "procedure", "message", "procedure_id"]:
            raise InputFormatError(f"{path}:1: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            try:
                t, u, p, i, pid = row
                proc = names[p]
                index = int(i)
                if not 1 <= index <= MESSAGES_PER_PROCEDURE[proc]:
                    raise ValueError(f"message index {index} invalid for {p}")
                t = float(t)
                if not math.isfinite(t):
                    raise ValueError("non-finite time")
                times.append(t)
                ues.append(int(u))
                msgs.append(_FIRST[proc] + index - 1)
                pids.append(int(pid))
            except (ValueError, KeyError) as exc:
                raise InputFormatError(f"{path}:{lineno}: malformed trace row {row!r} ({exc})") from None
    trace = SignalingTrace(np.asarray(times, dtype=float), np.asarray(ues, dtype=np.int64),
                           np.asarray(msgs, dtype=np.int8), np.asarray(pids, dtype=np.int64))
    try:
        trace.check_sorted()
    except InputFormatError as exc:
        raise InputFormatError(f"{path}: {exc}") from None
    return trace


def iter_messages(trace: SignalingTrace) -> Iterable[tuple[float, int, MessageType, int]]:
    for t, u, m, p in zip(trace.time.tolist(), trace.ue.tolist(), trace.msg.tolist(),
                          trace.procedure_id.tolist()):
        yield t, u, MessageType(m), p
