"""Fluid-flow mobility on a rectangular cell grid with reflecting edges.

Crossing times are computed exactly.  Reflection is handled by unfolding:
the x (resp. y) coordinate moves freely on the real line and the physical
coordinate is its triangle-wave fold onto [0, width].  Every multiple of
the cell width in unfolded space maps to a cell boundary; multiples of the
area width map to the outer edge and are reflections, not crossings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .stochastic import DistributionSpec, ParameterError, RandomStream, sample, uniform


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class CellGrid:
    area_width: float = 387.0
    area_height: float = 552.0
    cols: int = 3
    rows: int = 4

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ParameterError("CellGrid: need at least one row and column")
        if not (self.area_width > 0 and self.area_height > 0):
            raise ParameterError("CellGrid: area dimensions must be positive")

    @property
    def cell_width(self) -> float:
        return self.area_width / self.cols

    @property
    def cell_height(self) -> float:
        return self.area_height / self.rows

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols

    @property
    def cell_area(self) -> float:
        return self.cell_width * self.cell_height

    @property
    def cell_perimeter(self) -> float:
        return 2.0 * (self.cell_width + self.cell_height)


class UeKinematics(NamedTuple):
    x: float
    y: float
    speed: float
    direction: float

    @property
    def velocity(self) -> tuple[float, float]:
        return self.speed * math.cos(self.direction), self.speed * math.sin(self.direction)


class CrossingEvent(NamedTuple):
    time: float
    ue_id: int
    from_cell: int
    to_cell: int


DEFAULT_SPEED = uniform(0.0, 4.2)


def init_users(n: int, grid: CellGrid, speed_spec: DistributionSpec, stream: RandomStream):
    """Arrays (x, y, speed, direction) for ``n`` users: uniform position and heading."""
    x = stream.uniform(0.0, grid.area_width, n)
    y = stream.uniform(0.0, grid.area_height, n)
    direction = stream.uniform(0.0, 2.0 * math.pi, n)
    speed = sample(speed_spec, stream, n)
    return x, y, speed, direction


def init_user(grid: CellGrid, speed_spec: DistributionSpec, stream: RandomStream) -> UeKinematics:
    x, y, speed, direction = init_users(1, grid, speed_spec, stream)
    return UeKinematics(float(x[0]), float(y[0]), float(speed[0]), float(direction[0]))


def cell_of(position, grid: CellGrid) -> int:
    """Cell index of ``(x, y)``; interior boundary points belong to the higher index."""
    x, y = position
    if not (0.0 <= x <= grid.area_width and 0.0 <= y <= grid.area_height):
        raise DomainError(f"position {position} outside the {grid.area_width}x{grid.area_height} area")
    col = min(int(math.floor(x / grid.cell_width)), grid.cols - 1)
    row = min(int(math.floor(y / grid.cell_height)), grid.rows - 1)
    return col + grid.cols * row


def _fold(u: float, width: float) -> tuple[float, bool]:
    """Map an unfolded coordinate to [0, width]; flag whether motion is mirrored."""
    r = u % (2.0 * width)
    if r <= width:
        return r, False
    return 2.0 * width - r, True


def _fold_index(q: int, n: int) -> int:
    r = q % (2 * n)
    return r if r < n else 2 * n - 1 - r


def advance(kin: UeKinematics, grid: CellGrid, dt: float) -> UeKinematics:
    """State after ``dt`` seconds of straight motion with reflections."""
    vx, vy = kin.velocity
    x, flip_x = _fold(kin.x + vx * dt, grid.area_width)
    y, flip_y = _fold(kin.y + vy * dt, grid.area_height)
    if flip_x:
        vx = -vx
    if flip_y:
        vy = -vy
    direction = math.atan2(vy, vx) % (2.0 * math.pi) if kin.speed > 0 else kin.direction
    return UeKinematics(x, y, kin.speed, direction)


def _axis_crossings(u0: float, v: float, step: float, n: int, duration: float):
    """Unfolded line hits along one axis within (0, duration].

    Returns (times, unfolded cell index after each hit, starting unfolded index).
    """
    if v > 0:
        start = math.floor(u0 / step)
        first = start + 1
        last = math.floor((u0 + v * duration) / step)
        lines = np.arange(first, last + 1)
        after = lines
    elif v < 0:
        start = math.ceil(u0 / step) - 1
        first = start
        last = math.ceil((u0 + v * duration) / step)
        lines = np.arange(first, last - 1, -1)
        after = lines - 1
    else:
        return np.empty(0), np.empty(0, dtype=np.int64), min(math.floor(u0 / step), n - 1)
    times = (lines * step - u0) / v
    keep = (times > 0) & (times <= duration)
    return times[keep], after[keep], start


def trajectory_crossings(kin: UeKinematics, grid: CellGrid, t0: float, t1: float,
                         ue_id: int = 0) -> list[CrossingEvent]:
    """Every interior cell-boundary crossing in (t0, t1], position given at t0."""
    if not t1 > t0:
        raise ParameterError("trajectory_crossings: t1 > t0 required")
    times, cells = _crossing_arrays(kin, grid, t1 - t0)
    events = []
    prev = cell_of((kin.x, kin.y), grid) if len(times) else None
    for t, c in zip(times.tolist(), cells.tolist()):
        events.append(CrossingEvent(t0 + t, ue_id, prev, c))
        prev = c
    return events


def _crossing_arrays(kin: UeKinematics, grid: CellGrid, duration: float):
    if kin.speed <= 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    vx, vy = kin.velocity
    # tiny components from cos/sin of axis-aligned directions are treated as zero
    if abs(vx) < 1e-12 * kin.speed:
        vx = 0.0
    if abs(vy) < 1e-12 * kin.speed:
        vy = 0.0
    tx, qx, sx = _axis_crossings(kin.x, vx, grid.cell_width, grid.cols, duration)
    ty, qy, sy = _axis_crossings(kin.y, vy, grid.cell_height, grid.rows, duration)
    # unfolded multiples of cols (rows) are the outer walls
    wall_x = (qx % grid.cols == 0) if vx > 0 else ((qx + 1) % grid.cols == 0)
    wall_y = (qy % grid.rows == 0) if vy > 0 else ((qy + 1) % grid.rows == 0)

    t_all = np.concatenate((tx, ty))
    if t_all.size == 0:
        return t_all, np.empty(0, dtype=np.int64)
    axis = np.concatenate((np.zeros(tx.size, dtype=np.int8), np.ones(ty.size, dtype=np.int8)))
    q = np.concatenate((qx, qy))
    wall = np.concatenate((wall_x, wall_y))
    order = np.argsort(t_all, kind="stable")
    t_all, axis, q, wall = t_all[order], axis[order], q[order], wall[order]

    col = _fold_index(sx, grid.cols)
    row = _fold_index(sy, grid.rows)
    out_t, out_c = [], []
    cur = col + grid.cols * row
    i = 0
    n = t_all.size
    while i < n:
        # events at the same instant (corner hits) collapse into one transition
        j = i + 1
        while j < n and t_all[j] - t_all[i] <= 1e-12 * max(1.0, t_all[i]):
            j += 1
        crossed = False
        for k in range(i, j):
            if axis[k] == 0:
                col = _fold_index(int(q[k]), grid.cols)
            else:
                row = _fold_index(int(q[k]), grid.rows)
            crossed |= not wall[k]
        new = col + grid.cols * row
        if crossed and new != cur:
            out_t.append(t_all[i])
            out_c.append(new)
            cur = new
        i = j
    return np.asarray(out_t), np.asarray(out_c, dtype=np.int64)


def user_crossings(kin: UeKinematics, grid: CellGrid, duration: float):
    """Vector form for trace generation: (times, from_cells, to_cells) over (0, duration]."""
    times, cells = _crossing_arrays(kin, grid, duration)
    if times.size == 0:
        return times, cells, cells
    first = cell_of((kin.x, kin.y), grid)
    frm = np.concatenate(([first], cells[:-1]))
    return times, frm, cells


def analytic_ccr(mean_speed: float, perimeter: float, area: float) -> float:
    """Mean cell-crossing rate per user under fluid-flow motion."""
    if not (mean_speed > 0 and perimeter > 0 and area > 0):
        raise ParameterError("analytic_ccr: all arguments must be positive")
    return mean_speed * perimeter / (math.pi * area)


def write_crossings_csv(path, events: Sequence[CrossingEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "ue_id", "from_cell", "to_cell"])
        for e in events:
            w.writerow([f"{e.time:.6f}", e.ue_id, e.from_cell, e.to_cell])
