"""
Cell crossings under fluid-flow motion
======================================

Users move in straight lines at constant speed and bounce off the edge of
the 387 m x 552 m area.  The classic estimate v B / (pi S) assumes every
cell edge can be crossed; here the outer edges only reflect.
"""

import numpy as np

from vmme.mobility import (CellGrid, DEFAULT_SPEED, UeKinematics, analytic_ccr, init_users,
                           trajectory_crossings, user_crossings)
from vmme.stochastic import RandomStream

grid = CellGrid()
ccr = analytic_ccr(2.1, grid.cell_perimeter, grid.cell_area)
print(f"cell {grid.cell_width:.0f} m x {grid.cell_height:.0f} m, analytic CCR {ccr:.5f}/s")

# One user's first few crossings.
kin = UeKinematics(100.0, 60.0, 1.5, 0.6)
for ev in trajectory_crossings(kin, grid, 0.0, 300.0)[:5]:
    print(f"  t={ev.time:7.2f} s  cell {ev.from_cell:2d} -> {ev.to_cell:2d}")

# Population average.
n, T = 2000, 1e4
x, y, v, d = init_users(n, grid, DEFAULT_SPEED, RandomStream(3))
counts = np.array([len(user_crossings(UeKinematics(*k), grid, T)[0]) for k in zip(x, y, v, d)])
sim = counts.sum() / (n * T)

interior = (grid.cols - 1) * grid.area_height + (grid.rows - 1) * grid.area_width
share = 2 * interior / (grid.num_cells * grid.cell_perimeter)
print(f"simulated {sim:.5f}/s = {sim / ccr:.3f} x analytic; interior-edge share {share:.3f}")
