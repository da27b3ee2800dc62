"""
Checking the queue engine against M/D/1 and M/M/1
=================================================

Feed Poisson arrivals to one FIFO station and compare the mean queue wait
with the Pollaczek-Khinchine values: rho/(2 mu (1-rho)) for deterministic
service and rho/(mu (1-rho)) for exponential service.
"""

import numpy as np

from vmme.qnet import single_station
from vmme.stochastic import RandomStream

mu = 1e5          # one job every 10 microseconds
n = 300_000

print(f"{'rho':>5} {'M/D/1 sim':>11} {'theory':>11} {'M/M/1 sim':>11} {'theory':>11}")
for k, rho in enumerate((0.3, 0.5, 0.8, 0.9)):
    g = RandomStream(7, k).generator
    arrivals = np.cumsum(g.exponential(1 / (rho * mu), n))
    wd = single_station(arrivals, np.full(n, 1 / mu)).mean()
    wm = single_station(arrivals, g.exponential(1 / mu, n)).mean()
    print(f"{rho:5.2f} {wd:11.3e} {rho / (2 * mu * (1 - rho)):11.3e} "
          f"{wm:11.3e} {rho / (mu * (1 - rho)):11.3e}")

# Near saturation the wait estimate converges slowly; rerun with a larger n
# to watch the 0.9 row settle.
