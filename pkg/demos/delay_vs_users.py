"""
System delay versus users and vMME instances
============================================

Generate a desk-scale trace, replay it at the load of much larger
populations and push it through the processing chain with one, two and
three NFV instances.  Mean delay stays near the bare service time until
the busiest instance saturates, then climbs steeply.
"""

import numpy as np

from vmme import harness, qnet
from vmme.config import ExperimentConfig
from vmme.stochastic import RandomStream

cfg = ExperimentConfig(num_users=1000, sim_duration_s=5000.0)
base = harness.make_trace(cfg)
print(f"base trace: {len(base)} messages from {cfg.num_users} users")


def source(users):
    return qnet.replay(base, cfg.num_users, cfg.sim_duration_s, users, 5.0,
                       RandomStream(cfg.seed, 4, int(users)))


users = np.arange(100_000, 1_300_001, 150_000)
points, capacity = qnet.capacity_sweep(source, cfg.qnet, users, (1, 2, 3), 1e-3, RandomStream(1))

table = {(p.users, p.m): p.mean_delay for p in points}
print(f"\n{'users':>9} " + " ".join(f"{'m=' + str(m):>10}" for m in (1, 2, 3)))
for u in users:
    print(f"{u:9d} " + " ".join(f"{table[(u, m)] * 1e3:9.3f}ms" for m in (1, 2, 3)))

print()
for m, cap in capacity.items():
    print(f"m={m}: largest tested population within 1 ms: {cap}")

# Bisection gives a finer capacity estimate than the grid above.
for m in (1, 2):
    c = qnet.find_capacity(source, qnet.QueueNetworkConfig(m=m), 1e-3, 1e5, 1.5e6, steps=10)
    print(f"m={m}: bisected capacity {c:,.0f} users, advisor says {qnet.scaling_advisor(c)}")
