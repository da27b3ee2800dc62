"""Signaling-load and latency model of a virtualized MME.

Application traffic and fluid-flow mobility drive a per-UE connection state
machine, which produces the control-message trace fed to a queueing model
of the MME processing chain.  Closed-form rate predictors sit alongside.
"""

from . import analytics, mobility, qnet, signaling, stochastic, traffic

__version__ = "0.1.0"
__all__ = ["analytics", "mobility", "qnet", "signaling", "stochastic", "traffic"]
