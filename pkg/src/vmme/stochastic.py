"""Distribution laws used by the traffic and rate models.

A :class:`DistributionSpec` is an immutable (kind, params) pair.  Parameters
are validated at construction, so sampling never has to re-check them.
Sampling goes through :class:`RandomStream`, a thin seeded wrapper over a
numpy PCG64 generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "ParameterError",
    "DistributionSpec",
    "RandomStream",
    "exponential",
    "truncated_lognormal",
    "truncated_pareto",
    "generalized_pareto",
    "geometric",
    "uniform",
    "constant",
    "empirical",
    "sample",
    "survival",
    "mean",
    "truncated_expectation",
]

KINDS = (
    "Exponential",
    "TruncatedLognormal",
    "TruncatedPareto",
    "GeneralizedPareto",
    "Geometric",
    "Uniform",
    "Constant",
    "Empirical",
)

_REQUIRED = {
    "Exponential": ("mean",),
    "TruncatedLognormal": ("mu", "sigma", "min", "max"),
    "TruncatedPareto": ("shape", "scale", "max"),
    "GeneralizedPareto": ("k", "s", "m"),
    "Geometric": ("p",),
    "Uniform": ("low", "high"),
    "Constant": ("value",),
    "Empirical": ("samples",),
}

# relative tolerance for numerical quadrature
QUAD_RTOL = 1e-10


class ParameterError(ValueError):
    """Invalid distribution (or model) parameter."""


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _REQUIRED:
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        params = dict(self.params)
        missing = [k for k in _REQUIRED[self.kind] if k not in params]
        if missing:
            raise ParameterError(f"{self.kind}: missing parameter(s) {missing}")
        extra = set(params) - set(_REQUIRED[self.kind])
        if extra:
            raise ParameterError(f"{self.kind}: unexpected parameter(s) {sorted(extra)}")
        if self.kind == "Empirical":
            arr = np.sort(np.asarray(params["samples"], dtype=float))
            if arr.size == 0 or not np.all(np.isfinite(arr)):
                raise ParameterError("Empirical: samples must be a nonempty finite array")
            arr.setflags(write=False)
            params["samples"] = arr
        else:
            for k, v in params.items():
                params[k] = float(v)
        _validate(self.kind, params)
        object.__setattr__(self, "params", MappingProxyType(params))

    def __getitem__(self, key):
        return self.params[key]

    def __hash__(self):
        if self.kind == "Empirical":
            return hash((self.kind, self.params["samples"].tobytes()))
        return hash((self.kind, tuple(sorted(self.params.items()))))

    def __eq__(self, other):
        if not isinstance(other, DistributionSpec) or other.kind != self.kind:
            return NotImplemented if not isinstance(other, DistributionSpec) else False
        if self.kind == "Empirical":
            return np.array_equal(self.params["samples"], other.params["samples"])
        return dict(self.params) == dict(other.params)

    def to_dict(self) -> dict:
        if self.kind == "Empirical":
            return {"kind": self.kind, "samples": self.params["samples"].tolist()}
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DistributionSpec":
        d = dict(d)
        try:
            kind = d.pop("kind")
        except KeyError:
            raise ParameterError("distribution entry needs a 'kind'") from None
        if kind == "TruncatedPareto" and "mean" in d and "scale" not in d:
            return truncated_pareto(mean=d["mean"], shape=d["shape"], max=d["max"])
        if kind == "TruncatedLognormal" and "median" in d and "mu" not in d:
            d["mu"] = math.log(float(d.pop("median")))
        return cls(kind, d)

    @property
    def support(self) -> tuple[float, float]:
        p = self.params
        k = self.kind
        if k == "Exponential":
            return 0.0, math.inf
        if k == "TruncatedLognormal":
            return p["min"], p["max"]
        if k == "TruncatedPareto":
            return p["scale"], p["max"]
        if k == "GeneralizedPareto":
            upper = p["m"] - p["s"] / p["k"] if p["k"] < 0 else math.inf
            return p["m"], upper
        if k == "Geometric":
            return 1.0, math.inf
        if k == "Uniform":
            return p["low"], p["high"]
        if k == "Constant":
            return p["value"], p["value"]
        s = p["samples"]
        return float(s[0]), float(s[-1])


def _validate(kind: str, p: dict) -> None:
    def positive(name):
        if not (p[name] > 0 and math.isfinite(p[name])):
            raise ParameterError(f"{kind}: {name} must be positive and finite, got {p[name]}")

    if kind == "Exponential":
        positive("mean")
    elif kind == "TruncatedLognormal":
        positive("sigma")
        positive("min")
        if not p["min"] < p["max"]:
            raise ParameterError(f"{kind}: min < max required")
        if not math.isfinite(p["mu"]):
            raise ParameterError(f"{kind}: mu must be finite")
    elif kind == "TruncatedPareto":
        positive("shape")
        positive("scale")
        if not p["scale"] < p["max"]:
            raise ParameterError(f"{kind}: scale < max required")
    elif kind == "GeneralizedPareto":
        positive("s")
        if not (math.isfinite(p["k"]) and math.isfinite(p["m"])):
            raise ParameterError(f"{kind}: k and m must be finite")
    elif kind == "Geometric":
        if not 0.0 <= p["p"] < 1.0:
            raise ParameterError(f"{kind}: p must lie in [0, 1), got {p['p']}")
    elif kind == "Uniform":
        if not p["low"] < p["high"]:
            raise ParameterError(f"{kind}: low < high required")
    elif kind == "Constant":
        if not math.isfinite(p["value"]):
            raise ParameterError(f"{kind}: value must be finite")


# -- constructors ------------------------------------------------------------

def exponential(mean: float) -> DistributionSpec:
    return DistributionSpec("Exponential", {"mean": mean})


def truncated_lognormal(mu: float, sigma: float, min: float, max: float) -> DistributionSpec:
    return DistributionSpec("TruncatedLognormal", {"mu": mu, "sigma": sigma, "min": min, "max": max})


def truncated_pareto(shape: float, max: float, scale: float | None = None,
                     mean: float | None = None) -> DistributionSpec:
    """Pareto law conditioned on ``X <= max``.

    Give either ``scale`` directly or a target ``mean``; in the latter case
    the scale is solved numerically.
    """
    if (scale is None) == (mean is None):
        raise ParameterError("TruncatedPareto: give exactly one of scale or mean")
    if scale is None:
        mean = float(mean)
        if not 0 < mean < max:
            raise ParameterError("TruncatedPareto: target mean must lie in (0, max)")
        f = lambda xm: _trunc_pareto_mean(shape, xm, max) - mean
        scale = optimize.brentq(f, max * 1e-12, max * (1 - 1e-12), xtol=1e-14, rtol=1e-15)
    return DistributionSpec("TruncatedPareto", {"shape": shape, "scale": scale, "max": max})


def generalized_pareto(k: float, s: float, m: float = 0.0) -> DistributionSpec:
    return DistributionSpec("GeneralizedPareto", {"k": k, "s": s, "m": m})


def geometric(p: float) -> DistributionSpec:
    return DistributionSpec("Geometric", {"p": p})


def uniform(low: float, high: float) -> DistributionSpec:
    return DistributionSpec("Uniform", {"low": low, "high": high})


def constant(value: float) -> DistributionSpec:
    return DistributionSpec("Constant", {"value": value})


def empirical(samples) -> DistributionSpec:
    return DistributionSpec("Empirical", {"samples": samples})


# -- random stream -----------------------------------------------------------

class RandomStream:
    """Seeded random source; one owner per stream.

    ``RandomStream(seed, *keys)`` derives an independent stream for a
    sub-entity (e.g. a UE id) without consuming draws from a parent.
    """

    def __init__(self, seed: int = 0, *keys: int):
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, *self.keys]
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def child(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, *self.keys, *keys)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def exponential(self, mean=1.0, size=None):
        return self.generator.exponential(mean, size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, keys={self.keys})"


# -- sampling ----------------------------------------------------------------

def sample(spec: DistributionSpec, stream: RandomStream, size=None):
    """Draw from ``spec``.  Returns a float, or an array when ``size`` is given."""
    rng = stream.generator
    n = 1 if size is None else int(np.prod(size))
    out = _draw(spec, rng, n)
    if size is None:
        return float(out[0])
    return out.reshape(size)


def _draw(spec: DistributionSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    p = spec.params
    kind = spec.kind
    if kind == "Exponential":
        return rng.exponential(p["mean"], n)
    if kind == "TruncatedLognormal":
        # rejection keeps the conditional law; clamping would put atoms at the bounds
        out = np.empty(n)
        filled = 0
        lo, hi = math.log(p["min"]), math.log(p["max"])
        while filled < n:
            z = rng.normal(p["mu"], p["sigma"], max(n - filled, 16))
            z = z[(z >= lo) & (z <= hi)]
            take = min(z.size, n - filled)
            out[filled:filled + take] = np.exp(z[:take])
            filled += take
        return out
    if kind == "TruncatedPareto":
        a, xm, top = p["shape"], p["scale"], p["max"]
        u = rng.random(n)
        # inverse CDF of the conditioned law
        tail = 1.0 - (xm / top) ** a
        return np.minimum(xm * (1.0 - u * tail) ** (-1.0 / a), top)
    if kind == "GeneralizedPareto":
        k, s, m = p["k"], p["s"], p["m"]
        u = 1.0 - rng.random(n)  # (0, 1]
        if k == 0.0:
            return m - s * np.log(u)
        return m + s * np.expm1(-k * np.log(u)) / k
    if kind == "Geometric":
        return rng.geometric(1.0 - p["p"], n).astype(float)
    if kind == "Uniform":
        return rng.uniform(p["low"], p["high"], n)
    if kind == "Constant":
        return np.full(n, p["value"])
    return rng.choice(p["samples"], n)


# -- survival, mean, truncated expectation -------------------------------------

def survival(spec: DistributionSpec, x: float) -> float:
    """P(X > x)."""
    p = spec.params
    kind = spec.kind
    lo, hi = spec.support
    if kind == "Empirical":
        s = p["samples"]
        return float((s.size - np.searchsorted(s, x, side="right")) / s.size)
    if kind == "Constant":
        return 1.0 if x < p["value"] else 0.0
    if x < lo:
        return 1.0
    if x >= hi:
        return 0.0
    if kind == "Exponential":
        return math.exp(-x / p["mean"])
    if kind == "TruncatedLognormal":
        a, b, z = _lognormal_z(p, x)
        mass = special.ndtr(b) - special.ndtr(a)
        if mass > 0.5:
            return float(max(0.0, special.ndtr(b) - special.ndtr(z)) / mass)
        # both bounds deep in the upper tail: use complementary functions
        return float(max(0.0, special.ndtr(-z) - special.ndtr(-b)) / (special.ndtr(-a) - special.ndtr(-b)))
    if kind == "TruncatedPareto":
        a, xm, top = p["shape"], p["scale"], p["max"]
        return ((xm / x) ** a - (xm / top) ** a) / (1.0 - (xm / top) ** a)
    if kind == "GeneralizedPareto":
        k, s, m = p["k"], p["s"], p["m"]
        y = (x - m) / s
        if k == 0.0:
            return math.exp(-y)
        return math.exp(-math.log1p(k * y) / k)
    if kind == "Geometric":
        return p["p"] ** math.floor(x)
    return (p["high"] - x) / (p["high"] - p["low"])


def _lognormal_z(p, x):
    sig = p["sigma"]
    return ((math.log(p["min"]) - p["mu"]) / sig,
            (math.log(p["max"]) - p["mu"]) / sig,
            (math.log(x) - p["mu"]) / sig)


def mean(spec: DistributionSpec) -> float:
    p = spec.params
    kind = spec.kind
    if kind == "Exponential":
        return p["mean"]
    if kind == "TruncatedLognormal":
        mu, sig = p["mu"], p["sigma"]
        a = (math.log(p["min"]) - mu) / sig
        b = (math.log(p["max"]) - mu) / sig
        # log-space ratio avoids overflow in the shifted normal masses
        num = _log_ndtr_diff(b - sig, a - sig)
        den = _log_ndtr_diff(b, a)
        return math.exp(mu + 0.5 * sig * sig + num - den)
    if kind == "TruncatedPareto":
        return _trunc_pareto_mean(p["shape"], p["scale"], p["max"])
    if kind == "GeneralizedPareto":
        if p["k"] >= 1.0:
            raise ParameterError("GeneralizedPareto: mean is infinite for k >= 1")
        return p["m"] + p["s"] / (1.0 - p["k"])
    if kind == "Geometric":
        return 1.0 / (1.0 - p["p"])
    if kind == "Uniform":
        return 0.5 * (p["low"] + p["high"])
    if kind == "Constant":
        return p["value"]
    return float(np.mean(p["samples"]))


def _log_ndtr_diff(b: float, a: float) -> float:
    """log(Phi(b) - Phi(a)) for a < b."""
    if a > 0:
        # upper tail: Phi(b)-Phi(a) = Phi(-a)-Phi(-b)
        a, b = -b, -a
    lb = special.log_ndtr(b)
    la = special.log_ndtr(a)
    return lb + math.log1p(-math.exp(la - lb))


def _trunc_pareto_mean(a: float, xm: float, top: float) -> float:
    tail = 1.0 - (xm / top) ** a
    if abs(a - 1.0) < 1e-12:
        body = xm * math.log(top / xm)
    else:
        body = a * xm ** a * (xm ** (1 - a) - top ** (1 - a)) / (a - 1.0)
    return body / tail


def truncated_expectation(spec: DistributionSpec, cap: float) -> float:
    """E[min(X, cap)] for a nonnegative variate X."""
    if not cap >= 0:
        raise ParameterError(f"cap must be nonnegative, got {cap}")
    lo, hi = spec.support
    if lo < 0:
        raise ParameterError("truncated_expectation needs a nonnegative variate")
    if cap == 0:
        return 0.0
    p = spec.params
    kind = spec.kind
    if cap >= hi:
        return mean(spec)
    if kind == "Exponential":
        return p["mean"] * -math.expm1(-cap / p["mean"])
    if kind == "Constant":
        return min(cap, p["value"])
    if kind == "Empirical":
        return float(np.mean(np.minimum(p["samples"], cap)))
    if kind == "Geometric":
        # sum_{n>=0, n<cap} P(X > n), integer steps plus the fractional piece
        q = p["p"]
        whole = math.floor(cap)
        return (1 - q ** whole) / (1 - q) + (cap - whole) * q ** whole
    # E[min(X, c)] = lo + integral of the survival function from lo to c
    if cap <= lo:
        return cap
    val, _ = integrate.quad(lambda t: survival(spec, t), lo, cap,
                            epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return lo + val
