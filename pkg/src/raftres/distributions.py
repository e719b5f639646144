"""Failure, repair and dormancy time distributions.

Parameter conventions (all times share the model's time unit):

=============  ==================  =========================================
family         parameters         CDF / definition
=============  ==================  =========================================
Dirac          x > 0              point mass at x
Exponential    rate > 0           1 - exp(-rate t)
Erlang         k in N>0, rate>0   sum of k Exponential(rate)
Uniform        0 <= a < b         uniform on [a, b]
Rayleigh       sigma > 0          1 - exp(-t^2 / (2 sigma^2))
Weibull        k > 0, rate > 0    1 - exp(-(rate t)^k)      (rate-like scale)
Normal         mu, sigma > 0      normal, redrawn until the value is > 0
LogNormal      mu, sigma > 0      exp(Normal(mu, sigma))
NeverFires     none               +inf (the clock never expires)
=============  ==================  =========================================

Note the Weibull convention: the second parameter is the *inverse* of the
usual scale, so ``weibull(4.5, 0.0125)`` has characteristic life 80.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from .rng import RngStream, next_uniform


class Family(IntEnum):
    DIRAC = 0
    EXPONENTIAL = 1
    ERLANG = 2
    UNIFORM = 3
    RAYLEIGH = 4
    WEIBULL = 5
    NORMAL = 6
    LOGNORMAL = 7
    NEVER = 8


ARITY = {
    Family.DIRAC: 1,
    Family.EXPONENTIAL: 1,
    Family.ERLANG: 2,
    Family.UNIFORM: 2,
    Family.RAYLEIGH: 1,
    Family.WEIBULL: 2,
    Family.NORMAL: 2,
    Family.LOGNORMAL: 2,
    Family.NEVER: 0,
}


class ParamError(ValueError):
    def __init__(self, family, field, message):
        self.family = family
        self.field = field
        super().__init__(f"{family.name.lower()}: parameter {field!r} {message}")


@dataclass(frozen=True)
class Pdf:
    family: Family
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def __str__(self):
        from .galileo import format_pdf

        return format_pdf(self)

    def mean(self) -> float:
        f, p = self.family, self.params
        if f is Family.DIRAC:
            return p[0]
        if f is Family.EXPONENTIAL:
            return 1.0 / p[0]
        if f is Family.ERLANG:
            return p[0] / p[1]
        if f is Family.UNIFORM:
            return 0.5 * (p[0] + p[1])
        if f is Family.RAYLEIGH:
            return p[0] * math.sqrt(math.pi / 2)
        if f is Family.WEIBULL:
            return math.gamma(1 + 1 / p[0]) / p[1]
        if f is Family.NORMAL:
            # mean of the normal truncated to (0, inf)
            mu, s = p
            a = -mu / s
            phi = math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi)
            tail = 0.5 * math.erfc(a / math.sqrt(2))
            return mu + s * phi / tail
        if f is Family.LOGNORMAL:
            return math.exp(p[0] + 0.5 * p[1] ** 2)
        return math.inf


def dirac(x):
    return Pdf(Family.DIRAC, (x,))


def exponential(rate):
    return Pdf(Family.EXPONENTIAL, (rate,))


def erlang(k, rate):
    return Pdf(Family.ERLANG, (k, rate))


def uniform(a, b):
    return Pdf(Family.UNIFORM, (a, b))


def rayleigh(sigma):
    return Pdf(Family.RAYLEIGH, (sigma,))


def weibull(k, rate):
    return Pdf(Family.WEIBULL, (k, rate))


def normal(mu, sigma):
    return Pdf(Family.NORMAL, (mu, sigma))


def lognormal(mu, sigma):
    return Pdf(Family.LOGNORMAL, (mu, sigma))


NEVER = Pdf(Family.NEVER, ())


def _positive(pdf, i, name):
    v = pdf.params[i]
    if not (math.isfinite(v) and v > 0):
        raise ParamError(pdf.family, name, f"must be a finite number > 0, got {v}")


def validate(pdf: Pdf) -> Pdf:
    """Check the parameter invariants of ``pdf``; return it unchanged or raise ParamError."""
    f = pdf.family
    n = ARITY[f]
    if len(pdf.params) != n:
        raise ParamError(f, "params", f"expects {n} values, got {len(pdf.params)}")
    if f is Family.DIRAC:
        _positive(pdf, 0, "x")
    elif f is Family.EXPONENTIAL:
        _positive(pdf, 0, "rate")
    elif f is Family.ERLANG:
        k = pdf.params[0]
        if not (k >= 1 and float(k).is_integer()):
            raise ParamError(f, "k", f"must be a positive integer, got {k}")
        _positive(pdf, 1, "rate")
    elif f is Family.UNIFORM:
        a, b = pdf.params
        if not (math.isfinite(a) and a >= 0):
            raise ParamError(f, "a", f"must be >= 0, got {a}")
        if not (math.isfinite(b) and a < b):
            raise ParamError(f, "b", f"must exceed a={a}, got {b}")
    elif f is Family.RAYLEIGH:
        _positive(pdf, 0, "sigma")
    elif f is Family.WEIBULL:
        _positive(pdf, 0, "k")
        _positive(pdf, 1, "rate")
    elif f in (Family.NORMAL, Family.LOGNORMAL):
        if not math.isfinite(pdf.params[0]):
            raise ParamError(f, "mu", "must be finite")
        _positive(pdf, 1, "sigma")
    return pdf


def encode(pdf: Pdf):
    """Kernel encoding: ``(code, p0, p1)``."""
    p = pdf.params + (0.0, 0.0)
    return int(pdf.family), p[0], p[1]


@njit(cache=True, nogil=True)
def _std_normal(rng):
    u1 = next_uniform(rng)
    u2 = next_uniform(rng)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True, nogil=True)
def sample_code(code, p0, p1, rng):
    if code == 0:
        return p0
    if code == 1:
        return -math.log(next_uniform(rng)) / p0
    if code == 2:
        acc = 0.0
        for _ in range(int(p0)):
            acc -= math.log(next_uniform(rng))
        return acc / p1
    if code == 3:
        return p0 + (p1 - p0) * next_uniform(rng)
    if code == 4:
        return p0 * math.sqrt(-2.0 * math.log(next_uniform(rng)))
    if code == 5:
        return (-math.log(next_uniform(rng))) ** (1.0 / p0) / p1
    if code == 6:
        while True:
            x = p0 + p1 * _std_normal(rng)
            if x > 0.0:
                return x
    if code == 7:
        return math.exp(p0 + p1 * _std_normal(rng))
    return math.inf


@njit(cache=True, nogil=True)
def _sample_many(code, p0, p1, rng, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = sample_code(code, p0, p1, rng)
    return out


def sample(pdf: Pdf, rng: RngStream) -> float:
    """One draw from ``pdf`` (``inf`` for NeverFires)."""
    return float(sample_code(*encode(pdf), rng.state))


def sample_many(pdf: Pdf, rng: RngStream, n: int) -> np.ndarray:
    return _sample_many(*encode(pdf), rng.state, int(n))
