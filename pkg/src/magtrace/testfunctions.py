"""Closed family of rapidly decaying weights f on [0, inf).

Every variant is decreasing on ``[peak, inf)`` and knows an upper envelope
``sup_{E' >= E} |f(E')|`` and the integral of that envelope, which is all the
series and window truncation rules need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError


class TestFunction:
    """Base class; subclasses are frozen dataclasses."""

    __test__ = False  # keep pytest from collecting this as a test class
    kind = "abstract"

    def __call__(self, E):
        raise NotImplementedError

    def envelope(self, E):
        """Upper bound for sup_{E' >= E} |f(E')|."""
        raise NotImplementedError

    def tail_integral(self, E):
        """Upper bound for the integral of ``envelope`` over (E, inf)."""
        raise NotImplementedError

    def energy_cutoff(self, tol):
        """Energy beyond which ``envelope`` stays below ``tol``."""
        raise NotImplementedError

    def dilate(self, lam):
        """The same variant evaluated at ``lam * E``."""
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind, **self.params()}

    def e_decay(self):
        """Smallest E with |f(E')| E'^8 <= 1 for all E' >= E."""
        def g(E):
            return math.log(max(self.envelope(E), 1e-300)) + 8.0 * math.log(E)

        grid = np.geomspace(1e-3, 1e5, 4001)
        vals = np.array([g(E) for E in grid])
        bad = np.nonzero(vals > 0)[0]
        if bad.size == 0:
            return 0.0
        i = bad[-1]
        if i + 1 >= grid.size:
            return math.inf
        return optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-12)

    def __add__(self, other):
        return LinearCombination(((1.0, self), (1.0, other)))

    def __rmul__(self, alpha):
        return LinearCombination(((float(alpha), self),))


@dataclass(frozen=True)
class Gaussian(TestFunction):
    """f(E) = exp(-((E - c)/w)^2)."""

    c: float = 1.0
    w: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError(f"gaussian center must be >= 0, got {self.c}")
        if not self.w > 0:
            raise DomainError(f"gaussian width must be > 0, got {self.w}")

    def __call__(self, E):
        x = (np.asarray(E, dtype=float) - self.c) / self.w
        return np.exp(-x * x)

    def envelope(self, E):
        E = np.asarray(E, dtype=float)
        return np.where(E <= self.c, 1.0, self(E))

    def tail_integral(self, E):
        E = np.asarray(E, dtype=float)
        head = np.maximum(self.c - E, 0.0)
        x = np.maximum((E - self.c) / self.w, 0.0)
        return head + 0.5 * math.sqrt(math.pi) * self.w * special.erfc(x)

    def energy_cutoff(self, tol):
        return self.c + self.w * math.sqrt(max(math.log(1.0 / tol), 0.0))

    def dilate(self, lam):
        return Gaussian(self.c / lam, self.w / lam)

    def params(self):
        return {"c": self.c, "w": self.w}


class _Exponential(TestFunction):
    # shared by the two Fermi-type weights: both decreasing, both <= exp(-beta (E - mu))

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be > 0, got {self.beta}")

    def envelope(self, E):
        return self(E)

    def energy_cutoff(self, tol):
        return self.mu + max(math.log(1.0 / tol), 0.0) / self.beta

    def params(self):
        return {"beta": self.beta, "mu": self.mu}


@dataclass(frozen=True)
class FermiDirac(_Exponential):
    """f(E) = 1 / (exp(beta (E - mu)) + 1)."""

    beta: float = 1.0
    mu: float = 0.0
    kind = "fermi_dirac"

    def __call__(self, E):
        return special.expit(-self.beta * (np.asarray(E, dtype=float) - self.mu))

    def tail_integral(self, E):
        z = -self.beta * (np.asarray(E, dtype=float) - self.mu)
        return np.logaddexp(0.0, z) / self.beta

    def dilate(self, lam):
        return FermiDirac(self.beta * lam, self.mu / lam)


@dataclass(frozen=True)
class LogPressure(_Exponential):
    """f(E) = ln(1 + exp(-beta (E - mu)))."""

    beta: float = 1.0
    mu: float = 0.0
    kind = "log_pressure"

    def __call__(self, E):
        return np.logaddexp(0.0, -self.beta * (np.asarray(E, dtype=float) - self.mu))

    def tail_integral(self, E):
        # integral of ln(1+y e^{-beta s}) ds = -Li2(-y)/beta, Li2(x) = spence(1 - x)
        y = np.exp(-self.beta * (np.asarray(E, dtype=float) - self.mu))
        return -_li2_neg(y) / self.beta

    def dilate(self, lam):
        return LogPressure(self.beta * lam, self.mu / lam)


def _li2_neg(y):
    """Li2(-y) for y >= 0."""
    return special.spence(1.0 + np.asarray(y, dtype=float))


def _smooth_step(x):
    """C-infinity step: 1 for x <= 0, 0 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x < 1.0, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    b = np.where(x > 0.0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothedStep(TestFunction):
    """Mollified indicator of (-inf, E0].

    ``side="lower"`` ramps down on [E0 - eps, E0] (so f <= 1 below E0 and
    vanishes from E0 on); ``side="upper"`` ramps down on [E0, E0 + eps].
    """

    E0: float = 1.0
    eps: float = 0.1
    side: str = "lower"
    kind = "smoothed_step"

    def __post_init__(self):
        if not self.E0 > 0:
            raise DomainError(f"E0 must be > 0, got {self.E0}")
        if not self.eps > 0:
            raise DomainError(f"eps must be > 0, got {self.eps}")
        if self.side not in ("lower", "upper"):
            raise DomainError(f"side must be 'lower' or 'upper', got {self.side!r}")

    @property
    def ramp_start(self):
        return self.E0 - self.eps if self.side == "lower" else self.E0

    @property
    def support_end(self):
        return self.ramp_start + self.eps

    def __call__(self, E):
        return _smooth_step((np.asarray(E, dtype=float) - self.ramp_start) / self.eps)

    def envelope(self, E):
        return self(E)

    def tail_integral(self, E):
        E = np.atleast_1d(np.asarray(E, dtype=float))
        out = np.empty_like(E)
        for i, e in enumerate(E):
            if e >= self.support_end:
                out[i] = 0.0
                continue
            lo = max(e, self.ramp_start)
            ramp, _ = integrate.quad(self, lo, self.support_end, epsabs=1e-14)
            out[i] = max(self.ramp_start - e, 0.0) + ramp
        return out if out.size > 1 else out[0]

    def energy_cutoff(self, tol):
        return self.support_end

    def dilate(self, lam):
        return SmoothedStep(self.E0 / lam, self.eps / lam, self.side)

    def params(self):
        return {"E0": self.E0, "eps": self.eps, "side": self.side}


@dataclass(frozen=True)
class LinearCombination(TestFunction):
    """sum_i a_i f_i; used to check linearity of the densities."""

    terms: tuple = ()
    kind = "linear_combination"

    def __call__(self, E):
        return sum(a * f(E) for a, f in self.terms)

    def envelope(self, E):
        return sum(abs(a) * f.envelope(E) for a, f in self.terms)

    def tail_integral(self, E):
        return sum(abs(a) * f.tail_integral(E) for a, f in self.terms)

    def energy_cutoff(self, tol):
        scale = sum(abs(a) for a, _ in self.terms) or 1.0
        return max(f.energy_cutoff(tol / scale) for _, f in self.terms)

    def dilate(self, lam):
        return LinearCombination(tuple((a, f.dilate(lam)) for a, f in self.terms))

    def params(self):
        return {"terms": [{"coef": a, **f.to_dict()} for a, f in self.terms]}

    def __add__(self, other):
        extra = other.terms if isinstance(other, LinearCombination) else ((1.0, other),)
        return LinearCombination(self.terms + extra)

    def __rmul__(self, alpha):
        return LinearCombination(tuple((alpha * a, f) for a, f in self.terms))


VARIANTS = {cls.kind: cls for cls in (Gaussian, FermiDirac, LogPressure, SmoothedStep)}


def from_dict(spec):
    """Build a variant from ``{"kind": ..., **params}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in VARIANTS:
        raise DomainError(f"unknown test function kind {kind!r}; "
                          f"expected one of {sorted(VARIANTS)}")
    return VARIANTS[kind](**spec)
