"""Domains, field profiles and the trace coefficients C0(f), C1(f).

Domains are centered at the origin: ``Disk(R)``, ``Rectangle(Lx, Ly)`` on
[-Lx/2, Lx/2] x [-Ly/2, Ly/2], and ``Star`` with boundary
rho(theta) (cos theta, sin theta), rho a finite Fourier series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._parallel import pmap
from .coeff import SeriesTolerance, landau_density, s_series
from .errors import DomainError, NumericError

THETA_CHECK = 4096


def _gl(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


@dataclass(frozen=True)
class Disk:
    R: float
    kind = "disk"

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"disk radius must be > 0, got {self.R}")

    def area(self):
        return math.pi * self.R ** 2

    def perimeter(self):
        return 2 * math.pi * self.R

    def max_radius(self):
        return self.R

    def area_nodes(self, n):
        r, wr = _gl(n, 0.0, self.R)
        th = 2 * math.pi * np.arange(2 * n) / (2 * n)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        w = np.outer(wr * r, np.full(th.size, 2 * math.pi / th.size))
        return rr * np.cos(tt), rr * np.sin(tt), w

    def boundary_nodes(self, n):
        th = 2 * math.pi * np.arange(n) / n
        return self.R * np.cos(th), self.R * np.sin(th), np.full(n, self.perimeter() / n)

    def dilate(self, lam):
        return Disk(self.R * lam)

    def to_dict(self):
        return {"kind": self.kind, "R": self.R}


@dataclass(frozen=True)
class Rectangle:
    Lx: float
    Ly: float
    kind = "rectangle"

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError(f"rectangle sides must be > 0, got {self.Lx}, {self.Ly}")

    def area(self):
        return self.Lx * self.Ly

    def perimeter(self):
        return 2 * (self.Lx + self.Ly)

    def max_radius(self):
        return 0.5 * math.hypot(self.Lx, self.Ly)

    def area_nodes(self, n):
        x, wx = _gl(n, -self.Lx / 2, self.Lx / 2)
        y, wy = _gl(n, -self.Ly / 2, self.Ly / 2)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        return xx, yy, np.outer(wx, wy)

    def boundary_nodes(self, n):
        a, b = self.Lx / 2, self.Ly / 2
        m = max(2, n // 4)
        s, w = _gl(m, -1.0, 1.0)
        xs = np.concatenate([a * s, np.full(m, a), -a * s, np.full(m, -a)])
        ys = np.concatenate([np.full(m, -b), b * s, np.full(m, b), -b * s])
        ws = np.concatenate([a * w, b * w, a * w, b * w])
        return xs, ys, ws

    def dilate(self, lam):
        return Rectangle(self.Lx * lam, self.Ly * lam)

    def to_dict(self):
        return {"kind": self.kind, "Lx": self.Lx, "Ly": self.Ly}


@dataclass(frozen=True)
class Star:
    """rho(theta) = a0 + sum_j a_j cos(j theta) + b_j sin(j theta)."""

    a0: float
    a: tuple = ()
    b: tuple = ()
    kind = "star"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        th = 2 * math.pi * np.arange(THETA_CHECK) / THETA_CHECK
        rho = self.rho(th)
        j = int(np.argmin(rho))
        if not rho[j] > 0:
            raise DomainError(f"star radius function must be positive; "
                              f"rho({th[j]:.6f}) = {rho[j]:.6g}")

    def _series(self, th, deriv=0):
        th = np.asarray(th, dtype=float)
        out = np.full(th.shape, self.a0 if deriv == 0 else 0.0)
        for j, c in enumerate(self.a, start=1):
            out += c * (np.cos(j * th) if deriv == 0 else -j * np.sin(j * th))
        for j, c in enumerate(self.b, start=1):
            out += c * (np.sin(j * th) if deriv == 0 else j * np.cos(j * th))
        return out

    def rho(self, th):
        return self._series(th)

    def _n_theta(self, n):
        # trapezoid is exact for trig polynomials of degree < n; keep well above the series
        return max(n, 8 * (max(len(self.a), len(self.b)) + 1))

    def area(self):
        n = self._n_theta(1024)
        th = 2 * math.pi * np.arange(n) / n
        return 0.5 * float(np.sum(self.rho(th) ** 2)) * 2 * math.pi / n

    def perimeter(self):
        n = self._n_theta(4096)
        return float(np.sum(self.boundary_nodes(n)[2]))

    def max_radius(self):
        th = 2 * math.pi * np.arange(THETA_CHECK) / THETA_CHECK
        return float(np.max(self.rho(th))) + 1e-9

    def area_nodes(self, n):
        nt = self._n_theta(2 * n)
        th = 2 * math.pi * np.arange(nt) / nt
        s, ws = _gl(n, 0.0, 1.0)
        rho = self.rho(th)
        rr = np.outer(s, rho)
        w = np.outer(ws * s, rho ** 2 * 2 * math.pi / nt)
        tt = np.broadcast_to(th, rr.shape)
        return rr * np.cos(tt), rr * np.sin(tt), w

    def boundary_nodes(self, n):
        n = self._n_theta(n)
        th = 2 * math.pi * np.arange(n) / n
        rho, drho = self.rho(th), self._series(th, 1)
        speed = np.sqrt(rho ** 2 + drho ** 2)
        return rho * np.cos(th), rho * np.sin(th), speed * 2 * math.pi / n

    def dilate(self, lam):
        return Star(self.a0 * lam, tuple(lam * c for c in self.a),
                    tuple(lam * c for c in self.b))

    def to_dict(self):
        return {"kind": self.kind, "a0": self.a0, "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class ConstantField:
    B0: float
    kind = "constant"

    def __post_init__(self):
        if not self.B0 > 0:
            raise DomainError(f"field must be positive (inf B > 0), got B0={self.B0}")

    def __call__(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.B0))

    def radial_range(self, r_max):
        return self.B0, self.B0

    def grad_sup(self, r_max):
        return 0.0

    def global_bounds(self):
        return self.B0, self.B0

    def dilate(self, lam):
        return self

    def to_dict(self):
        return {"kind": self.kind, "B0": self.B0}


@dataclass(frozen=True)
class RadialBump:
    """B(x) = B0 (1 + a exp(-|x|^2 / sigma^2)), |a| < 1."""

    B0: float
    a: float
    sigma: float
    kind = "radial_bump"

    def __post_init__(self):
        if not self.B0 > 0:
            raise DomainError(f"field must be positive (inf B > 0), got B0={self.B0}")
        if not abs(self.a) < 1:
            raise DomainError(f"bump amplitude must satisfy |a| < 1, got {self.a}")
        if not self.sigma > 0:
            raise DomainError(f"bump scale must be > 0, got {self.sigma}")

    def __call__(self, x, y):
        r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
        return self.B0 * (1.0 + self.a * np.exp(-r2 / self.sigma ** 2))

    def radial_range(self, r_max):
        """Exact extremes over the disk of radius ``r_max`` (B is monotone in |x|)."""
        ends = (float(self(0.0, 0.0)), float(self(r_max, 0.0)))
        return min(ends), max(ends)

    def grad_sup(self, r_max):
        # |dB/dr| = 2 B0 |a| r/s^2 exp(-r^2/s^2), maximal at r = s/sqrt(2)
        r = min(r_max, self.sigma / math.sqrt(2))
        return 2 * self.B0 * abs(self.a) * r / self.sigma ** 2 * math.exp(-r * r / self.sigma ** 2)

    def global_bounds(self):
        return self.B0 * min(1.0, 1.0 + self.a), self.B0 * max(1.0, 1.0 + self.a)

    def dilate(self, lam):
        """The field x -> B(x / lam)."""
        return RadialBump(self.B0, self.a, self.sigma * lam)

    def to_dict(self):
        return {"kind": self.kind, "B0": self.B0, "a": self.a, "sigma": self.sigma}


DOMAINS = {cls.kind: cls for cls in (Disk, Rectangle, Star)}
FIELDS = {cls.kind: cls for cls in (ConstantField, RadialBump)}


def _build(table, spec, what):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in table:
        raise DomainError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    return table[kind](**spec)


def domain_from_dict(spec):
    return _build(DOMAINS, spec, "domain")


def field_from_dict(spec):
    return _build(FIELDS, spec, "field")


@dataclass
class Quadrature:
    """Area and boundary rules for one domain; ``n`` sets the resolution."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    bw: np.ndarray
    n: int = 0

    @classmethod
    def build(cls, dom, n=64, n_boundary=None):
        x, y, w = dom.area_nodes(n)
        bx, by, bw = dom.boundary_nodes(n_boundary or 4 * n)
        return cls(x.ravel(), y.ravel(), w.ravel(), bx, by, bw, n)


def field_range(dom, field, n=64):
    """(B_min, B_max) over the closure of the domain.

    Takes the extremes over the quadrature grid and the boundary nodes and
    widens them with the exact radial extremes where these are attained.
    """
    q = Quadrature.build(dom, n)
    vals = np.concatenate([field(q.x, q.y), field(q.bx, q.by), field(np.zeros(1), np.zeros(1))])
    lo, hi = float(vals.min()), float(vals.max())
    if isinstance(dom, Disk):
        # a disk centered at the origin contains every radius up to R
        r_lo, r_hi = field.radial_range(dom.R)
        lo, hi = min(lo, r_lo), max(hi, r_hi)
    return lo, hi


def check_positive(dom, field, n=64):
    q = Quadrature.build(dom, n)
    vals = field(q.x, q.y)
    j = int(np.argmin(vals))
    if not vals[j] > 0:
        raise DomainError(f"field not positive at ({q.x[j]:.6g}, {q.y[j]:.6g}): B={vals[j]:.6g}")


@dataclass
class CoefficientResult:
    value: float
    err_est: float
    n: int
    details: dict = dc_field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def _dedupe(values):
    keys = np.round(np.asarray(values, dtype=float), 12)
    uniq, inv = np.unique(keys, return_inverse=True)
    return uniq, inv


def _c0_at(f, dom, field, n, tol):
    if isinstance(field, ConstantField):
        return landau_density(field.B0, f, tol) * dom.area(), 0.0
    q = Quadrature.build(dom, n)
    uniq, inv = _dedupe(field(q.x, q.y))
    dens = np.array([landau_density(b, f, tol) for b in uniq])
    return math.fsum(q.w * dens[inv]), 0.0


def c0(f, dom, field, tol=None, n=48):
    """sum_k (2 pi)^-1 int_Omega f((2k-1) B) B dx, with a grid-doubling error estimate."""
    tol = tol or SeriesTolerance()
    check_positive(dom, field)
    v1, _ = _c0_at(f, dom, field, n, tol)
    if isinstance(field, ConstantField):
        return CoefficientResult(v1, 2 * tol.abs_tol * dom.area(), n)
    v2, _ = _c0_at(f, dom, field, 2 * n, tol)
    err = abs(v2 - v1)
    if err > max(1e-6, 1e-6 * abs(v2)):
        raise NumericError("bulk coefficient quadrature not converged under one doubling",
                           {"n": n, "coarse": v1, "fine": v2})
    return CoefficientResult(v2, err, 2 * n)


def _c1_at(f, dom, field, n, tol, cache):
    bx, by, bw = dom.boundary_nodes(n)
    uniq, inv = _dedupe(field(bx, by))
    missing = [b for b in uniq if b not in cache]
    for b, res in zip(missing, pmap(lambda b: s_series(float(b), f, tol), missing)):
        cache[b] = res
    s = np.array([cache[b].value for b in uniq])
    e = np.array([cache[b].err_est for b in uniq])
    scale = bw * np.sqrt(uniq[inv]) / (2 * math.pi)
    return math.fsum(scale * s[inv]), math.fsum(scale * e[inv])


def c1(f, dom, field, tol=None, n=64):
    """(2 pi)^-1 int_{boundary} sum_k s_k(B(x), f) sqrt(B(x)) dsigma.

    The estimate combines the series error bound with the change under
    doubling of the boundary nodes.
    """
    tol = tol or SeriesTolerance()
    check_positive(dom, field)
    cache = {}
    if isinstance(field, ConstantField):
        s = s_series(field.B0, f, tol)
        scale = dom.perimeter() * math.sqrt(field.B0) / (2 * math.pi)
        return CoefficientResult(scale * s.value, scale * s.err_est, 0,
                                 {"k_used": s.k_used})
    v1, e1 = _c1_at(f, dom, field, n, tol, cache)
    v2, e2 = _c1_at(f, dom, field, 2 * n, tol, cache)
    return CoefficientResult(v2, e2 + abs(v2 - v1), 2 * n, {"distinct_B": len(cache)})


def describe(dom, field):
    """JSON-ready echo of the resolved geometry."""
    b_min, b_max = field_range(dom, field)
    return {"domain": dom.to_dict(), "field": field.to_dict(), "area": dom.area(),
            "perimeter": dom.perimeter(), "B_min": b_min, "B_max": b_max,
            "grad_B_sup": field.grad_sup(dom.max_radius())}


def flux(dom, field, n=64):
    """int_Omega B dx."""
    if isinstance(field, ConstantField):
        return field.B0 * dom.area()
    q = Quadrature.build(dom, n)
    return math.fsum(q.w * field(q.x, q.y))
