"""Bulk and boundary spectral densities b_k(B, f) and s_k(B, f).

The boundary density has two equivalent forms:

* ``s_k_direct`` integrates over t in (0, T) the defect
  ``int f(B e_k(xi)) psi_k(t, xi)^2 dxi - f(B(2k-1))`` on a shared (xi, t)
  product grid; it needs eigenvectors and converges slowly in T.
* ``s_k_alt`` integrates ``f(B e_k(xi)) - f(B(2k-1)) * tail_k(xi)`` over xi,
  where ``tail_k`` is the Hermite tail mass.  This is the production formula.

The xi integrals use lattice-aligned Gauss-Legendre panels, refined by
bisection where the panel/half-panel estimates disagree.  Because panels
always sit on the same dyadic lattice, the expensive half-line solves at
the nodes are shared across k, B and f through ``SWEEP_CACHE``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._format import dumps_csv
from ._parallel import pmap
from .errors import ConvergenceError, DomainError, PreconditionError
from .special1d import ModelGrid, hermite_tail_mass_table, model_eigensystem

GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
REGION_C = 6.0
POINTS_PER_UNIT = 64


@dataclass(frozen=True)
class SeriesTolerance:
    abs_tol: float = 1e-10
    k_cap: int = 200

    def __post_init__(self):
        if not self.abs_tol >= 1e-12:
            raise DomainError(f"abs_tol must be >= 1e-12, got {self.abs_tol}")
        if self.k_cap < 1:
            raise DomainError(f"k_cap must be >= 1, got {self.k_cap}")


def kmax_bucket(k):
    """Number of branches solved per node; coarse buckets maximize cache reuse."""
    return 6 * math.ceil(k / 6)


def _key(xi):
    return round(float(xi), 12)


class SweepCache:
    """Richardson-extrapolated half-line data keyed by (xi, k_max, points per unit).

    Safe for concurrent use: values for a key are deterministic, so a racing
    insert just overwrites an identical entry.
    """

    def __init__(self):
        self._eig = {}
        self._mass = {}
        self._lock = threading.Lock()

    def clear(self):
        with self._lock:
            self._eig.clear()
            self._mass.clear()

    def __len__(self):
        return len(self._eig) + len(self._mass)

    def eigenvalues(self, xis, k_max, ppu=POINTS_PER_UNIT):
        """Arrays (e, err) of shape (len(xis), k_max)."""
        keys = [(_key(x), k_max, ppu) for x in xis]
        with self._lock:
            missing = sorted({k for k in keys if k not in self._eig})

        def solve(key):
            pairs = model_eigensystem(key[0], k_max, vectors=False, points_per_unit=ppu)
            return key, (np.array([p.e for p in pairs]), np.array([p.err_est for p in pairs]))

        for key, val in pmap(solve, missing):
            with self._lock:
                self._eig[key] = val
        with self._lock:
            rows = [self._eig[k] for k in keys]
        return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])

    def masses(self, xis, k_max, t_marks, ppu=POINTS_PER_UNIT):
        """Cumulative masses int_0^t psi_k^2 at integer ``t_marks``.

        Returns (e, M) with M of shape (len(xis), k_max, len(t_marks)); the
        masses come from both grids and are Richardson-extrapolated.
        """
        t_marks = tuple(int(t) for t in t_marks)
        keys = [(_key(x), k_max, ppu, t_marks) for x in xis]
        with self._lock:
            missing = sorted({k for k in keys if k not in self._mass})

        def solve(key):
            return key, _cumulative_masses(key[0], k_max, t_marks, ppu)

        for key, val in pmap(solve, missing):
            with self._lock:
                self._mass[key] = val
        with self._lock:
            rows = [self._mass[k] for k in keys]
        return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


SWEEP_CACHE = SweepCache()


def _grid_masses(xi, k_max, grid, t_marks, ppu_grid):
    from .special1d import _solve
    w, v = _solve(xi, k_max, grid, vectors=True)
    h = grid.spacing
    dens = v ** 2
    # trapezoid from t=0 (psi=0) up to node j: sum_{l<j} + half of node j
    csum = np.cumsum(dens, axis=0) * h - 0.5 * dens * h
    out = np.empty((k_max, len(t_marks)))
    for i, t in enumerate(t_marks):
        j = t * ppu_grid  # node index in 1-based numbering
        if j <= 0:
            out[:, i] = 0.0
        elif j > grid.n:
            out[:, i] = np.sum(dens, axis=0) * h
        else:
            out[:, i] = csum[j - 1]
    return w, out


def _cumulative_masses(xi, k_max, t_marks, ppu):
    grid = ModelGrid.for_problem(xi, k_max, ppu)
    w1, m1 = _grid_masses(xi, k_max, grid, t_marks, ppu)
    w2, m2 = _grid_masses(xi, k_max, grid.refined(), t_marks, 2 * ppu)
    e = w2 + (w2 - w1) / 3.0
    return e, m2 + (m2 - m1)[:, :] / 3.0


def _panel(a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * _GL_X, half * _GL_W


def adaptive_panels(func, regions, abs_tol, max_depth=10, noise_col=None):
    """Integrate ``func`` (vectorized over nodes) over consecutive regions.

    ``regions`` is a list of (lo, hi, width); each region is cut into panels of
    the given width, and each panel is compared with its two halves.  Panels
    whose discrepancy exceeds their share of ``abs_tol`` are bisected.  ``func``
    may return shape (nodes,) or (nodes, m); the last column drives refinement.
    If ``noise_col`` names a column holding per-node roundoff magnitudes, a
    panel is also accepted once its discrepancy is within ten times the
    integrated noise, since bisecting further cannot reduce it.

    Returns (integral, error_estimate, number_of_nodes_evaluated).
    """
    total = sum(hi - lo for lo, hi, _ in regions)
    if total <= 0:
        return 0.0, 0.0, 0
    active = []
    for lo, hi, width in regions:
        n = max(1, int(round((hi - lo) / width)))
        edges = np.linspace(lo, hi, n + 1)
        active += [(edges[i], edges[i + 1], 0) for i in range(n)]
    acc = None
    err = 0.0
    evaluated = 0
    while active:
        nodes, weights = [], []
        for a, b, _ in active:
            m = 0.5 * (a + b)
            for lo, hi in ((a, b), (a, m), (m, b)):
                x, w = _panel(lo, hi)
                nodes.append(x)
                weights.append(w)
        vals = np.asarray(func(np.concatenate(nodes)), dtype=float)
        evaluated += vals.shape[0]
        vals = vals.reshape((len(active), 3, GL_ORDER) + vals.shape[1:])
        w = np.array(weights).reshape(len(active), 3, GL_ORDER)
        sums = np.einsum("pin,pin...->pi...", w, vals)
        nxt = []
        for p, (a, b, depth) in enumerate(active):
            whole, halves = sums[p, 0], sums[p, 1] + sums[p, 2]
            est = float(np.max(np.abs(np.atleast_1d(whole - halves))[-1:]))
            share = abs_tol * (b - a) / total
            if noise_col is not None:
                share += 10.0 * abs(float(sums[p, 0, noise_col]))
            if est <= share or depth >= max_depth:
                acc = halves if acc is None else acc + halves
                err += est
            else:
                m = 0.5 * (a + b)
                nxt += [(a, m, depth + 1), (m, b, depth + 1)]
        active = nxt
    return acc, err, evaluated


@dataclass
class SkResult:
    """Value of s_k(B, f) with its quadrature metadata.

    ``err_est`` adds the panel error to the effect of the eigenvalue error
    estimates; the latter bound the fine-grid error, so the estimate is
    conservative for the extrapolated values actually used.
    """

    k: int
    value: float
    err_est: float
    xi_lo: float
    xi_hi: float
    truncated: bool = False
    tail_estimate: float | None = None
    moment: float | None = None
    n_nodes: int = 0
    profile: np.ndarray | None = field(default=None, repr=False)

    def __float__(self):
        return float(self.value)


@dataclass
class SeriesResult:
    value: float
    err_est: float
    k_used: int
    terms: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def bulk_density_term(B, f, k):
    """b_k(B, f) = f((2k - 1) B)."""
    if not B > 0:
        raise DomainError(f"B must be > 0, got {B}")
    return float(f((2 * k - 1) * B))


def _check_args(B, k):
    if not B > 0:
        raise DomainError(f"B must be > 0, got {B}")
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")


def _snap(x, lattice, up):
    return lattice * (math.ceil(x / lattice) if up else math.floor(x / lattice))


def default_window(B, f, k, tol=1e-10, t_max=0.0):
    """xi window outside which the s_k integrand is below ``tol``.

    ``t_max > 0`` widens the lower end for the direct (t-integral) form.
    """
    e_hi = max(f.energy_cutoff(tol * 1e-2), 0.0)
    hi = max(math.sqrt(e_hi / B), math.sqrt(4 * k) + 6.0) + 2.0
    lo = -(REGION_C * math.sqrt(k) + 4.0)
    if t_max > 0:
        lo = -max(REGION_C * math.sqrt(k), math.sqrt(f.e_decay() / B)) - t_max - 4.0
    return _snap(lo, 2.0, up=False), _snap(hi, 2.0, up=True)


def _regions(k, lo, hi):
    """Four-region split at -C sqrt(k), 0, C sqrt(k) on the even-integer lattice."""
    c = _snap(REGION_C * math.sqrt(k), 2.0, up=True)
    cuts = [lo] + [x for x in (-c, 0.0, c) if lo < x < hi] + [hi]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        inner = -c <= a and b <= c
        out.append((a, b, 1.0 if inner else 2.0))
    return out


def _eig_roundoff(xis, k_max, ppu):
    """Absolute roundoff of the extrapolated eigenvalues: about eps times the matrix norm."""
    t_max = np.ceil(np.maximum(0.0, -xis) + math.sqrt(4 * k_max + 3) + 8.0)
    norm = 4.0 * (2 * ppu) ** 2 + (np.abs(xis) + t_max) ** 2
    return 2.0 * np.finfo(float).eps * norm


def _f_noise(f, B, e, delta):
    # |f'(B e)| B delta by a centered difference
    step = 1e-6 * np.maximum(1.0, np.abs(B * e))
    slope = np.abs(f(B * e + step) - f(B * e - step)) / (2 * step)
    return slope * B * delta


def s_k_alt(B, f, k, window=None, tol=1e-10, cache=None, ppu=POINTS_PER_UNIT):
    """s_k(B, f) = int ( f(B e_k(xi)) - f(B(2k-1)) int_xi^inf phi_k^2 ) dxi."""
    _check_args(B, k)
    k = int(k)
    cache = SWEEP_CACHE if cache is None else cache
    k_max = kmax_bucket(k)
    lo, hi = window if window is not None else default_window(B, f, k, tol)
    f_level = float(f(B * (2 * k - 1)))

    def integrand(xis):
        # columns: propagated discretization error, roundoff noise, the integrand
        e, err = cache.eigenvalues(xis, k_max, ppu)
        ek = e[:, k - 1]
        tail = hermite_tail_mass_table(k, xis)[k - 1]
        fe = f(B * ek)
        prop = np.abs(f(B * (ek + err[:, k - 1])) - fe)
        noise = _f_noise(f, B, ek, _eig_roundoff(xis, k_max, ppu))
        return np.stack([prop, noise, fe - f_level * tail], axis=1)

    vals, qerr, n = adaptive_panels(integrand, _regions(k, lo, hi), tol, noise_col=1)
    # a window edge counts as truncating only if the integrand there is
    # distinguishable from its own discretization error
    edge = integrand(np.array([lo, hi]))
    truncated = bool(np.any(np.abs(edge[:, 2]) > tol + edge[:, 0]))
    return SkResult(k=k, value=float(vals[2]), err_est=qerr + float(vals[0]), xi_lo=lo,
                    xi_hi=hi, truncated=truncated, n_nodes=n)


def s_k_direct(B, f, k, t_max=20, window=None, tol=1e-10, cache=None, ppu=POINTS_PER_UNIT):
    """s_k(B, f) from its defining t-integral, truncated at ``t_max``.

    The integrand is tabulated on the product of the xi quadrature nodes and
    the unit t-lattice 0, 1, ..., t_max.  ``profile`` holds the cumulative
    t-integral at those marks, ``tail_estimate`` is the contribution of the
    last unit t-interval (the defect decays like a Gaussian in t) and
    ``moment`` approximates int t |defect| dt.
    """
    _check_args(B, k)
    k = int(k)
    if t_max < 20:
        raise PreconditionError(f"t_max must be >= 20, got {t_max}")
    t_max = int(math.ceil(t_max))
    cache = SWEEP_CACHE if cache is None else cache
    k_max = kmax_bucket(k)
    lo, hi = window if window is not None else default_window(B, f, k, tol, t_max)
    need_lo = -(REGION_C * math.sqrt(k)) - t_max
    marks = tuple(range(t_max + 1))
    f_level = float(f(B * (2 * k - 1)))

    def integrand(xis):
        e, mass = cache.masses(xis, k_max, marks, ppu)
        ek = e[:, k - 1]
        noise = _f_noise(f, B, ek, _eig_roundoff(xis, k_max, ppu)) + 1e-13 * np.abs(f(B * ek))
        return np.hstack([noise[:, None], f(B * ek)[:, None] * mass[:, k - 1, :]])

    vals, qerr, n = adaptive_panels(integrand, _regions(k, lo, hi), tol, noise_col=0)
    cum = np.asarray(vals[1:]) - f_level * np.asarray(marks, dtype=float)
    incr = np.diff(cum)
    mids = np.arange(t_max) + 0.5
    return SkResult(
        k=k, value=float(cum[-1]), err_est=qerr, xi_lo=lo, xi_hi=hi,
        truncated=lo > need_lo, tail_estimate=float(abs(incr[-1])),
        moment=float(np.sum(mids * np.abs(incr))), n_nodes=n, profile=cum)


def term_bound(B, f, k, tol=1e-10):
    """Rigorous bound on |s_k(B, f)| from the envelope of f and the window length."""
    lo, hi = default_window(B, f, k, tol)
    level = (2 * k - 1) * B
    return float((f.envelope(level) + abs(f(level))) * (hi - lo))


def s_series(B, f, tol=None, cache=None):
    """sum_k s_k(B, f), stopped once the term bound is below ``abs_tol`` twice running."""
    if not B > 0:
        raise DomainError(f"B must be > 0, got {B}")
    tol = tol or SeriesTolerance()
    terms = []
    small = 0
    for k in range(1, tol.k_cap + 1):
        if term_bound(B, f, k, tol.abs_tol) < tol.abs_tol:
            small += 1
            if small == 2:
                break
            continue
        small = 0
        terms.append(s_k_alt(B, f, k, tol=tol.abs_tol, cache=cache))
    else:
        raise ConvergenceError(
            f"s-series did not converge within k_cap={tol.k_cap}",
            {"B": B, "k_cap": tol.k_cap, "last_bound": term_bound(B, f, tol.k_cap)})
    value = math.fsum(t.value for t in terms)
    err = math.fsum(t.err_est for t in terms) + 2 * tol.abs_tol
    return SeriesResult(value=value, err_est=err, k_used=len(terms) and terms[-1].k,
                        terms=terms)


def landau_density(B, f, tol=None):
    """Diagonal of f((-i grad - A)^2) for constant field B (B = 0 by continuity)."""
    tol = tol or SeriesTolerance()
    if B < 0:
        raise DomainError(f"B must be >= 0, got {B}")
    if B == 0:
        top = max(f.energy_cutoff(tol.abs_tol * 1e-3), 1.0)
        val, _ = integrate.quad(f, 0.0, top, epsabs=tol.abs_tol * 1e-2, limit=400)
        return val / (4.0 * math.pi)
    vals = []
    for k in range(1, tol.k_cap + 1):
        vals.append(float(f((2 * k - 1) * B)))
        nxt = (2 * k + 1) * B
        rem = B / (2 * math.pi) * (f.envelope(nxt) + f.tail_integral(nxt) / (2 * B))
        if rem <= tol.abs_tol:
            return B / (2 * math.pi) * math.fsum(vals)
    raise ConvergenceError(f"Landau series did not converge within k_cap={tol.k_cap}",
                           {"B": B, "k_cap": tol.k_cap, "remainder_bound": float(rem)})


def s_table_csv(series):
    """CSV with header ``k,s_k,err_est,k_window_lo,k_window_hi``."""
    rows = [(t.k, t.value, t.err_est, t.xi_lo, t.xi_hi) for t in series.terms]
    return dumps_csv(["k", "s_k", "err_est", "k_window_lo", "k_window_hi"], rows)
