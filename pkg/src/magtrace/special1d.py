"""Hermite functions and the half-line model operator -d^2/dt^2 + (xi + t)^2.

Index convention: ``phi_k`` (k >= 1) is the normalized oscillator
eigenfunction with eigenvalue ``2k - 1``, i.e. it carries the degree
``k - 1`` Hermite polynomial.  The half-line problem is discretized with
second-order central differences on ``t_j = j * spacing`` (``j = 1..n``),
Dirichlet at ``t = 0`` and at ``t = t_max``; the matrix is symmetric
tridiagonal and is diagonalized by bisection plus inverse iteration
(LAPACK ``stebz``/``stein``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special

from ._format import dumps_csv
from .errors import DomainError, NumericError, PreconditionError

PI_M14 = math.pi ** -0.25
MIN_POINTS = 64
TURNING_CLEARANCE = 8.0


def _check_index(k):
    if int(k) != k or k < 1:
        raise DomainError(f"Hermite index must be a positive integer, got {k!r}")
    return int(k)


def hermite_phi_table(k_max, t):
    """Values of phi_1..phi_{k_max} at ``t``; shape ``(k_max,) + t.shape``.

    Upward three-term recurrence on the Gaussian-weighted functions, so no
    unweighted Hermite polynomial is ever formed.
    """
    k_max = _check_index(k_max)
    t = np.asarray(t, dtype=float)
    out = np.empty((k_max,) + t.shape)
    out[0] = PI_M14 * np.exp(-0.5 * t * t)
    if k_max > 1:
        out[1] = math.sqrt(2.0) * t * out[0]
    for n in range(1, k_max - 1):
        out[n + 1] = (math.sqrt(2.0 / (n + 1)) * t * out[n]
                      - math.sqrt(n / (n + 1)) * out[n - 1])
    return out


def hermite_phi(k, t):
    """phi_k(t), the normalized oscillator eigenfunction with eigenvalue 2k-1."""
    k = _check_index(k)
    vals = hermite_phi_table(k, t)[k - 1]
    return float(vals) if np.ndim(vals) == 0 else vals


def hermite_tail_mass(k, xi):
    """Integral of phi_k(t)^2 over (xi, inf), by adaptive quadrature.

    phi_k^2 is even, so negative ``xi`` is reduced to ``1 - tail(-xi)``.
    """
    k = _check_index(k)
    xi = float(xi)
    if xi < 0.0:
        return 1.0 - hermite_tail_mass(k, -xi)
    turning = math.sqrt(2 * k - 1)
    upper = max(xi, turning) + 14.0

    def dens(t):
        return hermite_phi_table(k, t)[k - 1] ** 2

    pts = [p for p in (turning,) if xi < p < upper]
    val, _ = integrate.quad(dens, xi, upper, points=pts or None,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return min(max(val, 0.0), 1.0)


def hermite_tail_mass_table(k_max, xi):
    """Tail masses for k = 1..k_max at every ``xi`` (vectorized, closed form).

    Uses  P_k(x) = P_{k-1}(x) + phi_k(x) phi_{k-1}(x) / sqrt(2(k-1)),
    with P_1(x) = erfc(x)/2, which follows from differentiating
    phi_k phi_{k-1} with the ladder relations.
    """
    k_max = _check_index(k_max)
    xi = np.asarray(xi, dtype=float)
    phi = hermite_phi_table(k_max, xi)
    out = np.empty_like(phi)
    out[0] = 0.5 * special.erfc(xi)
    for k in range(1, k_max):
        out[k] = out[k - 1] + phi[k] * phi[k - 1] / math.sqrt(2.0 * k)
    return np.clip(out, 0.0, 1.0)


def min_t_max(xi, k_max):
    """Truncation length putting the wall 8 units past the turning point."""
    return max(0.0, -float(xi)) + math.sqrt(4 * k_max + 3) + TURNING_CLEARANCE


@dataclass(frozen=True)
class ModelGrid:
    """Uniform grid on (0, t_max) with ``n`` interior points."""

    t_max: float
    n: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise PreconditionError(f"t_max must be positive, got {self.t_max}")
        if self.n < MIN_POINTS:
            raise PreconditionError(f"need n >= {MIN_POINTS} interior points, got {self.n}")

    @property
    def spacing(self):
        return self.t_max / (self.n + 1)

    @property
    def t(self):
        return self.spacing * np.arange(1, self.n + 1)

    def refined(self):
        """Same interval, halved spacing; coarse nodes are every other fine node."""
        return ModelGrid(self.t_max, 2 * self.n + 1)

    @classmethod
    def for_problem(cls, xi, k_max, points_per_unit=64):
        """Grid with integer ``t_max`` and spacing exactly ``1/points_per_unit``."""
        t_max = float(math.ceil(min_t_max(xi, k_max)))
        return cls(t_max, int(t_max * points_per_unit) - 1)

    def check(self, xi, k_max):
        need = min_t_max(xi, k_max)
        if self.t_max < need - 1e-12:
            raise PreconditionError(
                f"grid too short: t_max={self.t_max:g} < {need:g} required for "
                f"xi={xi:g}, k_max={k_max} (potential margin violated)")


@dataclass
class ModelEigenpair:
    k: int
    xi: float
    e: float
    psi: np.ndarray = field(repr=False)
    dpsi0: float
    err_est: float = 0.0
    grid: ModelGrid | None = field(default=None, repr=False)


def _matrix(xi, grid):
    h = grid.spacing
    t = grid.t
    diag = 2.0 / h ** 2 + (xi + t) ** 2
    off = np.full(grid.n - 1, -1.0 / h ** 2)
    return diag, off


def _fix_sign(v):
    """Make the last non-negligible sample (scanning from the right) positive."""
    mags = np.abs(v)
    thresh = 1e-10 * mags.max(axis=0)
    for j in range(v.shape[1]):
        idx = np.nonzero(mags[:, j] > thresh[j])[0]
        if idx.size and v[idx[-1], j] < 0:
            v[:, j] *= -1.0
    return v


def _solve(xi, k_max, grid, vectors=True):
    diag, off = _matrix(xi, grid)
    try:
        res = linalg.eigh_tridiagonal(
            diag, off, eigvals_only=not vectors, select="i",
            select_range=(0, k_max - 1), lapack_driver="stebz")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"tridiagonal eigensolver failed at xi={xi:g}: {exc}",
                           {"xi": xi, "k_max": k_max, "n": grid.n}) from exc
    w = res[0] if vectors else res
    if len(w) < k_max or np.any(np.diff(w) <= 0):
        raise NumericError("eigenvalues not strictly increasing or missing",
                           {"xi": xi, "eigenvalues": list(map(float, w))})
    if not vectors:
        return w, None
    v = res[1] / math.sqrt(grid.spacing)
    return w, _fix_sign(v)


def _dpsi0(v, h):
    # (-3 psi_0 + 4 psi_1 - psi_2) / (2h) with psi_0 = 0
    return (4.0 * v[0] - v[1]) / (2.0 * h)


def richardson(coarse, fine, ratio=2.0):
    """Extrapolate an O(h^2) quantity from spacings h and h/ratio."""
    coarse = np.asarray(coarse, dtype=float)
    fine = np.asarray(fine, dtype=float)
    corr = (fine - coarse) / (ratio ** 2 - 1.0)
    return fine + corr, np.abs(corr)


def model_eigensystem(xi, k_max, grid=None, richardson_step=True, vectors=True,
                      points_per_unit=64):
    """Lowest ``k_max`` Dirichlet eigenpairs of -d^2/dt^2 + (xi+t)^2 on (0, t_max).

    With ``richardson_step`` the problem is also solved on the grid with
    halved spacing; eigenvalues, eigenvector samples and psi'(0) are then
    extrapolated and ``err_est`` is the size of the correction.
    """
    k_max = _check_index(k_max)
    xi = float(xi)
    if grid is None:
        grid = ModelGrid.for_problem(xi, k_max, points_per_unit)
    grid.check(xi, k_max)
    h = grid.spacing
    w, v = _solve(xi, k_max, grid, vectors)
    err = np.zeros(k_max)
    dp = _dpsi0(v, h) if vectors else np.full(k_max, np.nan)
    psi = v
    if richardson_step:
        fg = grid.refined()
        wf, vf = _solve(xi, k_max, fg, vectors)
        w, err = richardson(w, wf, h / fg.spacing)
        if vectors:
            dp, _ = richardson(dp, _dpsi0(vf, fg.spacing))
            psi, _ = richardson(v, vf[1::2])
            psi /= np.sqrt(np.sum(psi ** 2, axis=0) * h)
    out = []
    for j in range(k_max):
        out.append(ModelEigenpair(
            k=j + 1, xi=xi, e=float(w[j]),
            psi=psi[:, j] if vectors else np.empty(0),
            dpsi0=float(dp[j]), err_est=float(err[j]), grid=grid))
    return out


def model_eigenvalues(xi, k_max, grid=None, points_per_unit=64):
    """(e, err_est) arrays for k = 1..k_max; eigenvalues only, Richardson step."""
    pairs = model_eigensystem(xi, k_max, grid, vectors=False,
                              points_per_unit=points_per_unit)
    return (np.array([p.e for p in pairs]), np.array([p.err_est for p in pairs]))


def hadamard_check(k, xi, dxi=1e-3, points_per_unit=64):
    """Centered difference of e_k at xi and psi_k'(0, xi)^2, computed independently."""
    k = _check_index(k)
    if not 1e-5 <= dxi <= 1e-2:
        raise PreconditionError(f"dxi must lie in [1e-5, 1e-2], got {dxi}")
    grid = ModelGrid.for_problem(xi - dxi, k, points_per_unit)
    ep = model_eigensystem(xi + dxi, k, grid, vectors=False)[k - 1].e
    em = model_eigensystem(xi - dxi, k, grid, vectors=False)[k - 1].e
    slope = (ep - em) / (2.0 * dxi)
    dp = model_eigensystem(xi, k, grid)[k - 1].dpsi0
    return slope, dp * dp


def sturm_count(diag, off, x):
    """Number of eigenvalues of the symmetric tridiagonal matrix below ``x``.

    Counts negative pivots of the LDL^T factorization of T - x; ``x`` may be
    an array of shifts.
    """
    diag = np.asarray(diag, dtype=float)
    off2 = np.asarray(off, dtype=float) ** 2
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tiny = np.finfo(float).tiny
    q = diag[0] - x
    count = (q < 0).astype(int)
    for i in range(1, diag.size):
        q = np.where(q == 0.0, -tiny, q)
        q = diag[i] - x - off2[i - 1] / q
        count += q < 0
    return count


def model_table_csv(xis, k_max, points_per_unit=64):
    """CSV debug dump with header ``xi,k,e,dpsi0_sq,err_est``."""
    rows = []
    for xi in xis:
        for p in model_eigensystem(xi, k_max, points_per_unit=points_per_unit):
            rows.append((float(xi), p.k, p.e, p.dpsi0 ** 2, p.err_est))
    return dumps_csv(["xi", "k", "e", "dpsi0_sq", "err_est"], rows)
