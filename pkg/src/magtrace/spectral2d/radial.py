"""Disk spectra for constant field by separation of variables.

In the symmetric gauge each angular momentum m gives the radial problem

    -u'' - u'/r + (m/r - B r/2)^2 u = lambda u  on (0, R),  u(R) = 0.

It is discretized in flux form on the cell-centered grid r_j = (j - 1/2) R/n:
the face at r = 0 carries no flux (regularity), the wall at R is imposed by
the ghost value u_{n+1} = -u_n, and the r-weighted mass matrix is absorbed by
a diagonal similarity, which leaves a symmetric tridiagonal matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .._parallel import pmap
from ..errors import DomainError, NumericError, PreconditionError
from .spectrum import Spectrum

MIN_POINTS = 200
POINTS_PER_WAVE = 10


@dataclass
class RadialChannel:
    m: int
    eigenvalues: np.ndarray
    err_est: np.ndarray
    n_grid: int
    R: float
    B: float
    E_cut: float = field(default=math.inf)


def potential_minimum(R, B, m):
    """min over (0, R] of (m/r - B r/2)^2."""
    if m == 0:
        return 0.0
    if B == 0:
        return (m / R) ** 2
    if m > 0:
        r0 = math.sqrt(2 * m / B)
        return 0.0 if r0 <= R else (m / R - B * R / 2) ** 2
    r0 = math.sqrt(2 * abs(m) / B)
    return 2 * abs(m) * B if r0 <= R else (abs(m) / R + B * R / 2) ** 2


def min_points(R, E_cut):
    """Grid size giving ``POINTS_PER_WAVE`` points per local wavelength at E_cut."""
    return max(MIN_POINTS, math.ceil(POINTS_PER_WAVE * R * math.sqrt(max(E_cut, 0.0)) / (2 * math.pi)))


def _channel_matrix(R, B, m, n):
    d = R / n
    r = (np.arange(1, n + 1) - 0.5) * d
    faces = np.arange(n + 1) * d
    pot = (m / r - B * r / 2) ** 2
    diag = (faces[:-1] + faces[1:]) / d + r * d * pot
    diag[-1] += faces[-1] / d
    off = -faces[1:-1] / d
    s = 1.0 / np.sqrt(r * d)
    return diag * s * s, off * s[:-1] * s[1:]


def _eigs_below(R, B, m, n, E):
    diag, off = _channel_matrix(R, B, m, n)
    try:
        return linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="v",
                                       select_range=(-np.inf, E), lapack_driver="stebz")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"radial eigensolver failed for m={m}: {exc}",
                           {"R": R, "B": B, "m": m, "n": n}) from exc


def radial_channel(R, B, m, E_cut, n):
    """Eigenvalues <= E_cut of the m-th radial problem, Richardson-extrapolated.

    The problem is solved with n and 2n cells; the reported error is the size
    of the extrapolation correction.
    """
    if not R > 0:
        raise DomainError(f"R must be > 0, got {R}")
    if B < 0:
        raise DomainError(f"B must be >= 0, got {B}")
    if int(m) != m:
        raise DomainError(f"m must be an integer, got {m}")
    m = int(m)
    if n < MIN_POINTS:
        raise PreconditionError(f"need n >= {MIN_POINTS} radial cells, got {n}")
    if n < min_points(R, E_cut):
        raise PreconditionError(
            f"n={n} gives fewer than {POINTS_PER_WAVE} points per oscillation at "
            f"E_cut={E_cut}; need n >= {min_points(R, E_cut)}")
    empty = np.empty(0)
    if potential_minimum(R, B, m) > E_cut:
        return RadialChannel(m, empty, empty, n, R, B, E_cut)
    # solve a little above E_cut so both grids see the same branches
    margin = E_cut + 0.2 * abs(E_cut) + 1.0
    coarse = _eigs_below(R, B, m, n, margin)
    fine = _eigs_below(R, B, m, 2 * n, margin)
    k = min(coarse.size, fine.size)
    corr = (fine[:k] - coarse[:k]) / 3.0
    ev = fine[:k] + corr
    keep = ev <= E_cut
    return RadialChannel(m, ev[keep], np.abs(corr[keep]), n, R, B, E_cut)


def channel_range(R, B, E_cut):
    """All m whose potential minimum on (0, R] is <= E_cut (variational bound)."""
    lo = 0
    while potential_minimum(R, B, lo - 1) <= E_cut:
        lo -= 1
    hi = 0
    while potential_minimum(R, B, hi + 1) <= E_cut:
        hi += 1
    return range(lo, hi + 1)


def default_grid(R, E_cut):
    return max(min_points(R, E_cut), math.ceil(40 * R))


def disk_spectrum(R, B, E_cut, n=None):
    """All Dirichlet eigenvalues <= E_cut on the disk of radius R (constant B)."""
    n = n or default_grid(R, E_cut)
    ms = list(channel_range(R, B, E_cut))
    chans = pmap(lambda m: radial_channel(R, B, m, E_cut, n), ms)
    ev = np.concatenate([c.eigenvalues for c in chans] + [np.empty(0)])
    err = np.concatenate([c.err_est for c in chans] + [np.empty(0)])
    mc = np.concatenate([np.full(c.eigenvalues.size, c.m) for c in chans] + [np.empty(0, int)])
    return Spectrum(ev, err, E_cut, {"kind": "disk", "R": R}, {"kind": "constant", "B0": B},
                    "radial_separation", {"n": n, "m_min": ms[0], "m_max": ms[-1]},
                    m_channel=mc, area=math.pi * R * R)
