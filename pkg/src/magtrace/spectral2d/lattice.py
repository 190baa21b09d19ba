"""Gauge-covariant finite differences for (-i grad - A)^2 on a rectangle.

The rectangle [-Lx/2, Lx/2] x [-Ly/2, Ly/2] is cut into nx x ny cells; the
unknowns are the (nx-1)(ny-1) interior nodes (Dirichlet nodes removed).  A
hop from node p to node q carries the link factor exp(-i int_p^q A.dl),
evaluated by the midpoint rule (exact for the linear gauges used here).

Eigenvalues below E_cut come from shift-invert Lanczos (ARPACK).  The count
is certified independently by the inertia of H - E_cut, accumulated over the
x-columns as a block LDL^T factorization.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from ..errors import DomainError, NumericError, PreconditionError
from .spectrum import Spectrum

GAUGES = ("landau_x", "symmetric")
MIN_CELLS = 64
MAX_PLAQUETTE_PHASE = 0.1
MAX_UNKNOWNS = 20000


def _vector_potential(gauge, B):
    if gauge == "landau_x":
        return lambda x, y: (-B * y, 0.0 * x)
    if gauge == "symmetric":
        return lambda x, y: (-0.5 * B * y, 0.5 * B * x)
    raise DomainError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")


def _lattice(Lx, Ly, nx, ny):
    hx, hy = Lx / nx, Ly / ny
    x = -Lx / 2 + hx * np.arange(1, nx)
    y = -Ly / 2 + hy * np.arange(1, ny)
    return x, y, hx, hy


def _blocks(Lx, Ly, B, nx, ny, gauge):
    """Matrix entries grouped by x-column.

    Node (i, j) has index i * (ny - 1) + j.  Returns (diag, off_y, off_x):
    off_y[i, j] is the hop (i, j) -> (i, j+1) and off_x[i, j] the hop
    (i, j) -> (i+1, j).
    """
    A = _vector_potential(gauge, B)
    x, y, hx, hy = _lattice(Lx, Ly, nx, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    diag = np.full(X.shape, 2.0 / hx ** 2 + 2.0 / hy ** 2)
    # y-hops from (i, j) to (i, j+1), midpoint (x_i, y_j + hy/2)
    ay = A(X[:, :-1], Y[:, :-1] + hy / 2)[1]
    off_y = -np.exp(-1j * ay * hy) / hy ** 2
    # x-hops from (i, j) to (i+1, j), midpoint (x_i + hx/2, y_j)
    ax = A(X[:-1, :] + hx / 2, Y[:-1, :])[0]
    off_x = -np.exp(-1j * ax * hx) / hx ** 2
    return diag, off_y, off_x


def fd_matrix(Lx, Ly, B, nx, ny, gauge="landau_x"):
    """Sparse Hermitian matrix of the discretized operator (CSR, complex)."""
    diag, off_y, off_x = _blocks(Lx, Ly, B, nx, ny, gauge)
    mx, my = nx - 1, ny - 1
    idx = np.arange(mx * my).reshape(mx, my)
    # the hop p -> q is stored at (row q, col p); its transpose is the conjugate
    rows = [idx.ravel(), idx[:, 1:].ravel(), idx[1:, :].ravel()]
    cols = [idx.ravel(), idx[:, :-1].ravel(), idx[:-1, :].ravel()]
    vals = [diag.ravel().astype(complex), off_y.ravel(), off_x.ravel()]
    lower = sparse.coo_matrix((np.concatenate(vals[1:]),
                               (np.concatenate(rows[1:]), np.concatenate(cols[1:]))),
                              shape=(mx * my, mx * my))
    H = sparse.diags(vals[0]) + lower + lower.conj().T
    return H.tocsr()


def inertia_count(Lx, Ly, B, nx, ny, E, gauge="landau_x"):
    """Number of eigenvalues of the FD matrix strictly below ``E``.

    Block LDL^T over x-columns: S_1 = D_1 - E, S_i = D_i - E - C S_{i-1}^{-1} C^H,
    and by Haynsworth additivity the negative eigenvalues of all S_i add up to
    those of H - E.
    """
    diag, off_y, off_x = _blocks(Lx, Ly, B, nx, ny, gauge)
    my = ny - 1
    count = 0
    S = None
    for i in range(nx - 1):
        D = np.diag(diag[i] - E).astype(complex)
        # lower-triangular entries D[j+1, j] hold the hop j -> j+1
        D[np.arange(1, my), np.arange(my - 1)] = off_y[i]
        D[np.arange(my - 1), np.arange(1, my)] = np.conj(off_y[i])
        if S is not None:
            c = off_x[i - 1]  # hop (i-1, j) -> (i, j): H[i-col, (i-1)-col] = diag(c)
            X = linalg.solve(S, np.diag(np.conj(c)), assume_a="her")
            D = D - (c[:, None] * X)
        S = 0.5 * (D + D.conj().T)
        count += int(np.sum(linalg.eigvalsh(S) < 0))
    return count


def _lowest(H, k, sigma):
    n = H.shape[0]
    if k >= n - 1:
        return np.sort(linalg.eigvalsh(H.toarray()))[:k]
    v0 = np.sin(0.6180339887498949 * np.arange(1, n + 1)).astype(complex)
    try:
        vals = splinalg.eigsh(H, k=k, sigma=sigma, which="LM", v0=v0,
                              ncv=min(n, max(2 * k + 1, k + 20)), tol=1e-13,
                              return_eigenvectors=False)
    except splinalg.ArpackError as exc:
        raise NumericError(f"Lanczos failed: {exc}", {"k": k, "n": n}) from exc
    return np.sort(vals.real)


def fd_eigenvalues(Lx, Ly, B, nx, ny, E_cut, gauge="landau_x", extra=4):
    """All FD eigenvalues below ``E_cut``; the count is certified by inertia.

    ``extra`` additional eigenvalues are requested so that a cluster at the
    cutoff is fully resolved; a mismatch with the inertia count is an error.
    """
    H = fd_matrix(Lx, Ly, B, nx, ny, gauge)
    want = inertia_count(Lx, Ly, B, nx, ny, E_cut, gauge)
    if want == 0:
        return np.empty(0), 0
    vals = _lowest(H, want + extra, sigma=-1.0)
    got = int(np.sum(vals < E_cut))
    if got != want:
        raise NumericError("Lanczos eigenvalues disagree with the inertia count",
                           {"inertia": want, "lanczos": got, "E_cut": E_cut})
    return vals[:want], want


def rectangle_spectrum_fd(Lx, Ly, B, E_cut, nx, ny, gauge="landau_x", refine=True):
    """Dirichlet eigenvalues <= E_cut on the Lx x Ly rectangle.

    With ``refine`` the problem is also solved with doubled spacing and the
    eigenvalues are Richardson-extrapolated (the scheme is O(h^2)); the size
    of the correction is the error estimate.  Without it the raw eigenvalues
    of the nx x ny grid are returned with an infinite error estimate.
    """
    if not (Lx > 0 and Ly > 0):
        raise DomainError(f"rectangle sides must be > 0, got {Lx}, {Ly}")
    if B < 0:
        raise DomainError(f"B must be >= 0, got {B}")
    if gauge not in GAUGES:
        raise DomainError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")
    if nx < MIN_CELLS or ny < MIN_CELLS:
        raise PreconditionError(f"need nx, ny >= {MIN_CELLS}, got {nx}, {ny}")
    h = max(Lx / nx, Ly / ny)
    if B * h * h > MAX_PLAQUETTE_PHASE:
        raise PreconditionError(f"flux per plaquette B h^2 = {B * h * h:.3g} exceeds "
                                f"{MAX_PLAQUETTE_PHASE}")
    if (nx - 1) * (ny - 1) > MAX_UNKNOWNS:
        raise PreconditionError(f"{(nx - 1) * (ny - 1)} unknowns exceed {MAX_UNKNOWNS}")
    grid = {"nx": nx, "ny": ny, "gauge": gauge}
    if not refine:
        ev, _ = fd_eigenvalues(Lx, Ly, B, nx, ny, E_cut, gauge)
        err = np.full(ev.size, math.inf)
    else:
        # solve past the cutoff on both grids so extrapolation cannot lose a branch
        fine, _ = fd_eigenvalues(Lx, Ly, B, nx, ny, 1.1 * E_cut + 0.5, gauge)
        coarse, _ = fd_eigenvalues(Lx, Ly, B, nx // 2, ny // 2, 1.5 * E_cut + 1.0, gauge)
        k = min(coarse.size, fine.size)
        corr = (fine[:k] - coarse[:k]) / 3.0
        ev = fine[:k] + corr
        keep = ev <= E_cut
        ev, err = ev[keep], np.abs(corr[keep])
        grid["coarse"] = {"nx": nx // 2, "ny": ny // 2}
    return Spectrum(ev, err, E_cut, {"kind": "rectangle", "Lx": Lx, "Ly": Ly},
                    {"kind": "constant", "B0": B}, "finite_difference_lanczos", grid,
                    area=Lx * Ly)
