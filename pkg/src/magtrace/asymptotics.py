"""Two-term trace and counting asymptotics checked against exact spectra.

Semiclassical traces on a disk of radius R0 are computed through the
dilation  Tr f(h^-1 L_h) on Omega = Tr f((-i grad - A)^2) on h^-1/2 Omega,
with the same constant field, which turns small h into large radii.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ._format import dumps_csv, dumps_json
from ._parallel import pmap
from .coeff import (SWEEP_CACHE, SeriesTolerance, adaptive_panels, kmax_bucket,
                    landau_density, s_series)
from .errors import CutoffError, DomainError, GapConditionError, PreconditionError
from .geometry import (ConstantField, Disk, Rectangle, c0 as bulk_coefficient,
                       c1 as boundary_coefficient, field_range, flux)
from .special1d import model_eigenvalues
from .spectral2d import count_below, disk_spectrum, rectangle_spectrum_fd, trace_f

MAX_DISK_RADIUS = 25.0
KUNZ_T = 20


def predict_trace(h, c0, c1):
    """h^-1 (c0 + h^1/2 c1)."""
    if not h > 0:
        raise DomainError(f"h must be > 0, got {h}")
    return (c0 + math.sqrt(h) * c1) / h


def dilated_length(length, h):
    """length / sqrt(h), rounded to 12 significant digits.

    The rounding makes h = 1/L^2 land exactly on L * length, so the
    semiclassical and thermodynamic routes build the identical spectrum.
    """
    return float(f"{length / math.sqrt(h):.12g}")


_SPECTRA = {}
_SPECTRA_LOCK = threading.Lock()


def _disk_spectrum_cached(R, B, E_cut):
    key = (R, B, E_cut)
    with _SPECTRA_LOCK:
        spec = _SPECTRA.get(key)
    if spec is None:
        spec = disk_spectrum(R, B, E_cut)
        with _SPECTRA_LOCK:
            spec = _SPECTRA.setdefault(key, spec)
    return spec


def clear_spectrum_cache():
    with _SPECTRA_LOCK:
        _SPECTRA.clear()


@dataclass
class TraceResult:
    trace: float
    err_est: float
    tail_bound: float
    radius: float
    spectrum: object = field(repr=False, default=None)


def _trace_with_cutoff(build, f, area, tol):
    # start where the estimated tail is already small, raise the cutoff if needed
    E_cut = f.energy_cutoff(tol / (4.0 * max(area, 1.0)))
    E_cut = float(f"{max(E_cut, 1.0):.6g}")
    for _ in range(6):
        spec = build(E_cut)
        try:
            tr, tail = trace_f(spec, f, tol)
        except CutoffError:
            E_cut = float(f"{1.5 * E_cut:.6g}")
            continue
        err = math.fsum(np.abs(f(spec.eigenvalues + spec.err_est) - f(spec.eigenvalues)))
        return tr, err, tail, spec
    raise CutoffError("could not find a spectral cutoff meeting the trace tolerance",
                      {"E_cut": E_cut, "tol": tol})


def disk_trace(R, B, f, tol=1e-8):
    """Tr f((-i grad - A)^2) on the disk of radius R with constant field B."""
    if R > MAX_DISK_RADIUS:
        raise PreconditionError(f"disk radius {R} exceeds the desk-scale limit {MAX_DISK_RADIUS}")
    tr, err, tail, spec = _trace_with_cutoff(
        lambda E: _disk_spectrum_cached(R, B, E), f, math.pi * R * R, tol)
    return TraceResult(tr, err, tail, R, spec)


def semiclassical_trace_exact(dom, field_, f, h, tol=1e-8):
    """Tr f(h^-1 L_h) on a disk with constant field, via the dilated disk."""
    if not isinstance(dom, Disk) or not isinstance(field_, ConstantField):
        raise DomainError("exact semiclassical traces need a disk with a constant field")
    if not h > 0:
        raise DomainError(f"h must be > 0, got {h}")
    return disk_trace(dilated_length(dom.R, h), field_.B0, f, tol)


@dataclass
class ConvergenceReport:
    h: list
    trace: list
    c0: float
    c1: float
    residual: list
    extracted_c1: list
    fit_slope: float
    trace_err: list = field(default_factory=list)
    mode: str = "sharp"

    def relative_errors(self):
        return [abs(x - self.c1) / abs(self.c1) for x in self.extracted_c1]

    def to_dict(self):
        return {"h": self.h, "trace": self.trace, "c0": self.c0, "c1": self.c1,
                "residual": self.residual, "extracted_c1": self.extracted_c1,
                "fit_slope": self.fit_slope, "trace_err": self.trace_err, "mode": self.mode}

    def to_json(self, extra=None):
        return dumps_json({**self.to_dict(), **(extra or {})})

    def to_csv(self):
        rows = list(zip(self.h, self.trace, self.residual, self.extracted_c1))
        return dumps_csv(["h", "trace", "residual", "extracted_c1"], rows)


def _fit_slope(h, extracted, c1):
    dev = np.abs(np.asarray(extracted) - c1)
    ok = dev > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(np.asarray(h)[ok]), np.log(dev[ok]), 1)[0])


def _rectangle_trace(dom, field_, f, h, n_grid, tol):
    Lx, Ly = dilated_length(dom.Lx, h), dilated_length(dom.Ly, h)
    tr, err, _, _ = _trace_with_cutoff(
        lambda E: rectangle_spectrum_fd(Lx, Ly, field_.B0, E, n_grid, n_grid),
        f, Lx * Ly, tol)
    return tr, err


def convergence_study(dom, field_, f, h_list, tol=None, trace_tol=1e-8, n_grid=128):
    """Traces at each h against the two-term prediction.

    Disks with constant field use exact radial spectra (sharp mode);
    rectangles use finite differences on an ``n_grid``^2 grid (loose mode).
    A residual trend that does not shrink is reported as a warning.
    """
    h_list = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(h_list, h_list[1:])) or min(h_list) <= 0:
        raise DomainError("h_list must be positive and strictly decreasing")
    if not isinstance(field_, ConstantField):
        raise DomainError("convergence studies need a constant field")
    tol = tol or SeriesTolerance()
    c0 = bulk_coefficient(f, dom, field_, tol).value
    c1 = boundary_coefficient(f, dom, field_, tol).value
    if isinstance(dom, Disk):
        mode = "sharp"
        res = pmap(lambda h: semiclassical_trace_exact(dom, field_, f, h, trace_tol), h_list)
        traces = [r.trace for r in res]
        errs = [r.err_est for r in res]
    elif isinstance(dom, Rectangle):
        mode = "loose"
        res = [_rectangle_trace(dom, field_, f, h, n_grid, trace_tol) for h in h_list]
        traces = [r[0] for r in res]
        errs = [r[1] for r in res]
    else:
        raise DomainError(f"no exact solver for domain kind {dom.kind!r}")
    residual = [h * tr - c0 for h, tr in zip(h_list, traces)]
    extracted = [r / math.sqrt(h) for r, h in zip(residual, h_list)]
    if any(abs(b) > abs(a) for a, b in zip(residual, residual[1:])):
        warnings.warn("residuals h*Tr - C0 do not decrease monotonically", RuntimeWarning)
    return ConvergenceReport(h_list, traces, c0, c1, residual, extracted,
                             _fit_slope(h_list, extracted, c1), errs, mode)


@dataclass
class KunzShift:
    B: float
    K: int
    E: float
    value: float
    err_est: float = 0.0
    thresholds: list = field(default_factory=list)
    components: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def _check_gap(B, E, K):
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K}")
    if not (2 * K - 1) * B < E < (2 * K + 1) * B:
        raise GapConditionError(
            f"E={E} is not in the gap ((2K-1)B, (2K+1)B) = ({(2 * K - 1) * B:g}, "
            f"{(2 * K + 1) * B:g}) for K={K}, B={B}")


def branch_threshold(k, level, k_max=None):
    """xi* with e_k(xi*) = level, for level > 2k - 1.

    e_k is increasing (its derivative is psi_k'(0)^2 >= 0) and flat at 2k-1 as
    xi -> -inf, so the root is bracketed by stepping left from the point where
    e_k >= xi^2 + 4k - 1 exceeds the level.
    """
    k_max = k_max or kmax_bucket(k)
    if not level > 2 * k - 1:
        raise DomainError(f"level {level} is not above the branch floor {2 * k - 1}")

    def g(xi):
        return model_eigenvalues(xi, k_max)[0][k - 1] - level

    hi = math.sqrt(max(level - (4 * k - 1), 0.0)) + 1e-3
    lo = min(hi - 1.0, 0.0)
    while g(lo) >= 0:
        lo -= 2.0
        if lo < -60:
            raise DomainError(f"level {level} too close to the flat value {2 * k - 1} "
                              "for threshold inversion")
    return optimize.brentq(g, lo, hi, xtol=1e-13, rtol=1e-14)


def kunz_shift(B, E, K, tol=1e-10, t_max=KUNZ_T):
    """sum_{k<=K} int_0^inf (1 - int_{B e_k(xi) < E} psi_k(t, xi)^2 dxi) dt.

    For each branch the xi-threshold is found by root bracketing, then the
    t-integral up to ``t_max`` is written as t_max - int_{xi < xi*} M_k(xi, t_max) dxi,
    with M_k the cumulative mass of psi_k on (0, t_max).  The last unit t-step
    gives the tail estimate.
    """
    if not B > 0:
        raise DomainError(f"B must be > 0, got {B}")
    _check_gap(B, E, K)
    K = int(K)
    marks = tuple(range(int(t_max) + 1))
    thresholds, comps, err = [], [], 0.0
    for k in range(1, K + 1):
        k_max = kmax_bucket(k)
        xs = branch_threshold(k, E / B, k_max)
        lo = 2.0 * math.floor((-6.0 * math.sqrt(k) - t_max - 4.0) / 2.0)
        edge = 2.0 * math.floor(xs / 2.0)

        def integrand(xis, k=k, k_max=k_max):
            _, mass = SWEEP_CACHE.masses(xis, k_max, (marks[-2], marks[-1]))
            return mass[:, k - 1, :]

        regions = [(lo, edge, 2.0)] if edge > lo else []
        if xs > edge:
            regions.append((edge, xs, xs - edge))
        vals, qerr, _ = adaptive_panels(integrand, regions, tol)
        v_prev, v_last = marks[-2] - vals[0], marks[-1] - vals[1]
        thresholds.append(xs)
        comps.append(float(v_last))
        # an eigenvalue error de moves xi* by de / e_k'(xi*), and the mass there is <= 1
        de = model_eigenvalues(xs, k_max)[1][k - 1]
        step = 1e-3
        slope = (model_eigenvalues(xs + step, k_max)[0][k - 1]
                 - model_eigenvalues(xs - step, k_max)[0][k - 1]) / (2 * step)
        err += float(qerr + abs(v_last - v_prev) + de / slope)
    return KunzShift(B, K, E, math.fsum(comps), err, thresholds, comps)


@dataclass
class CountingPrediction:
    bulk: float
    boundary: float
    K: int
    E: float
    B_min: float
    B_max: float
    err_est: float = 0.0

    def predict(self, h):
        """h^-1 bulk - h^-1/2 boundary."""
        return self.bulk / h - self.boundary / math.sqrt(h)


def counting_prediction(dom, field_, E, K, tol=1e-10, n=64):
    """Bulk (2 pi)^-1 K int B dx and boundary (2 pi)^-1 int kunz(B(x)) sqrt(B(x)) dsigma."""
    b_min, b_max = field_range(dom, field_)
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K}")
    K = int(K)
    if not ((2 * K - 1) * b_max < E < (2 * K + 1) * b_min):
        raise GapConditionError(
            f"gap condition fails for K={K}: need (2K-1)B_max < E < (2K+1)B_min with "
            f"B_min={b_min:.6g}, B_max={b_max:.6g}, E={E}")
    bulk = K * flux(dom, field_) / (2 * math.pi)
    if isinstance(field_, ConstantField):
        ks = kunz_shift(field_.B0, E, K, tol)
        scale = dom.perimeter() * math.sqrt(field_.B0) / (2 * math.pi)
        return CountingPrediction(bulk, scale * ks.value, K, E, b_min, b_max, scale * ks.err_est)
    cache = {}

    def boundary(m):
        bx, by, bw = dom.boundary_nodes(m)
        bs = np.round(field_(bx, by), 12)
        for b in sorted(set(bs.tolist()) - set(cache)):
            cache[b] = kunz_shift(b, E, K, tol).value
        return math.fsum(bw * np.sqrt(bs) * np.array([cache[b] for b in bs])) / (2 * math.pi)

    v1, v2 = boundary(n), boundary(2 * n)
    return CountingPrediction(bulk, v2, K, E, b_min, b_max, abs(v2 - v1))


@dataclass
class CountingReport:
    h: list
    count: list
    bulk: float
    boundary: float
    scaled: list
    rel_err: list

    def to_dict(self):
        return {"h": self.h, "count": self.count, "bulk": self.bulk, "boundary": self.boundary,
                "scaled": self.scaled, "rel_err": self.rel_err}

    def to_json(self, extra=None):
        return dumps_json({**self.to_dict(), **(extra or {})})

    def to_csv(self):
        rows = list(zip(self.h, self.count, self.scaled, self.rel_err))
        return dumps_csv(["h", "count", "scaled", "rel_err"], rows)


def counting_vs_exact(dom, field_, E, K, h_list, tol=1e-10):
    """(N(E h) - h^-1 bulk) sqrt(h) from exact disk spectra, against -boundary."""
    if not isinstance(dom, Disk) or not isinstance(field_, ConstantField):
        raise DomainError("exact counting needs a disk with a constant field")
    pred = counting_prediction(dom, field_, E, K, tol)
    counts, scaled, rel = [], [], []
    for h in h_list:
        R = dilated_length(dom.R, h)
        if R > MAX_DISK_RADIUS:
            raise PreconditionError(f"disk radius {R} exceeds the desk-scale limit")
        spec = _disk_spectrum_cached(R, field_.B0, float(E))
        n = count_below(spec, E)
        s = (n - pred.bulk / h) * math.sqrt(h)
        counts.append(n)
        scaled.append(s)
        rel.append(abs(s + pred.boundary) / abs(pred.boundary))
    return CountingReport(list(map(float, h_list)), counts, pred.bulk, pred.boundary, scaled, rel)


@dataclass
class ThermoResult:
    L: float
    left: float
    right: float
    gap: float
    bulk: float
    boundary: float
    trace: float
    trace_via_h: float
    bookkeeping_exact: bool


def thermo_density(B, f, L, R0=1.0, tol=None, trace_tol=1e-8):
    """Both sides of the thermodynamic limit on the disk of radius R0.

    left  = Tr f(H^L) / |L Omega|, with H^L the operator on the dilated disk
    right = B/(2 pi) sum_k f((2k-1)B) + L^-1 sqrt(B) |dOmega| / (2 pi |Omega|) sum_k s_k
    The trace is computed directly on the radius L R0 and again through the
    semiclassical route with h = L^-2; ``bookkeeping_exact`` reports whether
    the two agree bit for bit.
    """
    if not L >= 1:
        raise DomainError(f"L must be >= 1, got {L}")
    tol = tol or SeriesTolerance()
    dom = Disk(R0)
    direct = disk_trace(float(f"{L * R0:.12g}"), B, f, trace_tol)
    via_h = semiclassical_trace_exact(dom, ConstantField(B), f, 1.0 / L ** 2, trace_tol)
    area = math.pi * (L * R0) ** 2
    left = direct.trace / area
    bulk = landau_density(B, f, tol)
    boundary = math.sqrt(B) * dom.perimeter() / (2 * math.pi * dom.area()) * s_series(B, f, tol).value
    right = bulk + boundary / L
    return ThermoResult(L, left, right, left - right, bulk, boundary, direct.trace,
                        via_h.trace, direct.trace == via_h.trace)


def mehler_heat_kernel(b, t, x, xp):
    """Heat kernel of (-i grad - A)^2 in the plane for constant field b.

    (b / (4 pi sinh(b t))) exp(-i b (x ^ x')/2) exp(-b |x - x'|^2 / (4 tanh(b t))),
    with the free kernel at b = 0.  ``x`` and ``xp`` broadcast over a final
    axis of length 2.
    """
    if b < 0:
        raise DomainError(f"b must be >= 0, got {b}")
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    if b * t >= 700:
        raise DomainError(f"b*t = {b * t:g} >= 700 overflows sinh")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    d2 = np.sum((x - xp) ** 2, axis=-1)
    if b == 0:
        return np.exp(-d2 / (4 * t)) / (4 * math.pi * t) + 0j
    wedge = x[..., 0] * xp[..., 1] - x[..., 1] * xp[..., 0]
    bt = b * t
    return (b / (4 * math.pi * math.sinh(bt)) * np.exp(-0.5j * b * wedge)
            * np.exp(-b * d2 / (4 * math.tanh(bt))))
