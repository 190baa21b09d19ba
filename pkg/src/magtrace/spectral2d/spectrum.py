"""Truncated Dirichlet spectra, traces and counting functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._format import dumps_csv, dumps_json
from ..errors import CutoffError, DomainError


@dataclass
class Spectrum:
    """Sorted eigenvalues up to ``E_cut`` with per-eigenvalue error estimates.

    ``m_channel`` is the angular momentum of each eigenvalue for separated
    (disk) spectra and ``None`` otherwise.  ``area`` feeds the tail estimate
    used by ``trace_f``.
    """

    eigenvalues: np.ndarray
    err_est: np.ndarray
    E_cut: float
    domain: dict
    field: dict
    method: str
    grid: dict = field(default_factory=dict)
    m_channel: np.ndarray | None = None
    area: float = 0.0

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        order = np.argsort(ev, kind="stable")
        self.eigenvalues = ev[order]
        self.err_est = np.asarray(self.err_est, dtype=float)[order]
        if self.m_channel is not None:
            self.m_channel = np.asarray(self.m_channel, dtype=int)[order]

    def __len__(self):
        return self.eigenvalues.size

    def to_dict(self):
        return {"domain": self.domain, "field": self.field, "E_cut": self.E_cut,
                "eigenvalues": self.eigenvalues, "err_est": self.err_est,
                "method": self.method, "grid": self.grid}

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        m = self.m_channel if self.m_channel is not None else [""] * len(self)
        rows = [(i, float(lam), float(err), mc)
                for i, (lam, err, mc) in enumerate(zip(self.eigenvalues, self.err_est, m))]
        return dumps_csv(["idx", "lambda", "err_est", "m_channel"], rows)


def count_below(spec, E):
    """Number of eigenvalues strictly below ``E``, with multiplicity."""
    if E > spec.E_cut:
        raise DomainError(f"E={E} exceeds the spectral cutoff E_cut={spec.E_cut}")
    return int(np.searchsorted(spec.eigenvalues, E, side="left"))


def tail_bound(spec, f):
    """Estimate of sum_{lambda > E_cut} |f(lambda)|.

    Uses the larger of the Weyl density |Omega|/(4 pi) and the observed mean
    density N(E_cut)/E_cut, doubled, against the integral of f's envelope.
    """
    if spec.E_cut <= 0:
        return math.inf
    density = 2.0 * max(spec.area / (4 * math.pi), len(spec) / spec.E_cut)
    return float(density * f.tail_integral(spec.E_cut)
                 + f.envelope(spec.E_cut))


def trace_f(spec, f, tol=1e-8):
    """sum_i f(lambda_i) over the stored eigenvalues; returns (trace, tail_bound).

    Raises CutoffError when the estimated contribution from above ``E_cut``
    exceeds ``tol``.
    """
    tail = tail_bound(spec, f)
    if tail > tol:
        raise CutoffError(f"cutoff E_cut={spec.E_cut} too low: tail bound {tail:.3g} > {tol:.3g}",
                          {"E_cut": spec.E_cut, "tail_bound": tail, "tol": tol})
    if len(spec) == 0:
        return 0.0, tail
    return math.fsum(np.asarray(f(spec.eigenvalues), dtype=float)), tail
