import math

import numpy as np
import pytest

from magtrace.coeff import (SeriesTolerance, SweepCache, adaptive_panels, bulk_density_term,
                            default_window, kmax_bucket, landau_density, s_k_alt, s_k_direct,
                            s_series, s_table_csv, term_bound)
from magtrace.errors import ConvergenceError, DomainError, PreconditionError
from magtrace.testfunctions import FermiDirac, Gaussian, SmoothedStep

G = Gaussian(1.0, 0.5)
# s_1(1, G) from a standalone prototype (dense FD eigenvalues, scipy quad in xi);
# it agrees with the package to ~3e-10, far inside the 1e-8 tolerance used below
S1_PROTOTYPE = -1.0875563119


def test_tolerance_validation():
    with pytest.raises(DomainError):
        SeriesTolerance(abs_tol=1e-13)
    with pytest.raises(DomainError):
        SeriesTolerance(k_cap=0)


@pytest.mark.parametrize("k,bucket", [(1, 6), (6, 6), (7, 12), (13, 18)])
def test_kmax_bucket(k, bucket):
    assert kmax_bucket(k) == bucket


def test_adaptive_panels_smooth():
    val, err, n = adaptive_panels(np.exp, [(0.0, 2.0, 1.0)], 1e-12)
    assert val == pytest.approx(math.e ** 2 - 1, abs=1e-13)
    assert err <= 1e-12
    assert n == 2 * 3 * 10


def test_adaptive_panels_refines_kink():
    val, err, n = adaptive_panels(np.abs, [(-1.0, 2.0, 1.0)], 1e-9)
    assert val == pytest.approx(2.5, abs=1e-9)
    assert n == 3 * 3 * 10  # the kink sits on a panel edge, so nothing is bisected
    val, _, n2 = adaptive_panels(lambda x: np.abs(x - 0.3), [(-1.0, 2.0, 1.0)], 1e-8)
    assert val == pytest.approx(0.5 * 1.3 ** 2 + 0.5 * 1.7 ** 2, abs=1e-8)
    assert n2 > n


def test_adaptive_panels_vector_valued():
    val, _, _ = adaptive_panels(lambda x: np.stack([x, x ** 2], axis=1), [(0.0, 3.0, 1.0)], 1e-12)
    assert np.allclose(val, [4.5, 9.0], atol=1e-12)


def test_bulk_term():
    assert bulk_density_term(2.0, G, 1) == pytest.approx(float(G(2.0)))
    assert bulk_density_term(1.0, G, 3) == pytest.approx(float(G(5.0)))
    with pytest.raises(DomainError):
        bulk_density_term(0.0, G, 1)


@pytest.mark.parametrize("B,k", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, 1.5)])
def test_s_k_bad_args(B, k):
    with pytest.raises(DomainError):
        s_k_alt(B, G, k)


def test_window_lattice():
    lo, hi = default_window(1.0, G, 1)
    assert lo % 2 == 0 and hi % 2 == 0
    assert lo <= -(6.0 + 4.0) and hi >= math.sqrt(4) + 6
    lo_d, _ = default_window(1.0, G, 1, t_max=20)
    assert lo_d <= lo - 20


def test_s1_against_prototype():
    r = s_k_alt(1.0, G, 1)
    assert r.value == pytest.approx(S1_PROTOTYPE, abs=1e-8)
    assert not r.truncated
    assert r.err_est < 1e-4
    assert float(r) == r.value


def test_direct_matches_alternative():
    a = s_k_alt(1.0, G, 1)
    d = s_k_direct(1.0, G, 1, t_max=20)
    assert d.value == pytest.approx(a.value, abs=1e-8)
    assert d.tail_estimate < 1e-10
    assert d.profile.shape == (21,)
    assert d.profile[0] == 0.0
    assert not d.truncated


def test_direct_needs_long_t_range():
    with pytest.raises(PreconditionError):
        s_k_direct(1.0, G, 1, t_max=10)


def test_term_bound_dominates():
    for k in (1, 2, 3):
        assert term_bound(1.0, G, k) >= abs(s_k_alt(1.0, G, k).value)


def test_series_value():
    r = s_series(1.0, G)
    assert r.value == pytest.approx(-1.0875566003, abs=1e-8)
    assert r.k_used == 2
    assert [t.k for t in r.terms] == [1, 2]
    assert r.value == pytest.approx(math.fsum(t.value for t in r.terms), abs=0)


def test_series_k_cap():
    with pytest.raises(ConvergenceError) as exc:
        s_series(0.05, G, SeriesTolerance(k_cap=3))
    assert exc.value.diagnostics["k_cap"] == 3


def test_s_table_csv():
    r = s_series(1.0, G)
    lines = s_table_csv(r).splitlines()
    assert lines[0] == "k,s_k,err_est,k_window_lo,k_window_hi"
    assert len(lines) == 1 + len(r.terms)


def test_landau_density_closed_form():
    for B in (0.5, 1.0, 3.0):
        direct = B / (2 * math.pi) * sum(float(G((2 * k - 1) * B)) for k in range(1, 400))
        assert landau_density(B, G) == pytest.approx(direct, abs=1e-10)
    assert landau_density(1.0, G) == pytest.approx(0.15915496100242468, abs=1e-12)


def test_landau_density_zero_field():
    # int_0^inf exp(-(E-1)^2/0.25) dE / (4 pi), closed form through erf
    exact = 0.25 * math.sqrt(math.pi) * (1 + math.erf(2.0)) / (4 * math.pi)
    assert landau_density(0.0, G) == pytest.approx(exact, abs=1e-11)
    with pytest.raises(DomainError):
        landau_density(-1.0, G)


def test_landau_density_cap():
    with pytest.raises(ConvergenceError):
        landau_density(0.01, G, SeriesTolerance(k_cap=10))


def test_private_cache_is_equivalent():
    cache = SweepCache()
    a = s_k_alt(2.0, FermiDirac(5.0, 2.0), 1, cache=cache)
    b = s_k_alt(2.0, FermiDirac(5.0, 2.0), 1)
    assert a.value == b.value
    assert len(cache) > 0
    cache.clear()
    assert len(cache) == 0


def test_compact_weight_series():
    r = s_series(1.0, SmoothedStep(4.0, 0.5))
    # only branches with (2k-1) B < 4 see the step
    assert r.k_used <= 4
    assert math.isfinite(r.value)
