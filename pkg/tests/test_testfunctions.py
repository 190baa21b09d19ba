import math

import numpy as np
import pytest
from scipy import integrate

from magtrace.errors import DomainError
from magtrace.testfunctions import (FermiDirac, Gaussian, LinearCombination, LogPressure,
                                    SmoothedStep, from_dict)

FUNCS = [Gaussian(1.0, 0.5), Gaussian(0.0, 2.0), FermiDirac(5.0, 2.0), LogPressure(2.0, 1.0),
         SmoothedStep(3.0, 0.5), SmoothedStep(3.0, 0.5, "upper")]


@pytest.mark.parametrize("f", FUNCS, ids=lambda f: f.kind)
def test_envelope_dominates(f):
    E = np.linspace(0.0, 30.0, 3001)
    vals = np.abs(f(E))
    suffix_max = np.maximum.accumulate(vals[::-1])[::-1]
    assert np.all(f.envelope(E) >= suffix_max - 1e-15)


@pytest.mark.parametrize("f", FUNCS, ids=lambda f: f.kind)
def test_tail_integral_bounds_envelope(f):
    for E in (0.0, 1.0, 2.7, 6.0):
        quad, _ = integrate.quad(lambda x: float(f.envelope(x)), E, E + 60, limit=400)
        assert float(f.tail_integral(E)) >= quad - 1e-9


@pytest.mark.parametrize("f", FUNCS, ids=lambda f: f.kind)
def test_energy_cutoff(f):
    for tol in (1e-4, 1e-10):
        E = f.energy_cutoff(tol)
        assert float(f.envelope(E)) <= tol * (1 + 1e-9)
        assert float(f.envelope(E + 5.0)) <= tol * (1 + 1e-9)


@pytest.mark.parametrize("f", FUNCS, ids=lambda f: f.kind)
def test_dilate(f):
    E = np.linspace(0.0, 10.0, 41)
    assert np.allclose(f.dilate(2.5)(E), f(2.5 * E), atol=1e-14)


@pytest.mark.parametrize("f", FUNCS, ids=lambda f: f.kind)
def test_roundtrip_dict(f):
    assert from_dict(f.to_dict()) == f


def test_fermi_tail_exact():
    f = FermiDirac(3.0, 1.0)
    quad, _ = integrate.quad(f, 2.0, 50.0)
    assert float(f.tail_integral(2.0)) == pytest.approx(quad, rel=1e-10)


def test_log_pressure_tail_exact():
    f = LogPressure(2.0, 1.5)
    quad, _ = integrate.quad(f, 0.0, 60.0)
    assert float(f.tail_integral(0.0)) == pytest.approx(quad, rel=1e-10)


def test_smoothed_step_sides():
    lo, up = SmoothedStep(2.0, 0.2), SmoothedStep(2.0, 0.2, "upper")
    assert float(lo(1.79)) == 1.0 and float(lo(2.0)) == 0.0
    assert float(up(2.0)) == 1.0 and float(up(2.21)) == 0.0
    assert 0.0 < float(lo(1.9)) < 1.0


def test_gaussian_e_decay():
    f = Gaussian(1.0, 0.5)
    E = f.e_decay()
    grid = np.linspace(E, E + 20.0, 500)
    assert np.all(f(grid) * grid ** 8 <= 1.0 + 1e-9)


def test_linear_combination():
    g, h = Gaussian(1.0, 0.5), FermiDirac(2.0, 1.0)
    combo = 2.0 * g + h
    assert isinstance(combo, LinearCombination)
    E = np.linspace(0, 5, 11)
    assert np.allclose(combo(E), 2 * g(E) + h(E))
    assert np.allclose(combo.dilate(2.0)(E), combo(2 * E))


@pytest.mark.parametrize("spec", [
    {"kind": "gaussian", "c": -1.0, "w": 1.0},
    {"kind": "gaussian", "c": 1.0, "w": 0.0},
    {"kind": "fermi_dirac", "beta": 0.0, "mu": 1.0},
    {"kind": "smoothed_step", "E0": 1.0, "eps": 0.1, "side": "middle"},
    {"kind": "hat"},
])
def test_bad_specs(spec):
    with pytest.raises(DomainError):
        from_dict(spec)


def test_gaussian_tail_closed_form():
    f = Gaussian(0.0, 1.0)
    assert float(f.tail_integral(0.0)) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-14)
