"""Independent reference computations behind the frozen values in the tests.

None of these use magtrace.  Run ``python tests/_oracles.py`` to reprint
them; the tests hold the printed numbers as literals.
"""
import math

import mpmath as mp
import numpy as np
import sympy as sp
from scipy import integrate, optimize


def hermite_phi_exact(k, t):
    """phi_k(t) from the degree-(k-1) physicists' Hermite polynomial, exact arithmetic."""
    x = sp.Symbol("x")
    n = k - 1
    poly = sp.hermite(n, x)
    norm = 1 / sp.sqrt(2 ** n * sp.factorial(n) * sp.sqrt(sp.pi))
    return float(sp.N(norm * poly.subs(x, sp.Rational(t)) * sp.exp(-sp.Rational(t) ** 2 / 2), 30))


def tail_mass_simpson(k, xi, upper=40.0, n=400_000):
    t = np.linspace(xi, upper, n + 1)
    x = sp.Symbol("x")
    poly = sp.lambdify(x, sp.hermite(k - 1, x), "numpy")
    norm = 1.0 / math.sqrt(2 ** (k - 1) * math.factorial(k - 1) * math.sqrt(math.pi))
    dens = (norm * poly(t) * np.exp(-t * t / 2)) ** 2
    return float(integrate.simpson(dens, x=t))


def _radial_shoot(R, B, m, lam, r0=1e-6):
    """Regular solution of -u'' - u'/r + (m/r - B r/2)^2 u = lam u, value at R."""
    def rhs(r, y):
        u, du = y
        return [du, -du / r + ((m / r - B * r / 2) ** 2 - lam) * u]
    y0 = [r0 ** abs(m), abs(m) * r0 ** (abs(m) - 1) if m else 0.0]
    sol = integrate.solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1] / max(np.max(np.abs(sol.y[0])), 1e-300)


def radial_shooting_eigenvalues(R, B, m, E_cut, n_scan=400):
    """Roots of the shooting function in (0, E_cut), by scan and bisection."""
    lams = np.linspace(1e-3, E_cut, n_scan)
    vals = [_radial_shoot(R, B, m, lam) for lam in lams]
    roots = []
    for a, b, fa, fb in zip(lams[:-1], lams[1:], vals[:-1], vals[1:]):
        if fa == 0 or fa * fb < 0:
            roots.append(optimize.brentq(lambda L: _radial_shoot(R, B, m, L), a, b, xtol=1e-13))
    return roots


def kummer_count(R, B, m, lam, samples=4000):
    """Eigenvalues below lam in channel m: zeros in (0, R) of the regular solution."""
    mp.mp.dps = 30
    a = mp.mpf(abs(m) + 1) / 2 - mp.mpf(lam + B * m) / (2 * B)
    r = np.linspace(R / samples, R, samples)
    vals = [mp.hyp1f1(a, abs(m) + 1, B * rr * rr / 2) for rr in r]
    signs = [v > 0 for v in vals]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def disk_count(R, B, lam):
    total = 0
    m = 0
    while True:
        c = kummer_count(R, B, m, lam)
        if c == 0 and m > R * (B * R / 2 + math.sqrt(lam)):
            break
        total += c
        m += 1
    m = -1
    while 2 * abs(m) * B < lam:
        total += kummer_count(R, B, m, lam)
        m -= 1
    return total


def branch_threshold_pcf(level):
    """xi* with e_1(xi*) = level: the decaying solution is U(-level/2, sqrt2 (t + xi))."""
    mp.mp.dps = 30
    guess = -math.sqrt(max(3.0 - level, 0.0)) if level < 3 else 0.0
    return float(mp.findroot(lambda xi: mp.pcfu(-mp.mpf(level) / 2, mp.sqrt(2) * xi), guess))


if __name__ == "__main__":
    print("phi_3(1) =", repr(hermite_phi_exact(3, 1)))
    print("phi_5(0.5) =", repr(hermite_phi_exact(5, sp.Rational(1, 2))))
    print("tail(2, 1) =", repr(tail_mass_simpson(2, 1.0)))
    print("radial R=6 B=1 m=0 E<4:", radial_shooting_eigenvalues(6.0, 1.0, 0, 4.0))
    print("radial R=6 B=1 m=2 E<6:", radial_shooting_eigenvalues(6.0, 1.0, 2, 6.0))
    print("kunz(1, 2, 1) = -xi* =", repr(-branch_threshold_pcf(2.0)))
    print("kunz(1, 1.5, 1) = -xi* =", repr(-branch_threshold_pcf(1.5)))
    print("disk R=20 B=1 N(2) =", disk_count(20.0, 1.0, 2.0))
    print("disk R=5 B=1 N(2) =", disk_count(5.0, 1.0, 2.0))
