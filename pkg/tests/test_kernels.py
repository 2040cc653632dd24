"""Kernel checks against independent oracles.

The antiderivative branches are cross-checked by adaptive quadrature, the
fundamental-solution normalisation by a divergence-theorem flux computed with
high-precision numerical derivatives, and the Green kernels by recomputing
the closed forms from scratch inside the tests.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from bigreen.kernels import (
    ball_green,
    boggio_integral,
    comparison_kernel,
    comparison_kernel_casewise,
    fundamental_solution,
    halfspace_green,
    unit_ball_volume,
)


def quad_boggio(n, A):
    """Adaptive-quadrature oracle for the kernel integral."""
    val, err = quad(lambda v: (v * v - 1.0) * v ** (1.0 - n), 1.0, A,
                    epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def mp_boggio(n, A, dps=40):
    with mpmath.workdps(dps):
        return float(mpmath.quad(lambda v: (v * v - 1) * v ** (1 - n), [1, A]))


# ---------------------------------------------------------------------------
# integral branches

def test_boggio_pinned_values():
    assert boggio_integral(2, 1.0) == 0.0
    assert boggio_integral(2, 2.0) == pytest.approx(1.5 - math.log(2.0), rel=1e-14)
    assert boggio_integral(3, 2.0) == pytest.approx(0.5, rel=1e-14)
    assert boggio_integral(4, 2.0) == pytest.approx(math.log(2.0) - 0.375, rel=1e-14)
    assert boggio_integral(5, 2.0) == pytest.approx(5.0 / 24.0, rel=1e-14)


def test_boggio_vs_quadrature_grid():
    rng = np.random.default_rng(1234)
    for _ in range(400):
        n = int(rng.integers(2, 11))
        A = 1.0 + 10.0 ** rng.uniform(-6, 3)
        got = boggio_integral(n, A)
        want = quad_boggio(n, A)
        assert got == pytest.approx(want, rel=1e-10), (n, A)


def test_boggio_near_one_series_vs_mpmath():
    for n in (2, 4, 7, 10):
        for t in (1e-6, 1e-5, 5e-5, 9.9e-5):
            got = boggio_integral(n, 1.0 + t)
            want = mp_boggio(n, 1.0 + t)
            assert got == pytest.approx(want, rel=1e-12), (n, t)


def test_boggio_monotone_and_domain():
    A = np.linspace(1.0, 50.0, 200)
    for n in (2, 3, 4, 6):
        vals = boggio_integral(n, A)
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) >= 0.0)
        assert np.all(vals >= 0.0)
    with pytest.raises(ValueError):
        boggio_integral(3, 0.999)
    with pytest.raises(ValueError):
        boggio_integral(1, 2.0)


# ---------------------------------------------------------------------------
# fundamental solution

def _flux_oracle(n, rho):
    """Flux of grad(Lap E) through the sphere of radius rho.

    Lap(Lap E) carries the distributional source, so the flux must be 1 for
    every rho.  Radial derivatives of E come from an order-8 local
    polynomial fit, nothing shared with the implementation's constants.
    """
    h = 0.02 * rho
    s = np.arange(-4, 5) * h
    vals = fundamental_solution(n, rho + s)
    coeff = np.polynomial.polynomial.polyfit(s, vals, 8)
    d1 = coeff[1]
    d2 = 2.0 * coeff[2]
    d3 = 6.0 * coeff[3]
    # d/dr [E'' + (n-1)/r E']  at rho
    dlap = d3 + (n - 1) / rho * d2 - (n - 1) / rho**2 * d1
    area = n * unit_ball_volume(n) * rho ** (n - 1)
    return area * dlap


@pytest.mark.parametrize("n", [2, 3, 5, 6])
def test_fundamental_unit_flux(n):
    for rho in (0.7, 1.3):
        assert _flux_oracle(n, rho) == pytest.approx(1.0, rel=1e-6)


def test_fundamental_examples():
    assert fundamental_solution(2, 1.0) == 0.0
    assert fundamental_solution(2, 0.5) < 0.0
    assert fundamental_solution(5, 2.0) == pytest.approx(1.0 / (32.0 * math.pi**2), rel=1e-14)
    with pytest.raises(ValueError):
        fundamental_solution(2, 0.0)
    with pytest.raises(ValueError):
        fundamental_solution(3, -1.0)


# ---------------------------------------------------------------------------
# half-space kernel

def test_halfspace_pinned_examples():
    # recompute from scratch: prefactor * d^(4-n) * quad value
    got = halfspace_green(2, (-1.0, 0.0), (-3.0, 0.0))
    want = (1.0 / (8.0 * math.pi)) * 4.0 * quad_boggio(2, 2.0)
    assert got == pytest.approx(want, rel=1e-12)
    assert halfspace_green(2, (-1.0, 0.0), (-1.0, 0.0)) == pytest.approx(
        1.0 / (4.0 * math.pi), rel=1e-14)
    got3 = halfspace_green(3, (-1.0, 0.0, 0.0), (-3.0, 0.0, 0.0))
    assert got3 == pytest.approx(1.0 / (16.0 * math.pi), rel=1e-13)
    # boundary data
    assert halfspace_green(2, (-1.0, 0.0), (0.0, 2.0)) == 0.0


def test_halfspace_prefactor_consistency():
    # 1/(4 n e_n) at n = 2 equals 1/(8 pi): same constant, two spellings
    assert 1.0 / (4.0 * 2.0 * unit_ball_volume(2)) == pytest.approx(
        1.0 / (8.0 * math.pi), rel=1e-15)


def test_halfspace_symmetry_and_positivity():
    rng = np.random.default_rng(7)
    for n in (2, 3, 5):
        xi = np.concatenate([[-rng.uniform(0.1, 2.0)], rng.uniform(-2, 2, n - 1)])
        eta = np.concatenate([[-rng.uniform(0.1, 2.0)], rng.uniform(-2, 2, n - 1)])
        a = halfspace_green(n, xi, eta)
        b = halfspace_green(n, eta, xi)
        assert a > 0.0
        assert a == pytest.approx(b, rel=1e-14)


def test_halfspace_boundary_vanishing_order():
    # G((-t, 0), eta) / t^2 stabilises as t drops
    eta = (-1.0, 0.5)
    qs = [halfspace_green(2, (-t, 0.0), eta) / t**2 for t in (1e-2, 1e-3, 1e-4)]
    d1 = abs(qs[1] / qs[0] - 1.0)
    d2 = abs(qs[2] / qs[1] - 1.0)
    assert qs[-1] > 0.0
    assert d2 < d1 < 0.2


def test_halfspace_errors():
    with pytest.raises(ValueError):
        halfspace_green(2, (0.5, 0.0), (-1.0, 0.0))
    with pytest.raises(ValueError):
        halfspace_green(4, (-1.0, 0, 0, 0), (-1.0, 0, 0, 0))
    with pytest.raises(ValueError):
        halfspace_green(2, (-1.0, np.nan), (-1.0, 0.0))


# ---------------------------------------------------------------------------
# ball kernel

def test_ball_pinned_examples():
    got = ball_green(2, (0.0, 0.0), (0.5, 0.0))
    want = (1.0 / (8.0 * math.pi)) * 0.25 * quad_boggio(2, 2.0)
    assert got == pytest.approx(want, rel=1e-12)
    assert ball_green(2, (0.0, 0.0), (0.0, 0.0)) == pytest.approx(
        1.0 / (16.0 * math.pi), rel=1e-14)
    assert ball_green(2, (0.3, 0.2), (1.0, 0.0)) == 0.0


def test_ball_symmetry_positivity_vectorized():
    rng = np.random.default_rng(11)
    for n in (2, 3, 5):
        x = rng.uniform(-1.0, 1.0, (50, n))
        y = rng.uniform(-1.0, 1.0, (50, n))
        x *= 0.8 / np.maximum(1.0, np.linalg.norm(x, axis=1, keepdims=True))
        y *= 0.8 / np.maximum(1.0, np.linalg.norm(y, axis=1, keepdims=True))
        a = ball_green(n, x, y)
        b = ball_green(n, y, x)
        assert np.all(a > 0.0)
        np.testing.assert_allclose(a, b, rtol=1e-14)


def test_ball_radius_scaling():
    rng = np.random.default_rng(3)
    for n in (2, 3, 5):
        x = rng.uniform(-0.4, 0.4, n)
        y = rng.uniform(-0.4, 0.4, n)
        R = 2.5
        big = ball_green(n, R * x, R * y, radius=R)
        small = ball_green(n, x, y, radius=1.0)
        assert big == pytest.approx(R ** (4 - n) * small, rel=1e-13)


def test_ball_errors():
    with pytest.raises(ValueError):
        ball_green(2, (1.5, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        ball_green(5, (0.1,) * 5, (0.1,) * 5)


# ---------------------------------------------------------------------------
# comparison kernel

def test_comparison_pinned_examples():
    assert comparison_kernel(5, 1.0, 1.0, 2.0) == pytest.approx(1.0 / 32.0, rel=1e-15)
    assert comparison_kernel(4, 1.0, 1.0, 1.0) == pytest.approx(math.log(2.0), rel=1e-15)
    d = 0.37
    assert comparison_kernel(2, d, d, 0.0) == pytest.approx(d * d, rel=1e-15)
    assert comparison_kernel(3, 0.0, 1.3, 0.7) == 0.0
    assert comparison_kernel(5, 1.0, 1.0, 0.0) == math.inf
    assert comparison_kernel(4, 1.0, 1.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        comparison_kernel(3, -0.1, 1.0, 1.0)


def test_comparison_symmetry_homogeneity_monotone():
    rng = np.random.default_rng(5)
    dx = rng.uniform(0.01, 2.0, 300)
    dy = rng.uniform(0.01, 2.0, 300)
    r = rng.uniform(0.01, 3.0, 300)
    for n in (2, 3, 5, 6):
        np.testing.assert_allclose(comparison_kernel(n, dx, dy, r),
                                   comparison_kernel(n, dy, dx, r), rtol=1e-14)
        for lam in (0.5, 2.0, 10.0):
            np.testing.assert_allclose(
                comparison_kernel(n, lam * dx, lam * dy, lam * r),
                lam ** (4 - n) * comparison_kernel(n, dx, dy, r), rtol=1e-12)
    for n in (2, 3, 4, 5):
        base = comparison_kernel(n, dx, dy, r)
        assert np.all(comparison_kernel(n, dx * 1.3, dy, r) >= base * (1 - 1e-14))
        assert np.all(comparison_kernel(n, dx, dy * 1.7, r) >= base * (1 - 1e-14))
        assert np.all(comparison_kernel(n, dx, dy, r * 1.4) <= base * (1 + 1e-14))


def test_casewise_matches_min_form():
    rng = np.random.default_rng(99)
    dx = rng.uniform(0.0, 2.0, 2000)
    dy = rng.uniform(0.0, 2.0, 2000)
    r = rng.uniform(0.0, 3.0, 2000)
    # salt in exact case-boundary and degenerate inputs
    dx[:50] = dy[:50]
    r[:50] = dx[:50]            # dx*dy == r^2 exactly
    r[50:60] = 0.0
    dx[60:70] = 0.0
    for n in (2, 3, 4, 5, 7):
        a = comparison_kernel(n, dx, dy, r)
        b = comparison_kernel_casewise(n, dx, dy, r)
        both_inf = np.isinf(a) & np.isinf(b)
        np.testing.assert_allclose(a[~both_inf], b[~both_inf], rtol=1e-14, atol=0.0)
        assert np.array_equal(np.isinf(a), np.isinf(b))


def test_casewise_case_boundary_continuity():
    # approach dx*dy = r^2 from both sides
    for n in (2, 3, 5):
        lo = comparison_kernel_casewise(n, 1.0, 1.0, 1.0 + 1e-12)
        hi = comparison_kernel_casewise(n, 1.0, 1.0, 1.0 - 1e-12)
        assert lo == pytest.approx(hi, rel=1e-9)
