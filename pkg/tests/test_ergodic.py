import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from circledist import circlemaps as cm
from circledist import ergodic as eg
from circledist.angles import approximation_error


def dirichlet_cos(rho, n, x):
    """sum_{j<n} cos 2pi(x + j rho) as a geometric sum."""
    z = np.exp(2j * np.pi * rho)
    return np.real(np.exp(2j * np.pi * np.asarray(x)) * (z ** n - 1) / (z - 1))


# -- test functions --------------------------------------------------------------------

@pytest.mark.parametrize("m,kind,amp", [(1, "cos", 1.0), (3, "sin", 0.5), (2, "cos", -2.0)])
def test_fourier_mode_variation_and_derivative(m, kind, amp):
    u = eg.fourier_mode(m, kind, amp)
    x = np.arange(1 << 16) / (1 << 16)
    v = u(np.append(x, 1.0))
    assert u.var == pytest.approx(np.abs(np.diff(v)).sum(), rel=1e-6)
    h = 1e-6
    assert np.max(np.abs((u(x + h) - u(x - h)) / (2 * h) - u.d(x))) < 1e-6 * abs(amp) * m ** 2 * 40


def test_fourier_mode_rejects_unknown_kind():
    with pytest.raises(ValueError):
        eg.fourier_mode(1, "tan")


def test_sum_and_scale():
    u = eg.fourier_mode(1) + eg.fourier_mode(2, "sin").scale(0.5)
    x = np.linspace(0, 1, 11)
    assert np.allclose(u(x), np.cos(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x))
    assert np.allclose(u.d(x), -2 * np.pi * np.sin(2 * np.pi * x) + 2 * np.pi * np.cos(4 * np.pi * x))
    assert u.var == pytest.approx(4 + 4)


def test_gap_bump_shape(dmap):
    u = eg.gap_bump(dmap, 0)
    x0 = dmap.x0
    assert float(u.d(x0)) == pytest.approx(5.0, abs=1e-15)  # default slope S = 5
    assert float(u(x0)) == 0.0
    a, b = dmap.gap(0)
    outside = np.linspace(b, a + 1, 5001) % 1.0
    assert np.all(u(outside) == 0)
    s = np.linspace(a, b, 20001)
    assert np.max(np.abs(u(s))) <= u.sup + 1e-15
    assert np.max(np.abs(u(s))) == pytest.approx(u.sup, rel=1e-6)
    assert np.abs(np.diff(u(s))).sum() == pytest.approx(u.var, rel=1e-6)
    h = 1e-7
    assert np.max(np.abs((u(s + h) - u(s - h)) / (2 * h) - u.d(s))) < 1e-5


def test_gap_plateau_integral_against_quadrature(dmap):
    v = eg.gap_plateau(dmap, 0, width=0.4, height=1.0)
    a, b = dmap.gap(0)
    c, r = dmap.x0, 0.4 * (b - a)
    val, _ = quad(lambda x: float(v(x)), c - r, c + r, epsabs=1e-15, epsrel=1e-13)
    assert v.integral == pytest.approx(val, abs=1e-13)
    s = np.linspace(a, b, 100001)
    assert np.max(np.abs(v.d(s))) <= v.sup_deriv + 1e-9


def test_bump_width_validated(dmap):
    with pytest.raises(ValueError):
        eg.gap_bump(dmap, 0, width=0.6)


def test_compose_derivative(arnold_golden):
    u = eg.compose(eg.fourier_mode(2), arnold_golden)
    x = np.linspace(0, 1, 51)
    h = 1e-6
    assert np.max(np.abs((u(x + h) - u(x - h)) / (2 * h) - u.d(x))) < 1e-6


# -- Birkhoff sums -------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 13, 89, 1000])
def test_rotation_birkhoff_dirichlet(golden, n):
    f = cm.rotation(golden)
    x = np.linspace(0, 1, 37)
    got = eg.birkhoff_sum(f, eg.fourier_mode(1), n, x)
    assert np.max(np.abs(got - dirichlet_cos(float(golden), n, x))) < 1e-11


def test_constant_and_single_step(arnold_golden):
    assert eg.birkhoff_sum(arnold_golden, eg.constant(1.0), 144, 0.3) == pytest.approx(144, abs=1e-12)
    u = eg.fourier_mode(3, "sin")
    assert eg.birkhoff_sum(arnold_golden, u, 1, 0.3) == float(u(0.3))
    with pytest.raises(ValueError):
        eg.birkhoff_sum(arnold_golden, u, 0, 0.3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 80), st.integers(1, 80), st.floats(0, 1, exclude_max=True))
def test_cocycle_identity(m, n, x):
    f = cm.arnold(0.61, 0.7)
    u = eg.fourier_mode(1) + eg.fourier_mode(2, "sin")
    y, _ = cm.iterate(f, m, x)
    lhs = eg.birkhoff_sum(f, u, m + n, x)
    rhs = eg.birkhoff_sum(f, u, m, x) + eg.birkhoff_sum(f, u, n, y)
    assert abs(lhs - rhs) < 1e-9


def test_checkpoints_match_individual_sums(arnold_golden):
    u = eg.fourier_mode(1)
    x = np.linspace(0, 1, 8, endpoint=False)
    cps = eg.birkhoff_checkpoints(arnold_golden, u, [5, 8, 13], x)
    for n, s in zip([5, 8, 13], cps):
        assert np.max(np.abs(s - eg.birkhoff_sum(arnold_golden, u, n, x))) < 1e-13


# -- invariant measure ------------------------------------------------------------------

def test_mu_mean_rotation(golden):
    f = cm.rotation(golden)
    for k in (5, 10, 15):
        val, err = eg.mu_mean(f, eg.fourier_mode(1), k)
        assert err == 4 / golden.q(k)
        assert abs(val) <= err
    val, err = eg.mu_mean(f, eg.constant(2.5), 8)
    assert val == pytest.approx(2.5, abs=1e-14) and err == 0


def test_mu_of_log_derivative_vanishes(arnold_golden, golden):
    u = eg.log_deriv(arnold_golden)
    prev = math.inf
    for k in (6, 9, 12, 15):
        val, err = eg.mu_mean(arnold_golden, u, k)
        assert abs(val) <= err + 1e-12
        assert abs(val) < prev
        prev = abs(val)


def test_mu_mean_needs_variation(arnold_golden):
    u = eg.TestFunction(lambda x: np.cos(2 * np.pi * x))
    with pytest.raises(eg.NoVarBound):
        eg.mu_mean(arnold_golden, u, 5)


def test_corollary_rotation_matches_closed_form(golden):
    f = cm.rotation(golden)
    reps = eg.corollary_experiment(f, eg.fourier_mode(1), range(4, 10), grid=256)
    x = eg.uniform_grid(256)
    for r in reps:
        oracle = np.max(np.abs(dirichlet_cos(float(golden), r.q, x) - r.q * r.mu_estimate))
        assert r.sup_deviation == pytest.approx(oracle, abs=1e-11)


def test_corollary_zero_function(arnold_golden):
    zero = eg.constant(0.0)
    reps = eg.corollary_experiment(arnold_golden, zero, range(4, 8), grid=64)
    assert all(r.sup_deviation == 0 for r in reps)


def test_corollary_decay_and_envelope(arnold_golden):
    reps = eg.corollary_experiment(arnold_golden, eg.fourier_mode(1), range(4, 13), grid=512)
    devs = [r.sup_deviation for r in reps]
    assert devs[-1] < 0.2 * max(devs)
    assert all(r.sup_deviation <= r.envelope for r in reps)
    assert all(r.grid_size == 512 for r in reps)


def test_corollary_requires_variation_bound(dmap_f):
    with pytest.raises(ValueError):
        eg.corollary_experiment(dmap_f, eg.fourier_mode(1), range(4, 6))


# -- Herman ----------------------------------------------------------------------------

def test_herman_rotation(golden):
    rows = eg.herman_check(cm.rotation(golden), range(3, 12), grid=64)
    for r in rows:
        assert r.c0_dev == pytest.approx(approximation_error(golden, r.k), abs=1e-12)
        assert r.c1_dev == 0


def test_herman_arnold(arnold_golden):
    V = arnold_golden.V
    assert V == pytest.approx(2 * math.log(3), abs=1e-15)
    rows = eg.herman_check(arnold_golden, range(4, 13), grid=512)
    assert rows[-1].c1_dev < rows[0].c1_dev
    for r in rows:
        assert r.c1_dev <= math.expm1(V)
        assert r.max_log_deriv <= V + 1e-6  # Denjoy inequality
