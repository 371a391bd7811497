import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from circledist import circlemaps as cm
from circledist.angles import IrrationalAngle


def brackets(cert, ang):
    with mp.workprec(400):
        v = ang.value_at(400)
        return mp.mpf(cert.lower.numerator) / cert.lower.denominator < v < \
            mp.mpf(cert.upper.numerator) / cert.upper.denominator


def make_maps(golden):
    return {
        "rotation": cm.rotation(golden),
        "arnold": cm.arnold(0.61, 0.7, angle=golden),
        "conjugated": cm.conjugated_rotation(golden, [(1, 0.3, 0.1), (2, 0.15, 0.7)]),
    }


# -- evaluation ------------------------------------------------------------------------

def test_rotation_is_translation(golden):
    f = cm.rotation(golden)
    x = np.linspace(-3, 3, 11)
    assert np.array_equal(f(x), x + float(golden))


def test_arnold_degenerates_and_basic_values():
    x = np.linspace(0, 1, 17)
    assert np.array_equal(cm.arnold(0.3, 0.0)(x), x + 0.3)
    assert cm.arnold(0.25, 0.5)(0.0) == 0.25


@pytest.mark.parametrize("eps", [-0.1, 1.0, 1.5])
def test_arnold_rejects_bad_coupling(eps):
    with pytest.raises(ValueError):
        cm.arnold(0.2, eps)


def test_conjugacy_requires_small_amplitudes(golden):
    with pytest.raises(ValueError):
        cm.conjugated_rotation(golden, [(1, 0.7, 0.0), (2, 0.4, 0.0)])


@pytest.mark.parametrize("name", ["rotation", "arnold", "conjugated"])
def test_equivariance_and_monotonicity(golden, name):
    f = make_maps(golden)[name]
    rng = np.random.default_rng(7)
    x = rng.uniform(-5, 5, 256)
    assert np.max(np.abs(f(x + 1) - f(x) - 1)) < 1e-12
    g = np.arange(4096) / 4096
    assert np.all(np.diff(f(g)) > 0)
    assert np.all(f.deriv(g) > 0)


@pytest.mark.parametrize("name", ["arnold", "conjugated"])
def test_derivative_matches_finite_differences(golden, name):
    f = make_maps(golden)[name]
    x = np.linspace(0, 1, 97)
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2 * h)
    assert np.max(np.abs(fd - f.deriv(x))) < 1e-7


@pytest.mark.parametrize("name", ["rotation", "arnold", "conjugated"])
def test_inverse_roundtrip(golden, name):
    f = make_maps(golden)[name]
    x = np.linspace(-2, 2, 301)
    assert np.max(np.abs(f.inv(f(x)) - x)) < 1e-12
    assert np.max(np.abs(cm.invert_lift(f, f(x)) - x)) < 1e-12


def test_conjugated_is_conjugate_to_rotation(golden):
    f = make_maps(golden)["conjugated"]
    c = f.conjugacy
    y = np.linspace(0, 1, 257)
    assert np.max(np.abs(f(c.h(y)) - c.h(y + float(golden)))) < 1e-13
    assert np.max(np.abs(c.h(c.hinv(y)) - y)) < 1e-14


# -- iteration ---------------------------------------------------------------------------

def test_iterate_rotation_closed_form(golden):
    f = cm.rotation(golden)
    for n in (-13, 0, 1, 89):
        v, ld = cm.iterate(f, n, 0.25)
        assert v == pytest.approx(0.25 + n * float(golden), abs=1e-12)
        assert ld == 0


@pytest.mark.parametrize("name", ["rotation", "arnold", "conjugated"])
def test_iterate_zero_is_identity(golden, name):
    v, ld = cm.iterate(make_maps(golden)[name], 0, 0.37)
    assert v == 0.37 and ld == 0


def test_iterate_matches_direct_composition(arnold_golden, golden):
    f = arnold_golden
    q, p = golden.q(5), golden.p(5)
    assert q == 8
    x = 0.0
    logd = 0.0
    for _ in range(q):
        logd += math.log(1 + 0.5 * math.cos(2 * math.pi * x))
        x = x + f.family.a + 0.5 / (2 * math.pi) * math.sin(2 * math.pi * x)
    v, ld = cm.iterate(f, q, 0.0)
    assert v == pytest.approx(x, abs=1e-12)
    assert ld == pytest.approx(logd, abs=1e-12)
    assert abs(v - p) < 0.1


@settings(max_examples=40, deadline=None)
@given(st.integers(-40, 40), st.integers(-40, 40), st.floats(0, 1, exclude_max=True))
def test_iterate_additivity(n1, n2, x):
    f = cm.arnold(0.61, 0.7)
    y1, l1 = cm.iterate(f, n1, x)
    y2, l2 = cm.iterate(f, n2, y1)
    y, ld = cm.iterate(f, n1 + n2, x)
    assert abs(y2 - y) <= 1e-10 * max(1, abs(n1) + abs(n2))
    assert abs(l1 + l2 - ld) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0, 1, exclude_max=True))
def test_iterate_negative_inverts(n, x):
    f = cm.arnold(0.61, 0.7)
    y, _ = cm.iterate(f, n, x)
    back, _ = cm.iterate(f, -n, y)
    assert abs(back - x) < 1e-9


def test_multiprecision_agrees_with_double(arnold_golden):
    f = arnold_golden
    y_mp, ld_mp = cm.iterate_mp(f, 89, 0.1, bits=160)
    y, ld = cm.iterate(f, 89, 0.1)
    assert abs(float(y_mp) - y) < 1e-11
    assert abs(float(ld_mp) - ld) < 1e-11


# -- variation of log Df --------------------------------------------------------------------

def test_variation_rotation_zero(golden):
    assert cm.var_log_deriv(cm.rotation(golden)) == 0.0


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_arnold_variation_closed_form_vs_quadrature(eps):
    f = cm.arnold(0.3, eps)
    dlog = lambda x: abs(-2 * math.pi * eps * math.sin(2 * math.pi * x) / (1 + eps * math.cos(2 * math.pi * x)))  # noqa: E731
    oracle, _ = quad(dlog, 0, 1, points=[0.5], epsabs=1e-13, limit=200)
    assert f.V == pytest.approx(oracle, abs=1e-9)
    assert cm.var_log_deriv(f) == pytest.approx(oracle, abs=1e-6)


def test_variation_grid_refinement():
    f = cm.arnold(0.3, 0.5)
    assert abs(cm.var_log_deriv(f, 4096) - cm.var_log_deriv(f, 8192)) < 1e-6


def test_conjugated_variation(golden):
    f = make_maps(golden)["conjugated"]
    # log Df = log h'(y + rho) - log h'(y), so Var <= 2 Var(log h')
    assert cm.var_log_deriv(f) <= f.V + 1e-9


# -- rotation numbers ------------------------------------------------------------------------

def test_tune_zero_coupling_is_exact(golden):
    f = cm.tune_parameter(0.0, golden, K=18)
    assert f.family.a == float(golden)
    assert f.certificate.certified_k >= 18


def test_tuned_arnold_certificate(arnold_golden, golden):
    cert = arnold_golden.certificate
    assert cert.certified_k >= 18
    assert brackets(cert, golden)
    assert abs(cert.midpoint - float(golden)) < 1e-10


def test_tune_silver_strong_coupling(silver):
    f = cm.tune_parameter(0.9, silver, K=14)
    assert f.certificate.certified_k >= 14
    assert brackets(f.certificate, silver)


def test_tune_fails_when_target_too_shallow():
    rho = IrrationalAngle.from_name("0.6180339887498948482045868343656381177203", depth=10)
    with pytest.raises(cm.TuneFailed):
        cm.tune_parameter(0.5, rho, K=18)


def test_rotation_interval_without_target(arnold_golden, golden):
    cert = cm.rotation_interval(arnold_golden, 15)
    assert cert.certified_k == 15
    assert brackets(cert, golden)
    assert cert.width <= 1 / (golden.q(15) * golden.q(16)) + 1e-18


def test_rotation_interval_stops_on_locked_map():
    # a = 0.5, eps = 0.9 sits in the 1/2 Arnold tongue
    cert = cm.rotation_interval(cm.arnold(0.5, 0.9), 10)
    assert cert.certified_k < 10
    assert cert.lower <= 0.5 <= cert.upper


def test_displacement_sign_matches_side(arnold_golden, golden):
    x = np.linspace(0, 1, 33, endpoint=False)
    for k in range(1, 16):
        d = cm.displacement_at(arnold_golden, golden.q(k), golden.p(k), x)
        assert np.all(np.sign(d) == golden.side(k))


def test_certify_reports_depth(golden):
    cert = cm.certify(cm.rotation(golden), golden, 20)
    assert cert.certified_k == 20
    lo, hi = golden.convergent(19).fraction(), golden.convergent(20).fraction()
    assert (cert.lower, cert.upper) == (min(lo, hi), max(lo, hi))


def test_mp_rotation_uses_exact_angle(golden):
    f = cm.rotation(golden)
    y, _ = cm.iterate_mp(f, 1000, 0, bits=200)
    with mp.workprec(200):
        assert abs(y - 1000 * golden.value_at(200)) < mp.mpf(2) ** -180
