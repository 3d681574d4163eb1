# tests/test_logsupport.py
import numpy as np
import pytest

from services.errors import BadParameters, DimensionMismatch, NotInPolytope, NotLowerSet, ZeroCoordinate
from services.logsupport import (
    CPoint, ConstantFunction, HSFunction, PolyLogFunction, ScaledFunction, TropicalFunction, hs,
    hs_batch, hs_descent, hs_descent_values, hs_interior, hs_lower_formula, hs_poly, is_diverging,
    log_dot, multiply, growth_constants, polylog_eval, torus_envelope_check, tropical_envelope,
    tropical_eval,
)
from services.polytope import box, extreme_points, simplex


# ------------------- points -------------------
def test_cpoint_wraps_argument_and_marks_zeros():
    z = CPoint.from_complex([0.0, -2.0])
    assert z.zeros.tolist() == [0]
    assert z.logmod[1] == pytest.approx(np.log(2.0))
    assert z.arg[1] == pytest.approx(np.pi)
    assert CPoint([0.0], [-np.pi / 2]).arg[0] == pytest.approx(1.5 * np.pi)


@pytest.mark.parametrize("logmod", [[np.nan, 0.0], [np.inf, 0.0]])
def test_cpoint_rejects_bad_log_modulus(logmod):
    with pytest.raises(BadParameters):
        CPoint(logmod, [0.0, 0.0])


def test_cpoint_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        CPoint([0.0, 1.0], [0.0])


def test_multiply_adds_logs():
    z = CPoint.from_complex([2.0, 1j])
    w = CPoint.from_complex([3.0, 1j])
    assert np.allclose(multiply(z, w).to_complex(), [6.0, -1.0])


def test_log_dot_zero_times_minus_infinity():
    exps = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    out = log_dot(exps, np.array([[np.log(3.0), -np.inf]]))
    assert out[0, 0] == 0.0
    assert out[0, 1] == pytest.approx(np.log(3.0))
    assert np.isneginf(out[0, 2])


# ------------------- H_S -------------------
def test_hs_simplex_value(sigma2):
    assert hs(sigma2, CPoint.from_modulus([10.0, 0.1])) == pytest.approx(np.log(10.0), abs=1e-12)


def test_hs_on_hyperplane_uses_face(ex12):
    z = CPoint([np.log(10.0), -np.inf], [0.0, 0.0])
    assert hs(ex12, z) == pytest.approx(np.log(10.0), abs=1e-12)
    assert hs(ex12, CPoint([-2.0, -np.inf], [0.0, 0.0])) == 0.0


def test_hs_at_origin_is_zero(ex12):
    assert hs(ex12, CPoint.from_complex([0.0, 0.0])) == 0.0


def test_hs_interior_rejects_zero_coordinates(sigma2):
    with pytest.raises(ZeroCoordinate):
        hs_interior(sigma2, CPoint.from_complex([0.0, 1.0]))


@pytest.mark.parametrize("modulus", [[10.0, 0.0], [0.0, 3.0], [0.5, 0.0], [100.0, 0.0]])
def test_hyperplane_values_match_descent_oracle(ex12, modulus):
    z = CPoint.from_modulus(modulus)
    assert hs_descent(ex12, z) == pytest.approx(hs(ex12, z), abs=1e-4)


def test_descent_values_settle(ex12):
    z = CPoint.from_modulus([10.0, 0.0])
    values = hs_descent_values(ex12, z)
    assert values.shape == (3,)
    assert values[-1] == pytest.approx(np.log(10.0))


@pytest.mark.parametrize("P", [simplex(2), box(2), simplex(3)], ids=["simplex2", "box2", "simplex3"])
def test_hs_equals_lower_formula_on_lower_sets(P, rng):
    logmod = rng.uniform(-5.0, 5.0, size=(1000, P.n))
    arg = rng.uniform(0.0, 2 * np.pi, size=(1000, P.n))
    for lm, a in zip(logmod[:200], arg[:200]):
        z = CPoint(lm, a)
        assert hs(P, z) == pytest.approx(hs_lower_formula(P, z), abs=1e-9)
    assert np.allclose(hs_batch(P, logmod), [support_plus(P, lm) for lm in logmod], atol=1e-9)


def support_plus(P, logmod):
    return hs_lower_formula(P, CPoint(logmod, None))


def test_lower_formula_rejects_non_lower(ex12):
    with pytest.raises(NotLowerSet):
        hs_lower_formula(ex12, CPoint.ones(2))


@pytest.mark.parametrize("name", ["simplex", "ex12"])
def test_hs_submultiplicative(name, ex12, rng):
    P = simplex(2) if name == "simplex" else ex12
    lz = rng.uniform(-6.0, 6.0, size=(1000, 2))
    lw = rng.uniform(-6.0, 6.0, size=(1000, 2))
    assert np.all(hs_batch(P, lz + lw) <= hs_batch(P, lz) + hs_batch(P, lw) + 1e-12)


@pytest.mark.parametrize("name", ["simplex", "box", "ex12"])
def test_tropical_envelope_reproduces_hs(name, ex12, rng):
    P = {"simplex": simplex(2), "box": box(2), "ex12": ex12}[name]
    env = tropical_envelope(P)
    logmod = rng.uniform(-8.0, 8.0, size=(1000, 2))
    arg = np.zeros_like(logmod)
    assert np.max(np.abs(env.batch(logmod, arg) - hs_batch(P, logmod))) <= 1e-12
    z = CPoint(logmod[0], arg[0])
    assert tropical_eval(env, z) == pytest.approx(hs_interior(P, z), abs=1e-12)


def test_torus_envelope_check(ex12, sigma2):
    for P in (ex12, sigma2):
        report = torus_envelope_check(P, samples=500)
        assert report.passed
        assert report.columns == ["check", "value"]


def test_hs_poly_counts_extreme_points(ex12):
    assert hs_poly(extreme_points(ex12), CPoint.ones(2)) == pytest.approx(np.log(4.0), abs=1e-12)
    assert hs_poly(extreme_points(ex12), CPoint.from_complex([0.0, 0.0])) == pytest.approx(0.0)


# ------------------- test families -------------------
def test_hs_function_growth(ex12):
    u = HSFunction(ex12)
    assert (u.growth.upper_const, u.growth.lower_const) == (0.0, 0.0)
    with pytest.raises(DimensionMismatch):
        u(CPoint.ones(3))


def test_tropical_function(sigma2):
    u = TropicalFunction([([0.0, 0.0], 0.0), ([1.0, 0.0], -0.5)], polytope=sigma2)
    assert u(CPoint.from_modulus([np.e ** 2, 1.0])) == pytest.approx(1.5)
    assert u(CPoint.from_modulus([0.0, 5.0])) == 0.0
    assert u.growth.upper_const == 0.0


def test_tropical_function_slope_outside_polytope(sigma2):
    with pytest.raises(NotInPolytope):
        TropicalFunction([([1.0, 1.0], 0.0)], polytope=sigma2)


def test_polylog_function():
    u = PolyLogFunction([([0, 0], 1.0), ([1, 0], 1.0)])
    assert polylog_eval(u, CPoint.from_complex([1.0, 7.0])) == pytest.approx(np.log(2.0))
    v = PolyLogFunction([([1, 0], 1.0)])
    assert np.isneginf(v(CPoint.from_complex([0.0, 1.0])))


def test_polylog_function_is_stable_at_large_modulus():
    u = PolyLogFunction([([0, 0], 1.0), ([3, 0], 1.0)], m=3)
    z = CPoint([300.0, 0.0], [0.0, 0.0])
    assert u(z) == pytest.approx(300.0, rel=1e-12)


def test_polylog_growth_constant(sigma2):
    u = PolyLogFunction([([0, 0], 2.0), ([1, 1], 1j)], m=2, polytope=sigma2)
    assert u.growth.upper_const == pytest.approx(np.log(3.0) / 2)
    with pytest.raises(NotInPolytope):
        PolyLogFunction([([1, 1], 1.0)], m=1, polytope=sigma2)


def test_constant_function_lower_bound_only_for_trivial_set(sigma2):
    assert ConstantFunction(1.0, 2, sigma2).growth.lower_const is None
    assert ConstantFunction(1.0, 2).growth.lower_const == 1.0


def test_scaled_function(sigma2):
    u = ScaledFunction(HSFunction(sigma2), 2.0)
    assert u(CPoint.from_modulus([np.e, 1.0])) == pytest.approx(2.0)
    with pytest.raises(BadParameters):
        ScaledFunction(u, 0.0)


# ------------------- growth constants -------------------
def test_is_diverging():
    assert is_diverging([1.0, 2.0, 3.0, 4.0])
    assert not is_diverging([1.0, 1.0, 1.0])
    assert not is_diverging([1.0, 2.0, 2.1])
    assert not is_diverging([1.0])


def test_growth_constants_of_hs(ex12):
    report = growth_constants(HSFunction(ex12), ex12, [1e1, 1e2, 1e3])
    assert report.columns == ["radius", "max_gap", "min_gap"]
    assert report.passed
    assert report.meta["upper_const"] == pytest.approx(0.0, abs=1e-12)
    assert report.meta["lower_const"] == pytest.approx(0.0, abs=1e-12)


def test_growth_constants_of_tropical_fixture(sigma2):
    u = TropicalFunction([([0.0, 0.0], 0.0), ([1.0, 0.0], -0.5), ([0.0, 1.0], -1.0)], polytope=sigma2)
    report = growth_constants(u, sigma2, [1e1, 1e2, 1e3, 1e4])
    assert report.meta["upper_const"] <= u.growth.upper_const + 1e-12
    assert not report.meta["diverging"]


def test_growth_constants_flag_divergence(sigma2):
    report = growth_constants(ScaledFunction(HSFunction(sigma2), 2.0), sigma2, [1e1, 1e2, 1e3, 1e4])
    assert report.meta["diverging"]
    assert not report.passed
    assert np.allclose(report.frame["max_gap"], np.log(report.frame["radius"]))


def test_growth_constants_rejects_bad_radii(sigma2):
    with pytest.raises(BadParameters):
        growth_constants(HSFunction(sigma2), sigma2, [10.0, 5.0])
    with pytest.raises(DimensionMismatch):
        growth_constants(HSFunction(simplex(3)), sigma2, [10.0])
