import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import poly_to_sympy, symbols
from superform.corpus import random_form, random_polynomial
from superform.errors import DomainError, QuadratureError
from superform.fields import ChartDomain, PolyField
from superform.forms import MatrixForm, exterior_derivative
from superform.integrate import (
    BatterySpec,
    Bump,
    adaptive_cubature,
    check_ded_props,
    integrate_ball,
    integrate_box,
    make_bump,
    measure_profile_constant,
    smoothstep,
    verify_ded,
)
from superform.literals import parse_form

UNIT = ChartDomain.cube(2, 0.0, 1.0)
D2 = ChartDomain.cube(2)


def test_box_integral_examples():
    assert integrate_box(parse_form("[[d(1,2)]]", UNIT))[0, 0] == pytest.approx(1, abs=1e-14)
    assert integrate_box(parse_form("[[x1 d(1,2)]]", UNIT))[0, 0] == pytest.approx(0.5, abs=1e-14)
    got = integrate_box(parse_form("[[d(1,2), 0], [0, x1 d(1,2)]]", UNIT))
    assert np.allclose(got, [[1, 0], [0, 0.5]], atol=1e-14, rtol=0)


def test_box_integral_errors():
    with pytest.raises(DomainError):
        integrate_box(parse_form("[[d(1)]]", UNIT))
    with pytest.raises(DomainError):
        integrate_box(parse_form("[[d(1,2)]]", UNIT), ((0, 2), (0, 1)))


def test_budget_exhaustion_carries_estimate():
    def spiky(X):
        return 1.0 / np.sqrt(np.abs(X[0] - 1 / 3) + 1e-14)[None]

    with pytest.raises(QuadratureError) as exc:
        adaptive_cubature(spiky, [0.0], [1.0], tol=1e-14, max_panels=50)
    assert np.isfinite(exc.value.estimate).all() and exc.value.error > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_gauss_rule_exact_on_polynomials(seed, M):
    rng = np.random.default_rng(seed)
    p = random_polynomial(rng, M, max_degree=13, max_terms=4)
    p = p.__class__(M, {e: c for e, c in p.terms.items() if max(e) <= 13})
    dom = ChartDomain.cube(M, -1.0, 2.0)
    xs = symbols(M)
    exact = poly_to_sympy(p, xs)
    for x in xs:
        exact = sp.integrate(exact, (x, -1, 2))
    f = PolyField(dom, p)
    est, _ = adaptive_cubature(lambda X: f.values(X)[None], dom.lo, dom.hi, tol=1e300, initial=1)
    assert abs(float(est[0]) - float(exact)) <= 1e-12 * max(1.0, abs(float(exact)))


def test_ball_integral_volume_and_moment():
    for M, vol in [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)]:
        est, err = integrate_ball(lambda X: np.ones((1,) + X.shape[1:]), np.zeros(M), 1.0, breaks=(0.5,))
        assert est[0] == pytest.approx(vol, rel=1e-12)
    est, _ = integrate_ball(lambda X: (X[0] ** 2)[None], (0.2, 0.1), 0.5)
    assert est[0] == pytest.approx(math.pi * 0.5**2 * 0.2**2 + math.pi * 0.5**4 / 4, rel=1e-12)


def test_bump_examples():
    b = Bump((0.1, -0.2), 0.4, 0.5)
    assert b.value(np.array([0.1, -0.2])) == 1.0
    assert b.value(np.array([0.5, -0.2])) == 0.0
    assert b.value(np.array([0.1, 0.3])) == 0.0
    K = measure_profile_constant()
    assert K == pytest.approx(2.0, abs=1e-6)


def test_bump_invariants_on_grid():
    rng = np.random.default_rng(11)
    for rho in (0.3, 0.5, 0.8):
        b = Bump((0.0, 0.0), 0.7, rho)
        g = np.linspace(-1, 1, 100)
        X = np.stack(np.meshgrid(g, g, indexing="ij")).reshape(2, -1)
        X = X + 1e-3 * rng.normal(size=X.shape)
        s = np.linalg.norm(X, axis=0)
        v, grad = b.value(X), b.gradient(X)
        assert np.all(v[s >= 0.7] == 0)
        assert np.all(v[s <= 0.7 * rho] == 1)
        assert np.all((0 <= v) & (v <= 1))
        assert np.max(np.abs(grad)) * 0.7 * (1 - rho) <= 2.0 + 1e-9


def test_bump_gradient_matches_finite_differences():
    b = Bump((0.0, 0.0, 0.0), 0.5, 0.5)
    rng = np.random.default_rng(2)
    X = rng.uniform(-0.5, 0.5, (3, 200))
    h = 1e-6
    for i in range(3):
        e = np.zeros((3, 1))
        e[i] = h
        fd = (b.value(X + e) - b.value(X - e)) / (2 * h)
        assert np.max(np.abs(fd - b.gradient(X)[i])) < 1e-5


def test_bump_field_must_fit():
    with pytest.raises(DomainError):
        Bump((0.9, 0.0), 0.2).field(D2)
    w = make_bump(D2, (0.0, 0.0), 0.5, beta=(1,), L=2, entry=(1, 2))
    assert w.degree == 1 and not w.entry(1, 2) == {} and w.entry(1, 1) == {}


def test_smoothstep_endpoints():
    assert smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])).tolist() == [0, 0, 0.5, 1, 1]


def test_verify_ded_constant_form():
    lam = parse_form("[[3 d(1), 0], [-1 d(2), 2 d(1)]]", D2)
    w = verify_ded(lam, MatrixForm.zero(D2, 2, 2))
    assert w.passed and w.max_residual < 1e-9
    assert len(w.tests) == 4 * 2 * 4  # centers x radii x entries, one beta


def test_verify_ded_kink():
    w = verify_ded(parse_form("[[abs(x1) d(2)]]", D2), parse_form("[[sign(x1) d(1,2)]]", D2))
    assert w.passed and w.max_residual < 1e-6
    assert w.verdict == "consistent with DED"
    wrong = verify_ded(parse_form("[[abs(x1) d(2)]]", D2), parse_form("[[d(1,2)]]", D2))
    assert not wrong.passed


def test_verify_ded_degree_mismatch():
    with pytest.raises(DomainError):
        verify_ded(parse_form("[[x1 d(1)]]", D2), parse_form("[[x1 d(1)]]", D2))


@pytest.mark.parametrize("eps", [0.01, 0.1])
def test_negative_control_detects_perturbation(eps):
    lam = parse_form("[[x1^2*x2 d(2), x2 d(1)], [0, x1 d(1)]]", D2)
    battery = BatterySpec()
    r = battery.radii(D2)[0]
    center = battery.centers(D2, r)[0]
    bump = make_bump(D2, center, r, battery.rho, (1, 2), L=2, entry=(1, 2))
    w = verify_ded(lam, exterior_derivative(lam) + bump.scale(eps), battery)
    plateau = math.pi * (battery.rho * r) ** 2
    assert w.max_residual > eps / 2 * plateau
    assert not w.passed


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_smooth_polynomial_forms_pass(seed):
    rng = np.random.default_rng(seed)
    lam = random_form(rng, D2, 2, int(rng.integers(0, 2)))
    w = verify_ded(lam, exterior_derivative(lam))
    assert w.max_residual < 1e-6 and w.quadrature_failures == 0


def test_witness_json_shape():
    w = verify_ded(parse_form("[[x1 d(2)]]", D2), parse_form("[[d(1,2)]]", D2), BatterySpec(grid=1))
    doc = w.to_json()
    assert doc["passed"] and doc["degree"] == 1 and len(doc["tests"]) == 2


def test_ded_properties():
    rep = check_ded_props(seed=1, count=2, dims=(2,), L=1)
    for key in ("restriction", "linearity", "nilpotence", "pullback"):
        assert rep[key].get("exact", True), key
        assert rep[key]["max_deviation"] < 1e-6, key
    assert rep["smooth_case"]["max_deviation"] < 1e-6
