import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from superform.cartan import (
    CATALOG,
    LieGroupChart,
    agreement_scan,
    cartan_integrate,
    chart,
    develop,
    grid_points,
    holonomy,
    left_translation,
    maurer_cartan,
    mc_residual,
    mc_residual_numeric,
    pulled_back_mc,
)
from superform.errors import DomainError, SingularMatrixError, StepSizeError
from superform.fields import ChartDomain, coordinate
from superform.forms import MatrixForm, entry_max_norm, evaluate, pullback, restrict
from superform.literals import parse_form, parse_map

PLANE = ChartDomain.cube(2, -2, 2)
LINE = ChartDomain(((-2.0, 2.0),))
PHI_BAD = "[[d(1), exp(-x1) d(2) + x2 d(1)], [0, 0]]"
PHI_MC = "[[d(1), exp(-x1) d(2)], [0, 0]]"


def test_gl1_gamma():
    G = chart("gl1+")
    gamma = maurer_cartan(G)
    assert gamma == parse_form("[[1/x1 d(1)]]", G.domain)
    assert evaluate(gamma, (2.0,), [(1.0,)])[0, 0] == 0.5


def test_affine_gamma_matches_sympy():
    G = chart("affine2")
    gamma = maurer_cartan(G)
    assert gamma == parse_form("[[1/x1 d(1), 1/x1 d(2)], [0, 0]]", G.domain)
    a, b = sp.symbols("a b", positive=True)
    z = sp.Matrix([[a, b], [0, 1]])
    zi = z.inv()
    for n, var in enumerate((a, b)):
        expected = sp.simplify(zi * z.diff(var))
        got = [[gamma.coefficient(i, j, (n + 1,)) for j in (1, 2)] for i in (1, 2)]
        for i in range(2):
            for j in range(2):
                val = got[i][j].eval((2.5, -1.5))
                assert val == pytest.approx(float(expected[i, j].subs({a: 2.5, b: -1.5})), abs=1e-15)


def test_so2_gamma():
    G = chart("so2")
    gamma = maurer_cartan(G)
    X = np.linspace(-3, 3, 7)[None]
    vals = gamma.coefficient_values(X)[0]
    assert np.allclose(vals, np.array([[0, -1], [1, 0]])[..., None], atol=1e-15)
    num = maurer_cartan(G, closed_form=False).coefficient_values(X)[0]
    assert np.allclose(num, vals, atol=1e-12)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_mc_equation(name):
    G = chart(name)
    assert mc_residual(maurer_cartan(G)).is_zero()
    rng = np.random.default_rng(0)
    U = G.domain.lo[:, None] + (G.domain.hi - G.domain.lo)[:, None] * rng.random((G.dim, 100))
    assert mc_residual_numeric(G, U) < 1e-10


@pytest.mark.parametrize("name", ["affine2", "diag2+", "heisenberg", "gl1+"])
def test_left_invariance(name):
    G = chart(name)
    g = {"affine2": (1.5, 0.5), "diag2+": (1.5, 2.0), "heisenberg": (0.5, -1.0, 2.0), "gl1+": (1.5,)}[name]
    src = ChartDomain(tuple((max(lo, -2.0), min(hi, 2.0)) if lo < 0 else (lo, min(hi, 2.0))
                            for lo, hi in G.domain.box))
    T = left_translation(G, g, src)
    gamma = maurer_cartan(G)
    assert pullback(T, gamma) == restrict(gamma, src)


def test_so2_left_invariance_numeric():
    G = chart("so2")
    src = ChartDomain(((-1.0, 1.0),))
    T = left_translation(G, (0.5,), src)
    pulled = pullback(T, maurer_cartan(G))
    X = np.linspace(-1, 1, 11)[None]
    assert np.allclose(pulled.coefficient_values(X)[0], np.array([[0, -1], [1, 0]])[..., None], atol=1e-14)
    with pytest.raises(DomainError):
        left_translation(G, (3.0,), src)


def test_residual_examples():
    phi = parse_form(PHI_BAD, PLANE)
    expected = parse_form("[[0, -d(1,2)], [0, 0]]", PLANE)
    grid = grid_points(PLANE, 9)
    assert np.max(entry_max_norm(mc_residual(phi) - expected, grid)) < 1e-14
    assert mc_residual(MatrixForm.zero(PLANE, 1, 2)).is_zero()
    with pytest.raises(DomainError):
        mc_residual(parse_form("[[d(1,2)]]", PLANE))


def test_singular_chart_reports_location():
    dom = ChartDomain(((-1.0, 1.0),))
    G = LieGroupChart("bad", 1, dom, [[coordinate(dom, 1)]])
    with pytest.raises(SingularMatrixError) as exc:
        G.check_invertible(np.array([[0.0]]))
    assert exc.value.location is not None


def test_exponential_development():
    for c in (0.7, -1.3):
        phi = parse_form(f"[[{c} d(1)]]", LINE)
        for x in (0.5, 1.0, -1.5):
            f = develop(phi, [0.0], [x])
            assert abs(f[0, 0] - math.exp(c * x)) < 1e-8
        got = pulled_back_mc(phi, [0.0], [0.8])
        assert abs(got[0, 0, 0] - c) < 1e-6


def test_zero_form_develops_to_identity():
    f = cartan_integrate(MatrixForm.zero(PLANE, 1, 3), [(0, 0), (1, 1), (-1, 0.5)])
    assert np.array_equal(f, np.eye(3))


def test_holonomy():
    square = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert holonomy(parse_form(PHI_MC, PLANE), square) < 1e-6
    assert holonomy(parse_form(PHI_BAD, PLANE), square) > 1e-3


def test_pulled_back_form_recovers_mc_phi():
    phi = parse_form(PHI_MC, PLANE)
    for P in [(0.4, -0.3), (-1.0, 1.0), (1.5, 0.2)]:
        got = pulled_back_mc(phi, [0.0, 0.0], P)
        assert np.max(np.abs(got - phi.coefficient_values(np.array(P)))) < 1e-6


def test_uniqueness_up_to_left_factor():
    phi = parse_form(PHI_BAD, PLANE)
    a = np.array([[0.5, -2.0], [0.0, 3.0]])
    path = [(0, 0), (1, 1), (-1, 0.5)]
    _, t1 = cartan_integrate(phi, path, trajectory=True)
    _, t2 = cartan_integrate(phi, path, start=a, trajectory=True)
    for g1, g2 in zip(t1, t2):
        assert np.max(np.abs(g2 @ np.linalg.inv(g1) - a)) < 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_path_independence_for_mc_forms(x, y, mx, my):
    phi = parse_form(PHI_MC, PLANE)
    step = 1e-2
    direct = [(0, 0), (x, y)]
    bent = [(0, 0), (mx, my), (x, y)]
    length = math.hypot(mx, my) + math.hypot(x - mx, y - my)
    f1, f2 = cartan_integrate(phi, direct, step), cartan_integrate(phi, bent, step)
    assert np.max(np.abs(f1 - f2)) <= 10 * step**4 * max(length, 1.0)


def test_step_halving():
    phi = parse_form("[[3 d(1)]]", LINE)
    f = cartan_integrate(phi, [[0.0], [1.0]], step=0.5, tol=1e-9, max_halvings=12)
    assert abs(f[0, 0] - math.exp(3)) < 1e-7
    with pytest.raises(StepSizeError):
        cartan_integrate(phi, [[0.0], [1.0]], step=0.5, tol=1e-14, max_halvings=2)
    with pytest.raises(DomainError):
        cartan_integrate(parse_form("[[d(1,2)]]", PLANE), [(0, 0), (1, 1)])


def test_agreement_examples():
    G = chart("affine2")
    f = parse_map(["exp(x1)", "x2"], PLANE, G.domain)
    grid = grid_points(PLANE, 21)
    exact = pullback(f, maurer_cartan(G))
    assert agreement_scan(f, G, exact, grid, 1e-12).count == grid.shape[1]
    scan = agreement_scan(f, G, parse_form(PHI_BAD, PLANE), grid, 1e-9)
    assert scan.count == 21 and np.all(scan.points[1] == 0)
    off = parse_form("[[d(1) + d(2), exp(-x1) d(2)], [0, 0]]", PLANE)
    assert agreement_scan(f, G, off, grid, 1e-9).count == 0
