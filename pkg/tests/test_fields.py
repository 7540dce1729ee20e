from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import poly_to_sympy, symbols
from superform.corpus import random_polynomial
from superform.errors import CapabilityError, DomainError, ParseError
from superform.fields import ChartDomain, ChartMap, NumericField, PolyField, Smoothness, constant, coordinate, numeric
from superform.literals import format_field, parse_field, parse_map
from superform.polynomial import Polynomial

D2 = ChartDomain.cube(2)
D3 = ChartDomain.cube(3)


def field(text, dom=D2):
    return parse_field(text, dom)


def test_evaluation_examples():
    dom = ChartDomain.cube(2, -5, 5)
    assert field("x1*x2", dom).eval((2, 3)) == 6
    assert field("1", dom).eval((0.3, -4)) == 1
    sq = numeric(ChartDomain.cube(1, -2, 2), lambda X: X[0] ** 2)
    assert sq.eval((1.0,)) == 1.0


def test_partial_examples():
    assert field("x1^2*x2").partial(1) == field("2*x1*x2")
    assert field("x1").partial(2).is_zero()
    sq = numeric(ChartDomain.cube(1, -2, 2), lambda X: X[0] ** 2, label="sq")
    assert abs(sq.partial(1).eval((1.0,)) - 2.0) < 1e-6


def test_arithmetic_examples():
    assert field("x1") + field("x2") == field("x1 + x2")
    assert (field("x1") * 0).is_zero()


def test_compose_example():
    src = ChartDomain.cube(2)
    tgt = ChartDomain.cube(3, -2, 2)
    f = parse_map(["x1", "x2", "x1*x2"], src, tgt)
    assert coordinate(tgt, 3).compose(f) == field("x1*x2", src)


def test_exact_rationals_and_floats():
    p = field("3/2*x1^2*x2")
    assert p.poly.terms == {(2, 1): Fraction(3, 2)}
    assert p.poly.is_exact()
    q = field("0.5*x1")
    assert not q.poly.is_exact()
    assert (p * 2).poly.terms == {(2, 1): 3}


def test_domain_errors():
    with pytest.raises(DomainError):
        ChartDomain(((1.0, 1.0),))
    with pytest.raises(DomainError):
        field("x1").values(np.array([[2.0], [0.0]]))
    with pytest.raises(DomainError):
        Polynomial.variable(2, 3)


def test_nonsmooth_fields_refuse_derivatives():
    f = field("abs(x1)")
    assert f.smoothness == Smoothness.C0
    with pytest.raises(CapabilityError):
        f.partial(1)


def test_pos2_is_c1_with_analytic_partial():
    f = field("pos2(x1^2 + x2^2 - 1)", ChartDomain.cube(2, -2, 2))
    assert f.smoothness == Smoothness.C1
    g = f.partial(1)
    X = np.array([[0.5, 1.5], [0.0, 0.2]])
    u = X[0] ** 2 + X[1] ** 2 - 1
    assert np.allclose(g.values(X), 2 * np.maximum(u, 0) * 2 * X[0])
    with pytest.raises(CapabilityError):
        g.partial(1).partial(1)


def test_parse_errors_carry_location():
    with pytest.raises(ParseError) as exc:
        field("x1 + * x2")
    assert exc.value.position == 5
    assert "column 6" in str(exc.value)
    with pytest.raises(ParseError):
        field("x3")
    with pytest.raises(ParseError, match="unknown function"):
        field("foo(x1)")


def test_laurent_division_by_monomial():
    f = field("x1/x2")
    assert f.poly.has_negative_exponents()
    assert f.partial(2) == field("-x1/x2^2")


def test_map_component_count_checked():
    with pytest.raises(DomainError):
        ChartMap(D2, D3, [coordinate(D2, 1)])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_mixed_partials_commute_exactly(seed, M):
    rng = np.random.default_rng(seed)
    dom = ChartDomain.cube(M)
    F = PolyField(dom, random_polynomial(rng, M, max_degree=4, max_terms=5))
    i, j = rng.integers(1, M + 1, size=2)
    assert F.partial(int(i)).partial(int(j)) == F.partial(int(j)).partial(int(i))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_ring_laws_exact(seed, M):
    rng = np.random.default_rng(seed)
    dom = ChartDomain.cube(M)
    a, b, c = (PolyField(dom, random_polynomial(rng, M)) for _ in range(3))
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == constant(dom, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_partials_match_sympy(seed, M):
    rng = np.random.default_rng(seed)
    p = random_polynomial(rng, M, max_degree=4, max_terms=5)
    xs = symbols(M)
    dom = ChartDomain.cube(M)
    F = PolyField(dom, p)
    for i in range(1, M + 1):
        got = poly_to_sympy(F.partial(i).poly, xs)
        assert sp.expand(got - sp.diff(poly_to_sympy(p, xs), xs[i - 1])) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_finite_differences_match_exact_partials(seed, M):
    rng = np.random.default_rng(seed)
    dom = ChartDomain.cube(M)
    F = PolyField(dom, random_polynomial(rng, M, max_degree=3, max_terms=4))
    N = NumericField(dom, F._eval, None, Smoothness.CINF)
    X = 0.9 * (2 * rng.random((M, 100)) - 1)
    for i in range(1, M + 1):
        assert np.max(np.abs(N.partial(i).values(X) - F.partial(i).values(X))) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_format_round_trip_exact(seed, M):
    rng = np.random.default_rng(seed)
    dom = ChartDomain.cube(M)
    p = random_polynomial(rng, M, max_degree=4, max_terms=5)
    if rng.random() < 0.5:
        p = p.scale(Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 9))))
    F = PolyField(dom, p)
    assert parse_field(format_field(F), dom) == F


def test_numeric_composition_is_lazy():
    src = ChartDomain.cube(2)
    tgt = ChartDomain.cube(1, -3, 3)
    calls = []

    def f(X):
        calls.append(X.shape)
        return np.sin(X[0])

    g = numeric(tgt, f, [lambda X: np.cos(X[0])])
    h = g.compose(parse_map(["x1 + x2"], src, tgt))
    assert not calls
    assert abs(h.eval((0.3, 0.4)) - np.sin(0.7)) < 1e-15
    assert abs(h.partial(2).eval((0.3, 0.4)) - np.cos(0.7)) < 1e-12
