import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superform.density import (
    INCONCLUSIVE,
    NOT_DENSE,
    SUPERDENSE,
    ball_volume,
    canonical_set,
    classify,
    clopper_pearson,
    deficit,
    degree_cap,
    density_degree,
    dyadic_schedule,
    finite_perimeter_threshold,
    zero_set,
)
from superform.errors import DomainError
from superform.fields import ChartDomain
from superform.literals import parse_form

ORIGIN = (0.0, 0.0)
SCHED = dyadic_schedule(0.4, 8)


def _cusp_area_quad(k, r):
    # independent oracle: 30-digit quadrature split where the cusp leaves the disc
    with mp.workdps(30):
        r = mp.mpf(r)
        xs = mp.findroot(lambda x: x**k - mp.sqrt(r * r - x * x), (0, r), solver="bisect")
        val = mp.quad(lambda x: 2 * x**k, [0, xs]) + mp.quad(lambda x: 2 * mp.sqrt(r * r - x * x), [xs, r])
        return float(val)


def test_deficit_examples():
    r = 0.3
    assert deficit(canonical_set("full"), ORIGIN, r).value == 0
    assert deficit(canonical_set("empty"), ORIGIN, r).value == pytest.approx(math.pi * r * r, rel=1e-15)
    assert deficit(canonical_set("half-space"), ORIGIN, r).value == pytest.approx(math.pi * r * r / 2, rel=1e-15)
    e = deficit(canonical_set("half-space"), ORIGIN, r, n=20000, seed=4, use_exact=False)
    assert e.ci_low <= math.pi * r * r / 2 <= e.ci_high and not e.exact


def test_density_degree_examples():
    ball = density_degree(canonical_set("ball"), ORIGIN, SCHED)
    assert ball.exact_zero and ball.slope == degree_cap(2) == 12
    hyper = density_degree(canonical_set("hyperplane"), (0.0, 0.7), SCHED)
    assert hyper.slope == pytest.approx(2.0, abs=1e-12)
    cusp = density_degree(canonical_set("cusp", k=4), ORIGIN, SCHED)
    assert cusp.slope == pytest.approx(5.0, abs=0.05)
    small = cusp.estimates[-1]
    assert small.value == pytest.approx(0.4 * small.radius**5, rel=1e-3)


def test_classify_examples():
    ball = density_degree(canonical_set("ball"), ORIGIN, SCHED)
    assert classify(ball, 3) == SUPERDENSE
    hyper = density_degree(canonical_set("hyperplane"), ORIGIN, SCHED, n=20000, use_exact=False)
    assert classify(hyper, 3) == NOT_DENSE
    cusp = density_degree(canonical_set("cusp", k=4), ORIGIN, SCHED)
    assert classify(cusp, 3) == SUPERDENSE
    assert classify(hyper, 2) == INCONCLUSIVE


def test_canonical_set_examples():
    cusp4 = canonical_set("cusp", k=4)
    assert not cusp4((0.1, 0.00005))
    assert cusp4((0.1, 0.0002))
    both = canonical_set("intersection", sets=[{"name": "ball"}, {"name": "half-space"}])
    assert deficit(both, ORIGIN, 0.5).value == pytest.approx(math.pi * 0.25 / 2, rel=1e-15)
    comp = canonical_set("complement-of", of={"name": "hyperplane"})
    assert deficit(comp, ORIGIN, 0.5).value == 0
    assert deficit(comp, ORIGIN, 0.5, n=5000, use_exact=False).value == 0
    with pytest.raises(DomainError):
        canonical_set("torus")


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("r", [0.05, 0.3, 0.9])
def test_cusp_closed_form_matches_quadrature(k, r):
    got = deficit(canonical_set("cusp", k=k), ORIGIN, r).value
    assert got == pytest.approx(_cusp_area_quad(k, r), rel=1e-10)


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_ball_closed_form_matches_sampling(dim):
    E = canonical_set("ball", dim=dim, center=[0.3] * dim, radius=0.5)
    P = np.zeros(dim)
    exact = deficit(E, P, 0.6)
    est = deficit(E, P, 0.6, n=200_000, seed=1, use_exact=False)
    assert est.ci_low <= exact.value <= est.ci_high


def test_estimates_bounded_and_deterministic():
    E = canonical_set("half-space", normal=[1, 1], offset=0.05)
    a = density_degree(E, ORIGIN, SCHED, n=5000, seed=9, use_exact=False)
    b = density_degree(E, ORIGIN, SCHED, n=5000, seed=9, use_exact=False)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    for e in a.estimates:
        assert 0 <= e.ci_low <= e.value <= e.ci_high <= ball_volume(2, e.radius)


def test_sampled_cusp_slopes():
    for k in (2, 3, 4):
        rep = density_degree(canonical_set("cusp", k=k), ORIGIN, SCHED, n=100_000, seed=k, use_exact=False)
        assert abs(rep.slope - (k + 1)) <= 0.3


def test_zero_set_of_form():
    dom = ChartDomain.cube(2)
    Z = zero_set(parse_form("[[x1 d(2)]]", dom))
    rep = density_degree(Z, (0.0, 0.2), dyadic_schedule(0.4, 6), n=20000)
    assert rep.slope == pytest.approx(2.0, abs=0.1)
    with pytest.raises(DomainError):
        deficit(Z, (0.9, 0.0), 0.4)


def test_input_errors():
    E = canonical_set("full")
    with pytest.raises(DomainError):
        deficit(E, (0.0,), 0.1)
    with pytest.raises(DomainError):
        deficit(E, ORIGIN, -1)
    with pytest.raises(DomainError):
        density_degree(E, ORIGIN, [0.4, 0.2])
    with pytest.raises(DomainError):
        canonical_set("cusp", dim=3)


def test_finite_perimeter_threshold():
    assert finite_perimeter_threshold(2) == 4.0
    assert finite_perimeter_threshold(3) == 4.5
    half = density_degree(canonical_set("half-space"), ORIGIN, SCHED)
    assert half.slope < finite_perimeter_threshold(2)


def test_clopper_pearson_edges():
    assert clopper_pearson(0, 100)[0] == 0.0
    assert clopper_pearson(100, 100)[1] == 1.0
    lo, hi = clopper_pearson(30, 100)
    assert lo < 0.3 < hi


def test_interval_coverage():
    E = canonical_set("half-space")
    truth = E.known_deficit(np.zeros(2), 0.3)
    hits = sum(
        (lambda e: e.ci_low <= truth <= e.ci_high)(deficit(E, ORIGIN, 0.3, 2000, seed=s, use_exact=False))
        for s in range(100)
    )
    assert hits >= 93


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["half-space", "hyperplane", "ball", "cusp", "full", "empty"]),
       st.integers(0, 1000), st.integers(1, 4), st.integers(1, 4))
def test_classification_monotone_in_m(name, seed, m1, dm):
    rng = np.random.default_rng(seed)
    P = rng.uniform(-0.3, 0.3, 2) if name != "cusp" else np.zeros(2)
    rep = density_degree(canonical_set(name), P, dyadic_schedule(0.3, 5), n=3000, seed=seed,
                         use_exact=bool(seed % 2))
    m2 = m1 + dm
    if classify(rep, m2) == SUPERDENSE:
        assert classify(rep, m1) in (SUPERDENSE, INCONCLUSIVE)
    if rep.exact_zero:
        assert all(classify(rep, m) == SUPERDENSE for m in range(1, int(rep.cap) + 1))


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.4), st.floats(0, 2 * math.pi))
def test_intersection_subadditive(px, py, r, angle):
    S1 = canonical_set("half-space", normal=[math.cos(angle), math.sin(angle)], offset=0.1)
    S2 = canonical_set("ball", center=[0.1, 0.0], radius=0.6)
    P = np.array([px, py])
    both = canonical_set("intersection", sets=[S1, S2])
    h1, h2 = S1.known_deficit(P, r), S2.known_deficit(P, r)
    h = both.known_deficit(P, r)
    if h is None:
        h = deficit(both, P, r, n=20000, seed=0, use_exact=False).ci_low
    assert h <= h1 + h2 + 1e-12
