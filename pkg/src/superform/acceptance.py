"""The eight acceptance checks, runnable from tests and ``superform selftest``.

Each check returns a :class:`CriterionResult` whose ``details`` carry the
measured quantities next to the thresholds they are compared with.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cartan, density, integrate, lab
from .corpus import random_form, random_polynomial_map
from .fields import ChartDomain
from .forms import entry_max_norm, exterior_derivative, pullback, wedge
from .literals import domain_from_json, parse_form, parse_map

__all__ = ["CriterionResult", "CRITERIA", "identity_suite", "run_all", "run_criterion"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.title} ({self.seconds:.1f}s)"


def _timed(number, title, body):
    start = time.perf_counter()
    passed, details = body()
    return CriterionResult(number, title, bool(passed), details, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# 1. exact identities


def identity_suite(count=200, seed=2024):
    rng = np.random.default_rng(seed)
    failures = []
    checks = 0
    for n in range(count):
        M = int(rng.integers(1, 5))
        L = int(rng.integers(1, 4))
        dom = ChartDomain.cube(M)
        l = int(rng.integers(0, M))
        lam = random_form(rng, dom, L, l)
        # d o d = 0
        if l + 2 <= M:
            checks += 1
            if not exterior_derivative(exterior_derivative(lam)).is_zero():
                failures.append((n, "d o d"))
        # Leibniz
        if l + 1 <= M:
            m = int(rng.integers(0, M - l))
            mu = random_form(rng, dom, L, m)
            lhs = exterior_derivative(wedge(lam, mu))
            sign = -1 if l % 2 else 1
            rhs = wedge(exterior_derivative(lam), mu) + wedge(lam, exterior_derivative(mu)).scale(sign)
            checks += 1
            if lhs != rhs:
                failures.append((n, "Leibniz"))
        # associativity
        a = int(rng.integers(0, M + 1))
        b = int(rng.integers(0, M - a + 1))
        c = int(rng.integers(0, M - a - b + 1))
        x, y, z = (random_form(rng, dom, L, k) for k in (a, b, c))
        checks += 1
        if wedge(wedge(x, y), z) != wedge(x, wedge(y, z)):
            failures.append((n, "associativity"))
        # pullback commutes with d
        N = int(rng.integers(1, 5))
        target = ChartDomain.cube(N, -50.0, 50.0)
        fmap = random_polynomial_map(rng, dom, target)
        k = int(rng.integers(0, min(M, N)))
        omega = random_form(rng, target, L, k)
        checks += 1
        if exterior_derivative(pullback(fmap, omega)) != pullback(fmap, exterior_derivative(omega)):
            failures.append((n, "pullback"))
    return checks, failures


def criterion_1():
    def body():
        start = time.perf_counter()
        checks, failures = identity_suite()
        elapsed = time.perf_counter() - start
        ok = not failures and elapsed < 30.0
        return ok, {"forms": 200, "identities_checked": checks, "failures": failures[:10],
                    "seconds": elapsed, "limit_seconds": 30.0}

    return _timed(1, "exact identities on 200 random forms", body)


# ---------------------------------------------------------------------------
# 2. DED verifier


def criterion_2(count=20, seed=7):
    def body():
        rng = np.random.default_rng(seed)
        worst = 0.0
        failures = 0
        for n in range(count):
            M = 2 if n % 2 == 0 else 3
            dom = ChartDomain.cube(M)
            h = int(rng.integers(0, M))
            L = int(rng.integers(1, 3))
            lam = random_form(rng, dom, L, h)
            w = integrate.verify_ded(lam, exterior_derivative(lam))
            worst = max(worst, w.max_residual)
            failures += w.quadrature_failures
        dom2 = ChartDomain.cube(2)
        kink = integrate.verify_ded(parse_form("[[abs(x1) d(2)]]", dom2), parse_form("[[sign(x1) d(1,2)]]", dom2))
        lam = parse_form("[[x1*x2 d(1) + x2^2 d(2)]]", dom2)
        bump = integrate.make_bump(dom2, (0.3, -0.2), 0.5, 0.5, (1, 2))
        control = integrate.verify_ded(lam, exterior_derivative(lam) + bump.scale(0.1))
        ok = worst < 1e-6 and kink.max_residual < 1e-6 and control.max_residual > 1e-3
        return ok, {
            "random_max_residual": worst,
            "kink_max_residual": kink.max_residual,
            "negative_control_max_residual": control.max_residual,
            "quadrature_failures": failures + kink.quadrature_failures,
            "thresholds": {"residual": 1e-6, "control": 1e-3},
        }

    return _timed(2, "DED identity on random smooth forms, |x1| case, negative control", body)


# ---------------------------------------------------------------------------
# 3. Maurer-Cartan equation


def criterion_3(points=100, seed=3):
    def body():
        rng = np.random.default_rng(seed)
        symbolic = {}
        numeric = {}
        for name in cartan.CATALOG:
            G = cartan.chart(name)
            symbolic[name] = cartan.mc_residual(cartan.maurer_cartan(G)).is_zero()
            lo, hi = G.domain.lo, G.domain.hi
            U = lo[:, None] + (hi - lo)[:, None] * rng.random((G.dim, points))
            numeric[name] = cartan.mc_residual_numeric(G, U)
        ok = symbolic["affine2"] and symbolic["so2"] and all(v < 1e-10 for v in numeric.values())
        return ok, {"symbolic_zero": symbolic, "numeric_max_residual": numeric, "threshold": 1e-10}

    return _timed(3, "Maurer-Cartan residual of catalog charts", body)


# ---------------------------------------------------------------------------
# 4. zero sets of gamma


def criterion_4():
    def body():
        start = time.perf_counter()
        reports = {name: lab.run_experiment(lab.load_config(name))
                   for name in ("thm31_canonical", "thm31_canonical3", "thm31_control")}
        elapsed = time.perf_counter() - start
        pos_ok = all(
            r.verdict == lab.PASS and len(r.probes) == 50
            and all(p["exact_zero"] and p["verdict"] == density.SUPERDENSE and p["residual"] < 1e-9
                    for p in r.probes)
            for r in (reports["thm31_canonical"], reports["thm31_canonical3"])
        )
        ctrl = reports["thm31_control"]
        ctrl_ok = ctrl.verdict == lab.PASS and bool(ctrl.probes) and all(
            p["slope"] is not None and abs(p["slope"] - 2.0) <= 0.2 and abs(p["residual"] - 1.0) < 1e-12
            for p in ctrl.probes
        )
        ok = pos_ok and ctrl_ok and elapsed < 120.0
        return ok, {
            "verdicts": {k: r.verdict for k, r in reports.items()},
            "control_slopes": [ctrl.summary.get("slope_min"), ctrl.summary.get("slope_max")],
            "seconds": elapsed,
            "limit_seconds": 120.0,
        }

    return _timed(4, "superdense zero-set probes have vanishing d gamma", body)


# ---------------------------------------------------------------------------
# 5. density estimator


def criterion_5(samples=100_000, repeats=100):
    def body():
        sched = density.dyadic_schedule(0.4, 8)
        origin = [0.0, 0.0]
        hs = density.canonical_set("half-space")
        half = density.density_degree(hs, origin, sched, samples, seed=11, use_exact=False)
        cusps = {}
        for k in (2, 3, 4):
            rep = density.density_degree(density.canonical_set("cusp", k=k), origin, sched, samples,
                                         seed=20 + k, use_exact=False)
            cusps[k] = rep.slope
        ball = density.density_degree(density.canonical_set("ball"), [0.2, -0.1], sched, samples,
                                      seed=5, use_exact=False)
        r = 0.3
        truth = hs.known_deficit(origin, r)
        covered = 0
        for s in range(repeats):
            est = density.deficit(hs, origin, r, 10_000, seed=1000 + s, use_exact=False)
            covered += est.ci_low <= truth <= est.ci_high
        ok = (
            abs(half.slope - 2.0) <= 0.1
            and all(abs(cusps[k] - (k + 1)) <= 0.3 for k in cusps)
            and ball.exact_zero
            and covered >= 93
        )
        return ok, {
            "half_space_slope": half.slope,
            "cusp_slopes": cusps,
            "ball_exact_zero": ball.exact_zero,
            "coverage": f"{covered}/{repeats}",
        }

    return _timed(5, "density estimator slopes and interval coverage", body)


# ---------------------------------------------------------------------------
# 6. tangency


def criterion_6():
    def body():
        rep = lab.run_experiment(lab.load_config("tangency_canonical"))
        slopes = [p["slope"] if p["slope"] is not None else math.inf for p in rep.probes]
        ok = (
            rep.verdict == lab.PASS
            and len(slopes) == 20
            and max(slopes) <= 2.2
            and rep.summary["pulled_back_d"] == "[[d(1,2)]]"
        )
        return ok, {"verdict": rep.verdict, "probes": len(slopes), "slope_max": max(slopes, default=None),
                    "pulled_back": rep.summary["pulled_back"], "pulled_back_d": rep.summary["pulled_back_d"]}

    return _timed(6, "tangency set of the contact instance", body)


# ---------------------------------------------------------------------------
# 7. agreement set


def criterion_7():
    def body():
        cfg = lab.load_config("cor52_canonical")
        rep = lab.run_experiment(cfg)
        dom = domain_from_json(cfg["box"])
        phi = parse_form(cfg["phi"], dom, 1)
        grid = cartan.grid_points(dom, cfg["grid"])
        expected = parse_form("[[0, -d(1,2)], [0, 0]]", dom, 2)
        residual_err = float(np.max(entry_max_norm(cartan.mc_residual(phi) - expected, grid)))
        G = cartan.chart(cfg["chart"])
        fmap = parse_map(cfg["map"], dom, G.domain)
        scan = cartan.agreement_scan(fmap, G, phi, grid, cfg["agreement_eps"])
        max_y = float(np.max(np.abs(scan.points[1]))) if scan.count else math.inf
        on_line = int(np.count_nonzero(grid[1] == 0.0))
        slopes = [p["slope"] for p in rep.probes]
        ok = (
            residual_err < 1e-12
            and abs(rep.summary["mc_residual_min"] - 1.0) < 1e-12
            and abs(rep.summary["mc_residual_max"] - 1.0) < 1e-12
            and max_y <= 1e-8
            and scan.count == on_line
            and len(slopes) == 20
            and all(s is not None and abs(s - 2.0) <= 0.2 for s in slopes)
            and rep.verdict == lab.PASS
        )
        return ok, {
            "residual_deviation_from_minus_dx_dy": residual_err,
            "residual_entry_max": [rep.summary["mc_residual_min"], rep.summary["mc_residual_max"]],
            "agreement_points": scan.count,
            "grid_points_on_axis": on_line,
            "agreement_max_abs_y": max_y,
            "slopes": [rep.summary.get("slope_min"), rep.summary.get("slope_max")],
            "verdict": rep.verdict,
        }

    return _timed(7, "agreement set of the affine instance", body)


# ---------------------------------------------------------------------------
# 8. development


def criterion_8():
    def body():
        line = ChartDomain(((-2.0, 2.0),))
        phi1 = parse_form("[[7/10 d(1)]]", line)
        f1 = cartan.cartan_integrate(phi1, [[0.0], [1.0]], 1e-3)
        exp_err = abs(float(f1[0, 0]) - math.exp(0.7))

        pull_err = 0.0
        for x in np.linspace(-1.0, 1.0, 9):
            got = cartan.pulled_back_mc(phi1, [0.0], [x])
            pull_err = max(pull_err, float(np.max(np.abs(got - phi1.coefficient_values(np.array([x]))))))
        plane = ChartDomain(((-2.0, 2.0), (-2.0, 2.0)))
        mc = parse_form("[[d(1), exp(-x1) d(2)], [0, 0]]", plane)
        bad = parse_form("[[d(1), exp(-x1) d(2) + x2 d(1)], [0, 0]]", plane)
        for P in [(0.5, 0.5), (-0.7, 0.3), (1.0, -1.0)]:
            got = cartan.pulled_back_mc(mc, [0.0, 0.0], P)
            pull_err = max(pull_err, float(np.max(np.abs(got - mc.coefficient_values(np.array(P))))))

        square = [(0, 0), (1, 0), (1, 1), (0, 1)]
        hol_mc = cartan.holonomy(mc, square)
        hol_bad = cartan.holonomy(bad, square)

        a = np.array([[2.0, 1.0], [0.0, 1.0]])
        path = [(0, 0), (1, 0.5), (0.2, 1.0)]
        _, t1 = cartan.cartan_integrate(bad, path, 1e-3, trajectory=True)
        _, t2 = cartan.cartan_integrate(bad, path, 1e-3, start=a, trajectory=True)
        uniq = max(float(np.max(np.abs(g2 @ np.linalg.inv(g1) - a))) for g1, g2 in zip(t1, t2))
        ok = exp_err < 1e-8 and pull_err < 1e-6 and hol_mc < 1e-6 and hol_bad > 1e-3 and uniq < 1e-8
        return ok, {"exp_error": exp_err, "pullback_error": pull_err, "holonomy_mc": hol_mc,
                    "holonomy_violating": hol_bad, "uniqueness_error": uniq}

    return _timed(8, "Cartan development, holonomy and uniqueness", body)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


def run_criterion(number: int) -> CriterionResult:
    return CRITERIA[number]()


def run_all(numbers=None, echo=None):
    results = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
