"""Integration of top-degree forms, bump test forms, and the DED verifier.

The distributional exterior derivative identity checked here is

    int lam ^ d(phi) = (-1)^(h+1) int delta(lam) ^ phi

for a battery of compactly supported bump test forms ``phi``.  A finite
battery can only show that a candidate is *consistent* with being the DED.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import expit

from .errors import DomainError, QuadratureError
from .fields import ChartDomain, NumericField, Smoothness
from .forms import MatrixForm, exterior_derivative, pullback, restrict
from .multiindex import MultiIndex, enumerate_multiindices, merge

__all__ = [
    "adaptive_cubature",
    "integrate_box",
    "integrate_ball",
    "smoothstep",
    "smoothstep_derivative",
    "Bump",
    "make_bump",
    "measure_profile_constant",
    "BatterySpec",
    "DedTest",
    "DedWitness",
    "verify_ded",
    "check_ded_props",
]


# ---------------------------------------------------------------------------
# cubature


class _Rule:
    """Tensor Gauss-Legendre rule on [0, 1]^M and its halvings along each axis."""

    def __init__(self, dim, order):
        x, w = leggauss(order)
        x = (x + 1.0) / 2.0
        w = w / 2.0
        grid = np.array(list(itertools.product(range(order), repeat=dim))).reshape(-1, dim).T
        self.nodes = x[grid]  # (M, p^M)
        self.weights = np.prod(w[grid], axis=0)
        halves = []
        for k in range(dim):
            for offset in (0.0, 0.5):
                pts = self.nodes.copy()
                pts[k] = offset + 0.5 * pts[k]
                halves.append(pts)
        self.points = np.concatenate([self.nodes] + halves, axis=1)  # (M, (1 + 2M) p^M)
        self.dim = dim
        self.size = self.nodes.shape[1]


def adaptive_cubature(func, lo, hi, tol=1e-9, order=7, max_panels=20000, initial=2):
    """Globally adaptive tensor Gauss-Legendre cubature of a vector integrand.

    ``func`` maps points ``(M, N)`` to values ``(K, N)``.  Each panel is
    integrated with the order-``order`` product rule and, for every axis,
    with the same rule on the two halves along that axis.  The per-axis
    differences ``e_k`` steer the split direction; their sum is the panel
    error estimate.  Splitting only the worst axis keeps axis-aligned
    features (kinks, plateau edges) cheap.  Panels with the largest
    estimates are split until the total falls below ``tol``.

    Returns ``(estimate, error)``; raises :class:`QuadratureError` when
    ``max_panels`` would be exceeded.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    M = lo.size
    rule = _Rule(M, order)
    n0 = rule.size

    def evaluate(panels):
        los = np.array([p[0] for p in panels]).T  # (M, B)
        wid = np.array([p[1] for p in panels]).T
        X = los[:, :, None] + wid[:, :, None] * rule.points[:, None, :]
        vals = np.asarray(func(X.reshape(M, -1)), dtype=float)
        vals = vals.reshape(vals.shape[0], len(panels), 1 + 2 * M, n0)  # (K, B, 1+2M, p^M)
        vol = np.prod(wid, axis=0)
        parts = vals @ rule.weights * vol[None, :, None]  # (K, B, 1+2M)
        coarse = parts[:, :, 0]
        fine = parts[:, :, 1::2] / 2.0 + parts[:, :, 2::2] / 2.0  # (K, B, M)
        diffs = np.max(np.abs(fine - coarse[:, :, None]), axis=0)  # (B, M)
        axis = np.argmax(diffs, axis=1)
        best = fine[:, np.arange(len(panels)), axis].T  # (B, K)
        return best, diffs.sum(axis=1), axis

    width0 = (hi - lo) / initial
    panels = [
        (lo + width0 * np.array(idx), width0)
        for idx in itertools.product(range(initial), repeat=M)
    ]
    heap = []
    counter = itertools.count()
    total_err = 0.0
    estimate = 0.0
    while True:
        best, err, axis = evaluate(panels)
        for p, q, e, k in zip(panels, best, err, axis):
            heapq.heappush(heap, (-e, next(counter), p, q, k))
        total_err += float(np.sum(err))
        estimate = estimate + np.sum(best, axis=0)
        if total_err <= tol:
            break
        if len(heap) + 1 > max_panels:
            raise QuadratureError(
                f"panel budget {max_panels} exhausted at error {total_err:.3e}", estimate, total_err
            )
        worst = -heap[0][0]
        panels = []
        while heap and len(panels) < 64 and -heap[0][0] >= 0.1 * worst and len(heap) + len(panels) // 2 < max_panels:
            negerr, _, (plo, pw), q, k = heapq.heappop(heap)
            total_err -= -negerr
            estimate = estimate - q
            half = pw.copy()
            half[k] /= 2.0
            upper = plo.copy()
            upper[k] += half[k]
            panels.extend([(plo, half), (upper, half)])
    # re-sum leaves to shed accumulated cancellation error
    estimate = np.sum([item[3] for item in heap], axis=0)
    total_err = float(sum(-item[0] for item in heap))
    return estimate, total_err


def integrate_box(omega: MatrixForm, box=None, tol=1e-9, order=7, max_panels=20000):
    """Entrywise integral of a top-degree matrix form over a box.

    ``box`` defaults to the form's domain and must lie inside it.
    """
    if omega.degree != omega.dim:
        raise DomainError(f"only top-degree forms integrate; got degree {omega.degree} on dim {omega.dim}")
    box = omega.domain if box is None else (box if isinstance(box, ChartDomain) else ChartDomain(box))
    if np.any(box.lo < omega.domain.lo) or np.any(box.hi > omega.domain.hi):
        raise DomainError(f"box {box.box} not inside domain {omega.domain.box}")
    L = omega.L

    def func(X):
        return omega._coefficient_values(X)[0].reshape(L * L, -1)

    est, _ = adaptive_cubature(func, box.lo, box.hi, tol, order, max_panels)
    return est.reshape(L, L)


def _spherical_map(M, center, s, angles):
    """Points and volume element for hyperspherical coordinates.

    ``angles`` holds ``M - 2`` polar angles in [0, pi] and one azimuth in
    [0, 2 pi].  Returns ``(X, jac)`` with ``X`` of shape ``(M, N)``.
    """
    N = s.shape[0]
    X = np.empty((M, N))
    jac = s ** (M - 1)
    prod = np.ones(N)
    for j in range(M - 2):
        th = angles[j]
        X[j] = prod * np.cos(th)
        jac = jac * np.sin(th) ** (M - 2 - j)
        prod = prod * np.sin(th)
    phi = angles[M - 2]
    X[M - 2] = prod * np.cos(phi)
    X[M - 1] = prod * np.sin(phi)
    return np.asarray(center, dtype=float)[:, None] + s * X, jac


def integrate_ball(func, center, r, breaks=(), tol=1e-9, order=7, max_panels=20000):
    """Cubature of ``func`` over the closed ball ``B_r(center)``.

    Works in hyperspherical coordinates so radial features (the shells at
    ``breaks``) sit on panel faces.  ``func`` has the same contract as in
    :func:`adaptive_cubature`.  The tolerance is split evenly across the
    radial shells.  Returns ``(estimate, error)``.
    """
    center = np.asarray(center, dtype=float)
    edges = [0.0] + sorted(float(b) for b in breaks if 0.0 < b < r) + [float(r)]
    shell_tol = tol / (len(edges) - 1)
    total, error = 0.0, 0.0
    try:
        for a, b in zip(edges[:-1], edges[1:]):
            est, err = _integrate_shell(func, center, a, b, shell_tol, order, max_panels)
            total, error = total + est, error + err
    except QuadratureError as exc:
        raise QuadratureError(str(exc), total + exc.estimate, error + exc.error) from None
    return total, error


def _integrate_shell(func, center, a, b, tol, order, max_panels):
    M = center.size
    if M == 1:
        # the "sphere" is two points; integrate both radial segments
        total, error = 0.0, 0.0
        for sgn in (-1.0, 1.0):
            est, err = adaptive_cubature(
                lambda T, sgn=sgn: func(center[:, None] + sgn * T), [a], [b], tol / 2.0, order, max_panels
            )
            total, error = total + est, error + err
        return total, error
    lo = [a] + [0.0] * (M - 2) + [0.0]
    hi = [b] + [np.pi] * (M - 2) + [2.0 * np.pi]

    def mapped(T):
        X, jac = _spherical_map(M, center, T[0], T[1:])
        return np.asarray(func(X)) * jac

    return adaptive_cubature(mapped, lo, hi, tol, order, max_panels)


# ---------------------------------------------------------------------------
# bump test forms


def smoothstep(u):
    """C^inf step: 0 for u <= 0, 1 for u >= 1.

    ``S(u) = e(u) / (e(u) + e(1 - u))`` with ``e(u) = exp(-1/u)``, written as
    ``expit(1/(1-u) - 1/u)`` for stability.
    """
    u = np.asarray(u, dtype=float)
    inner = np.clip(u, 1e-12, 1.0 - 1e-12)
    s = expit(1.0 / (1.0 - inner) - 1.0 / inner)
    return np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, s))


def smoothstep_derivative(u):
    u = np.asarray(u, dtype=float)
    inner = np.clip(u, 1e-12, 1.0 - 1e-12)
    s = expit(1.0 / (1.0 - inner) - 1.0 / inner)
    ds = s * (1.0 - s) * (1.0 / inner**2 + 1.0 / (1.0 - inner) ** 2)
    return np.where((u <= 0.0) | (u >= 1.0), 0.0, ds)


@dataclass(frozen=True)
class Bump:
    """Radial cutoff ``g_r`` around ``center``.

    ``g_r(x) = S((1 - s) / (1 - rho))`` with ``s = |x - center| / r`` and
    ``S`` the C^inf :func:`smoothstep`.  So ``g_r = 1`` on the closed ball of
    radius ``rho * r``, ``g_r = 0`` outside the open ball of radius ``r``,
    and ``|D_i g_r| <= K / (r (1 - rho))`` with ``K = max S' = 2``.
    """

    center: tuple
    radius: float
    rho: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise DomainError(f"bump radius must be positive, got {self.radius}")
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"plateau ratio must lie in (0, 1), got {self.rho}")

    def _radial(self, X):
        c = np.asarray(self.center).reshape((-1,) + (1,) * (X.ndim - 1))
        diff = X - c
        dist = np.sqrt(np.sum(diff**2, axis=0))
        return diff, dist

    def value(self, X):
        X = np.asarray(X, dtype=float)
        _, dist = self._radial(X)
        return smoothstep((1.0 - dist / self.radius) / (1.0 - self.rho))

    def gradient(self, X):
        """Array ``(M, *batch)`` of partial derivatives."""
        X = np.asarray(X, dtype=float)
        diff, dist = self._radial(X)
        u = (1.0 - dist / self.radius) / (1.0 - self.rho)
        ds = smoothstep_derivative(u)
        safe = np.where(dist > 0, dist, 1.0)
        scale = np.where(dist > 0, -ds / ((1.0 - self.rho) * self.radius * safe), 0.0)
        return diff * scale

    def support_box(self):
        c = np.asarray(self.center)
        return ChartDomain(tuple(zip(c - self.radius, c + self.radius)))

    def field(self, domain: ChartDomain) -> NumericField:
        if not domain.contains_ball(self.center, self.radius):
            raise DomainError(f"ball B({self.center}, {self.radius}) escapes domain {domain.box}")

        def partial(i):
            return NumericField(domain, lambda X: self.gradient(X)[i - 1], None, Smoothness.CINF,
                                label=f"D{i}g")

        return NumericField(domain, self.value, partial, Smoothness.CINF, label=f"bump{self.center}")


def make_bump(domain: ChartDomain, center, r, rho=0.5, beta=(), L=1, entry=None) -> MatrixForm:
    """Test form ``g_r dx_beta`` times the identity, or times ``E_ab`` when ``entry=(a, b)``."""
    bump = Bump(tuple(center), r, rho)
    g = bump.field(domain)
    key = beta if isinstance(beta, MultiIndex) else MultiIndex(tuple(beta), domain.dim)

    def fill(i, j):
        if entry is None:
            return {key: g} if i == j else {}
        return {key: g} if (i, j) == tuple(entry) else {}

    return MatrixForm.from_function(domain, key.degree, L, fill)


def measure_profile_constant(rho=0.5, samples=20001):
    """Measured ``sup |D_i g_r| * r * (1 - rho)`` along a radius (unit ball, r = 1)."""
    bump = Bump((0.0,), 1.0, rho)
    x = np.linspace(-1.0, 1.0, samples)[None, :]
    return float(np.max(np.abs(bump.gradient(x))) * (1.0 - rho))


# ---------------------------------------------------------------------------
# DED verification


@dataclass(frozen=True)
class BatterySpec:
    """Default test battery.

    Centers lie on a ``grid``-per-axis lattice over the part of the domain
    where the ball fits; radii are ``radius_fractions`` of the domain
    diameter.  Every basis index of the complementary degree is used, and
    every one-hot matrix entry ``(a, b)``.
    """

    grid: int = 2
    radius_fractions: tuple = (0.1, 0.2)
    rho: float = 0.5

    def centers(self, domain: ChartDomain, r):
        lo, hi = domain.lo + r, domain.hi - r
        if np.any(lo > hi):
            return []
        axes = [np.array([(a + b) / 2.0]) if self.grid == 1 else np.linspace(a, b, self.grid)
                for a, b in zip(lo, hi)]
        return [tuple(float(v) for v in c) for c in itertools.product(*axes)]

    def radii(self, domain: ChartDomain):
        return [f * domain.diameter for f in self.radius_fractions]


@dataclass
class DedTest:
    center: tuple
    radius: float
    beta: tuple
    entry: tuple
    lhs: float
    rhs: float
    residual: float
    quad_error: float


@dataclass
class DedWitness:
    degree: int
    tolerance: float
    tests: List[DedTest] = field(default_factory=list)
    quadrature_failures: int = 0

    @property
    def max_residual(self):
        return max((t.residual for t in self.tests), default=0.0)

    @property
    def passed(self):
        return bool(self.tests) and self.max_residual < self.tolerance

    @property
    def verdict(self):
        return "consistent with DED" if self.passed else "inconsistent with DED"

    def to_json(self):
        return {
            "degree": self.degree,
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "passed": self.passed,
            "verdict": self.verdict,
            "quadrature_failures": self.quadrature_failures,
            "tests": [asdict(t) for t in self.tests],
        }


def _test_signs(lam: MatrixForm, candidate: MatrixForm, beta: MultiIndex):
    """Signed index pairs for the integrands against ``g I dx_beta``.

    ``lam ^ d(g dx_beta)`` has top coefficient
    ``sum sign * lam_alpha * D_i g`` and ``candidate ^ g dx_beta`` has
    ``sum sign * candidate_gamma * g``.
    """
    M = lam.dim
    left = []
    for n, alpha in enumerate(lam.components()):
        for i in range(1, M + 1):
            m1 = merge(alpha, MultiIndex((i,), M))
            if m1 is None:
                continue
            m2 = merge(m1.index, beta)
            if m2 is not None:
                left.append((n, i - 1, m1.sign * m2.sign))
    right = []
    for n, gamma in enumerate(candidate.components()):
        m = merge(gamma, beta)
        if m is not None:
            right.append((n, m.sign))
    return left, right


def _integrate_test(func, center, r, rho, tol, order, max_panels):
    """Ball cubature first; on budget exhaustion, the circumscribing box.

    Spherical coordinates put the bump's shells on panel faces, which suits
    smooth coefficients.  Kinks of non-smooth coefficients usually align with
    coordinate planes instead, which suits the box.
    """
    try:
        est, err = integrate_ball(func, center, r, (rho * r,), tol, order, max(max_panels // 10, 100))
        return est, err, 0
    except QuadratureError:
        pass
    c = np.asarray(center, dtype=float)
    try:
        est, err = adaptive_cubature(func, c - r, c + r, tol, order, max_panels)
        return est, err, 0
    except QuadratureError as exc:
        return exc.estimate, exc.error, 1


def verify_ded(
    lam: MatrixForm,
    candidate: MatrixForm,
    battery: Optional[BatterySpec] = None,
    tol: float = 1e-6,
    quad_tol: Optional[float] = None,
    order: int = 7,
    max_panels: int = 20000,
) -> DedWitness:
    """Residuals of the DED identity for ``candidate`` against a bump battery.

    For the one-hot test ``E_ab g dx_beta`` both sides of the identity vanish
    outside column ``b``, and that column equals column ``a`` of the same
    integrals taken against ``g I dx_beta``.  One cubature per
    ``(center, radius, beta)`` therefore covers all L^2 one-hot tests.

    ``quad_tol`` (estimated cubature error) defaults to ``tol / 10``.
    """
    battery = battery or BatterySpec()
    lam._check_compatible(candidate)
    h = lam.degree
    M = lam.dim
    if candidate.degree != h + 1:
        raise DomainError(f"candidate has degree {candidate.degree}, expected {h + 1}")
    if h > M - 1:
        raise DomainError(f"no DED for a {h}-form on dimension {M}")
    quad_tol = tol / 10.0 if quad_tol is None else quad_tol
    sign = -1.0 if (h + 1) % 2 else 1.0
    L = lam.L
    witness = DedWitness(degree=h, tolerance=tol)
    for beta in enumerate_multiindices(M, M - h - 1):
        left, right = _test_signs(lam, candidate, beta)
        for r in battery.radii(lam.domain):
            for center in battery.centers(lam.domain, r):
                bump = Bump(tuple(center), r, battery.rho)

                def func(X, bump=bump, left=left, right=right):
                    lv = lam._coefficient_values(X)
                    cv = candidate._coefficient_values(X)
                    grad = bump.gradient(X)
                    g = bump.value(X)
                    A = np.zeros((L, L, X.shape[1]))
                    B = np.zeros((L, L, X.shape[1]))
                    for n, i, s in left:
                        A += s * lv[n] * grad[i]
                    for n, s in right:
                        B += s * cv[n] * g
                    return np.concatenate([A.reshape(L * L, -1), B.reshape(L * L, -1)])

                est, qerr, failed = _integrate_test(func, center, r, battery.rho, quad_tol, order, max_panels)
                witness.quadrature_failures += failed
                A = est[: L * L].reshape(L, L)
                B = est[L * L:].reshape(L, L)
                R = np.abs(A - sign * B)
                for a in range(L):
                    row = int(np.argmax(R[:, a]))
                    for b in range(L):
                        witness.tests.append(DedTest(
                            center=tuple(center), radius=float(r), beta=beta.indices,
                            entry=(a + 1, b + 1), lhs=float(A[row, a]), rhs=float(sign * B[row, a]),
                            residual=float(R[row, a]), quad_error=float(qerr),
                        ))
    return witness


def _form_deviation(a: MatrixForm, b: MatrixForm, rng, samples=64) -> Tuple[bool, float]:
    """Exact equality flag plus max coefficient deviation at random points."""
    if a == b:
        return True, 0.0
    diff = a - b
    lo, hi = diff.domain.lo, diff.domain.hi
    X = lo[:, None] + (hi - lo)[:, None] * rng.random((diff.dim, samples))
    vals = diff.coefficient_values(X)
    return False, float(np.max(np.abs(vals))) if vals.size else 0.0


def check_ded_props(seed=0, count=5, dims=(2, 3), L=2, battery=None, tol=1e-6):
    """Instantiate the DED propositions on random polynomial data.

    Exact identities are compared by coefficient maps; identities that need
    the weak formulation go through :func:`verify_ded`.  Returns a dict
    keyed by proposition with the max deviation seen.
    """
    from .corpus import random_form, random_polynomial_map

    rng = np.random.default_rng(seed)
    battery = battery or BatterySpec()
    report = {
        "restriction": {"max_deviation": 0.0, "exact": True},
        "smooth_case": {"max_deviation": 0.0},
        "linearity": {"max_deviation": 0.0, "exact": True},
        "nilpotence": {"max_deviation": 0.0, "exact": True},
        "pullback": {"max_deviation": 0.0, "exact": True},
    }

    def bump_max(key, value):
        report[key]["max_deviation"] = max(report[key]["max_deviation"], float(value))

    for n in range(count):
        M = dims[n % len(dims)]
        dom = ChartDomain.cube(M)
        h = int(rng.integers(0, M))
        lam = random_form(rng, dom, L, h)
        mu = random_form(rng, dom, L, h)
        dlam = exterior_derivative(lam)

        # smooth forms: candidate d(lam) passes the weak identity
        w = verify_ded(lam, dlam, battery, tol)
        bump_max("smooth_case", w.max_residual)

        # restriction to an open sub-box
        sub = ChartDomain(tuple((-0.5, 0.75) for _ in range(M)))
        exact, dev = _form_deviation(exterior_derivative(restrict(lam, sub)), restrict(dlam, sub), rng)
        report["restriction"]["exact"] &= exact
        bump_max("restriction", dev)
        w = verify_ded(restrict(lam, sub), restrict(dlam, sub), battery, tol)
        bump_max("restriction", w.max_residual)

        # linearity with a = 2, b = -1
        exact, dev = _form_deviation(
            exterior_derivative(lam.scale(2) - mu), dlam.scale(2) - exterior_derivative(mu), rng
        )
        report["linearity"]["exact"] &= exact
        bump_max("linearity", dev)

        # d(d lam) = 0, and d lam has DED 0
        if h + 2 <= M:
            ddlam = exterior_derivative(dlam)
            exact, dev = _form_deviation(ddlam, MatrixForm.zero(dom, h + 2, L), rng)
            report["nilpotence"]["exact"] &= exact
            bump_max("nilpotence", dev)
            w = verify_ded(dlam, MatrixForm.zero(dom, h + 2, L), battery, tol)
            bump_max("nilpotence", w.max_residual)

        # pullback commutes with d
        N = M + 1
        target = ChartDomain.cube(N, -10.0, 10.0)
        fmap = random_polynomial_map(rng, dom, target)
        hk = min(h, M - 1)
        omega = random_form(rng, target, L, hk)
        exact, dev = _form_deviation(
            exterior_derivative(pullback(fmap, omega)), pullback(fmap, exterior_derivative(omega)), rng
        )
        report["pullback"]["exact"] &= exact
        bump_max("pullback", dev)
    for key in report:
        report[key]["instances"] = count
    return report

