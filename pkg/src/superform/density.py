"""Density degree of a set at a point from the ball deficit.

The deficit of ``E`` at ``P`` is ``h(r) = vol(B_r(P) \\ E)``.  ``P`` is an
``m``-density point when ``h(r) = o(r^m)``.  A finite experiment cannot
certify a little-o limit, so :func:`density_degree` fits the exponent of
``h`` on a radius schedule and :func:`classify` compares it to ``m`` with a
margin, allowing an inconclusive verdict.

A boundary point of a half-space fits slope ``M`` exactly, yet it is not an
``M``-density point: ``h(r)`` is a constant times ``r^M``, which is not
``o(r^M)``.  Classification at ``m = M`` therefore needs a slope strictly
above ``M + margin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError
from .forms import MatrixForm, zero_mask

__all__ = [
    "PointSet",
    "DensityReport",
    "ball_volume",
    "cap_volume",
    "canonical_set",
    "zero_set",
    "deficit",
    "DeficitEstimate",
    "density_degree",
    "dyadic_schedule",
    "classify",
    "degree_cap",
    "finite_perimeter_threshold",
    "SUPERDENSE",
    "NOT_DENSE",
    "INCONCLUSIVE",
]

SUPERDENSE = "superdense"
NOT_DENSE = "not"
INCONCLUSIVE = "inconclusive"


def degree_cap(dim: int) -> float:
    """Slope reported for identically zero deficits."""
    return 4.0 * (dim + 1)


def finite_perimeter_threshold(dim: int) -> float:
    """``N + 1 + 1/(N - 1)``: for ``m`` above it, sets of finite perimeter
    whose ``m``-density points are all interior reduce to the trivial cases.

    Shipped as a documented constant only; the half-space boundary (slope
    ``N``) sits below it.
    """
    if dim < 2:
        raise DomainError("threshold defined for dimension >= 2")
    return dim + 1 + 1.0 / (dim - 1)


def ball_volume(dim: int, r: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * r**dim


def cap_volume(dim: int, r: float, height: float) -> float:
    """Volume of the part of ``B_r`` beyond a plane at depth ``height`` from the rim."""
    if height <= 0:
        return 0.0
    if height >= 2 * r:
        return ball_volume(dim, r)
    if height > r:
        return ball_volume(dim, r) - cap_volume(dim, r, 2 * r - height)
    if dim == 1:
        return height
    x = (2 * r * height - height**2) / r**2
    return 0.5 * ball_volume(dim, r) * float(special.betainc((dim + 1) / 2, 0.5, x))


@dataclass(frozen=True)
class PointSet:
    """A measurable set by membership predicate.

    ``contains`` maps points ``(M, N)`` to a boolean array ``(N,)``.
    ``exact_deficit(P, r)`` returns the closed-form deficit, or ``None`` when
    no closed form is known at that probe.
    """

    dim: int
    contains: Callable[[np.ndarray], np.ndarray]
    exact_deficit: Optional[Callable[[np.ndarray, float], Optional[float]]] = None
    name: str = "set"
    box: Optional[tuple] = None

    def __call__(self, point) -> bool:
        X = np.asarray(point, dtype=float).reshape(self.dim, 1)
        return bool(self.contains(X)[0])

    def known_deficit(self, P, r) -> Optional[float]:
        if self.exact_deficit is None:
            return None
        return self.exact_deficit(np.asarray(P, dtype=float), float(r))


def _unit(v, dim):
    v = np.asarray(v if v is not None else np.eye(dim)[0], dtype=float)
    if v.shape != (dim,):
        raise DomainError(f"normal has shape {v.shape}, expected ({dim},)")
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("normal must be nonzero")
    return v / n


def _full(dim, **_):
    return PointSet(dim, lambda X: np.ones(X.shape[1], dtype=bool), lambda P, r: 0.0, "full")


def _empty(dim, **_):
    return PointSet(dim, lambda X: np.zeros(X.shape[1], dtype=bool),
                    lambda P, r: ball_volume(dim, r), "empty")


def _half_space(dim, normal=None, offset=0.0, **_):
    n = _unit(normal, dim)
    offset = float(offset)

    def exact(P, r):
        depth = offset - float(n @ P)  # distance from P to the plane, positive inside
        return cap_volume(dim, r, r - depth)

    return PointSet(dim, lambda X: n @ X <= offset, exact, "half-space")


def _hyperplane(dim, normal=None, offset=0.0, **_):
    n = _unit(normal, dim)
    offset = float(offset)
    return PointSet(dim, lambda X: n @ X == offset, lambda P, r: ball_volume(dim, r), "hyperplane")


def _ball(dim, center=None, radius=1.0, **_):
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    R = float(radius)

    def contains(X):
        return np.sum((X - c[:, None]) ** 2, axis=0) <= R * R

    def exact(P, r):
        dd = float(np.linalg.norm(P - c))
        full = ball_volume(dim, r)
        if dd + r <= R:
            return 0.0
        if dd >= r + R:
            return full
        if dd + R <= r:
            return full - ball_volume(dim, R)
        a = (dd * dd + r * r - R * R) / (2 * dd)  # plane position measured from P
        inter = cap_volume(dim, r, r - a) + cap_volume(dim, R, R - (dd - a))
        return full - inter

    return PointSet(dim, contains, exact, "ball")


def _cusp_area(k, r):
    """Area of ``{0 < x, |y| < x^k}`` inside ``B_r(0)``."""
    g = lambda x: x**k - math.sqrt(max(r * r - x * x, 0.0))
    xs = optimize.brentq(g, 0.0, r) if g(r) > 0 else r
    inner = 2.0 * xs ** (k + 1) / (k + 1)
    # circular segment beyond x = xs
    outer = r * r * math.acos(min(xs / r, 1.0)) - xs * math.sqrt(max(r * r - xs * xs, 0.0))
    return inner + outer


def _cusp(dim=2, k=2, apex=None, **_):
    """Complement of the cusp ``{0 < x1 - a1, |x2 - a2| < (x1 - a1)^k}`` in the plane."""
    if dim != 2:
        raise DomainError("cusp sets live in dimension 2")
    k = int(k)
    if k < 1:
        raise DomainError(f"cusp order must be >= 1, got {k}")
    a = np.zeros(2) if apex is None else np.asarray(apex, dtype=float)

    def contains(X):
        u = X[0] - a[0]
        v = X[1] - a[1]
        inside = (u > 0) & (np.abs(v) < np.where(u > 0, u, 0.0) ** k)
        return ~inside

    def exact(P, r):
        if not np.allclose(P, a, rtol=0, atol=0):
            return None
        return _cusp_area(k, r)

    return PointSet(2, contains, exact, f"cusp({k})")


def _complement(dim=None, of=None, **_):
    S = of if isinstance(of, PointSet) else _nested(of, dim) if isinstance(of, dict) else None
    if S is None:
        raise DomainError("complement-of needs a set in 'of'")

    def exact(P, r):
        h = S.known_deficit(P, r)
        return None if h is None else ball_volume(S.dim, r) - h

    return PointSet(S.dim, lambda X: ~S.contains(X), exact, f"complement-of({S.name})")


def _intersection(dim=None, sets=None, **_):
    parts = [s if isinstance(s, PointSet) else _nested(s, dim) for s in (sets or [])]
    if len(parts) != 2:
        raise DomainError("intersection takes exactly two sets")
    S1, S2 = parts
    if S1.dim != S2.dim:
        raise DomainError("intersection of sets in different dimensions")

    def exact(P, r):
        h1 = S1.known_deficit(P, r)
        h2 = S2.known_deficit(P, r)
        if h1 == 0.0:
            return h2
        if h2 == 0.0:
            return h1
        return None

    return PointSet(S1.dim, lambda X: S1.contains(X) & S2.contains(X), exact,
                    f"intersection({S1.name},{S2.name})")


def _nested(spec, dim):
    spec = dict(spec)
    if dim is not None:
        spec.setdefault("dim", dim)
    return canonical_set(**spec)


_CANONICAL = {
    "full": _full,
    "empty": _empty,
    "half-space": _half_space,
    "hyperplane": _hyperplane,
    "ball": _ball,
    "cusp": _cusp,
    "complement-of": _complement,
    "intersection": _intersection,
}


def canonical_set(name: str, dim: int = 2, **params) -> PointSet:
    """Named example sets with closed-form deficits.

    ``full``, ``empty``, ``half-space`` (``normal``, ``offset``; the set
    ``x . n <= offset``), ``hyperplane`` (``normal``, ``offset``), ``ball``
    (``center``, ``radius``; closed), ``cusp`` (``k``, ``apex``; the
    complement of the cusp, planar), ``complement-of`` (``of``) and
    ``intersection`` (``sets``).  Nested sets may be given as dicts with a
    ``name`` key.
    """
    try:
        build = _CANONICAL[name]
    except KeyError:
        raise DomainError(f"unknown set {name!r}; known: {sorted(_CANONICAL)}") from None
    return build(dim=dim, **params)


def zero_set(form: MatrixForm, eps: float = 0.0) -> PointSet:
    """``{x : max |coefficient of form at x| <= eps}`` as a point set."""
    return PointSet(form.dim, lambda X: zero_mask(form, X, eps), None, "zero-set",
                    box=form.domain.box)


# ---------------------------------------------------------------------------
# estimation


@dataclass
class DeficitEstimate:
    radius: float
    value: float
    ci_low: float
    ci_high: float
    samples: int
    hits: int
    exact: bool


def _generator(seed, radius_index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(radius_index)])))


def _sample_ball(rng, P, r, n, chunk=65536):
    """``n`` uniform points in ``B_r(P)`` by rejection from the circumscribed box."""
    dim = P.size
    out = []
    got = 0
    while got < n:
        m = max(chunk, 2 * (n - got))
        U = rng.uniform(-1.0, 1.0, size=(dim, m))
        U = U[:, np.sum(U * U, axis=0) <= 1.0]
        out.append(U[:, : n - got])
        got += out[-1].shape[1]
    return P[:, None] + r * np.concatenate(out, axis=1)


def clopper_pearson(hits, n, level=0.95):
    alpha = 1.0 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(stats.beta.ppf(1 - alpha / 2, hits + 1, n - hits))
    return lo, hi


def _check_ball(E: PointSet, P, r):
    if E.box is None:
        return
    lo = np.array([b[0] for b in E.box])
    hi = np.array([b[1] for b in E.box])
    if np.any(P - r < lo) or np.any(P + r > hi):
        raise DomainError(f"ball B({P.tolist()}, {r}) leaves the ambient box {E.box}")


def deficit(E: PointSet, P, r: float, n: int = 100_000, seed: int = 0, radius_index: int = 0,
            use_exact: bool = True) -> DeficitEstimate:
    """Estimate ``vol(B_r(P) \\ E)`` with a 95% Clopper-Pearson interval.

    Uses the closed form when ``use_exact`` and one is known.  Otherwise
    ``n`` uniform samples from the ball, drawn from a Philox stream keyed by
    ``(seed, radius_index)``.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (E.dim,):
        raise DomainError(f"probe of shape {P.shape} for a set in dimension {E.dim}")
    if r <= 0:
        raise DomainError(f"radius must be positive, got {r}")
    if n < 1:
        raise DomainError("need at least one sample")
    _check_ball(E, P, r)
    vol = ball_volume(E.dim, r)
    if use_exact:
        h = E.known_deficit(P, r)
        if h is not None:
            h = min(max(h, 0.0), vol)
            return DeficitEstimate(float(r), h, h, h, 0, 0, True)
    X = _sample_ball(_generator(seed, radius_index), P, r, n)
    hits = int(np.count_nonzero(~np.asarray(E.contains(X), dtype=bool)))
    lo, hi = clopper_pearson(hits, n)
    return DeficitEstimate(float(r), vol * hits / n, vol * lo, vol * hi, n, hits, False)


def dyadic_schedule(r0: float, count: int) -> List[float]:
    return [r0 * 2.0**-k for k in range(count)]


@dataclass
class DensityReport:
    probe: tuple
    dim: int
    estimates: List[DeficitEstimate]
    slope: float
    stderr: float
    exact_zero: bool
    cap: float
    fitted: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def radii(self):
        return [e.radius for e in self.estimates]

    def verdicts(self, ms=None, margin=0.2):
        ms = ms if ms is not None else range(1, self.dim + 2)
        return {str(m): classify(self, m, margin) for m in ms}

    def to_json(self, margin=0.2):
        return {
            "probe": list(self.probe),
            "dim": self.dim,
            "slope": _finite_or_str(self.slope),
            "stderr": _finite_or_str(self.stderr),
            "exact_zero": self.exact_zero,
            "cap": self.cap,
            "fitted_radii": self.fitted,
            "verdicts": self.verdicts(margin=margin),
            "estimates": [e.__dict__ for e in self.estimates],
            "notes": self.notes,
        }

    def csv_rows(self):
        yield ("r", "h_hat", "ci_low", "ci_high", "samples", "hits", "exact")
        for e in self.estimates:
            yield (e.radius, e.value, e.ci_low, e.ci_high, e.samples, e.hits, e.exact)


def _finite_or_str(x):
    return x if math.isfinite(x) else str(x)


def _fit(estimates):
    """Log-log slope and standard error over nonzero deficits."""
    pts = [e for e in estimates if e.value > 0]
    if len(pts) < 2:
        return math.nan, math.inf, len(pts)
    x = np.log([e.radius for e in pts])
    y = np.log([e.value for e in pts])
    if all(e.exact for e in pts):
        w = np.ones_like(x)
    else:
        # delta method: var(log p_hat) ~ (1 - p) / hits
        w = []
        for e in pts:
            if e.exact:
                w.append(1e12)
            else:
                p = e.hits / e.samples
                w.append(1.0 / ((1.0 - p) / e.hits + 1e-12))
        w = np.asarray(w)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    resid = y - ym - slope * (x - xm)
    dof = len(pts) - 2
    if all(e.exact for e in pts):
        se = math.sqrt(np.sum(resid**2) / dof / sxx) if dof > 0 else 0.0
    else:
        se = math.sqrt(1.0 / sxx)
        if dof > 0:
            chi2 = float(np.sum(w * resid**2)) / dof
            if chi2 > 1.0:
                se *= math.sqrt(chi2)
    return slope, float(se), len(pts)


def density_degree(E: PointSet, P, schedule, n: int = 100_000, seed: int = 0,
                   use_exact: bool = True) -> DensityReport:
    """Fitted exponent of the deficit of ``E`` at ``P`` over ``schedule``."""
    schedule = sorted((float(r) for r in schedule), reverse=True)
    if len(schedule) < 4:
        raise DomainError("schedule needs at least 4 radii")
    ests = [deficit(E, P, r, n, seed, k, use_exact) for k, r in enumerate(schedule)]
    cap = degree_cap(E.dim)
    notes = []
    if all(e.value == 0 for e in ests):
        return DensityReport(tuple(float(v) for v in P), E.dim, ests, cap, 0.0, True, cap, 0,
                             ["all deficits zero"])
    slope, se, used = _fit(ests)
    if used < len(ests):
        notes.append(f"{len(ests) - used} radii with zero deficit left out of the fit")
    if used < 2:
        notes.append("fewer than two nonzero deficits; slope undetermined")
    return DensityReport(tuple(float(v) for v in P), E.dim, ests, slope, se, False, cap, used, notes)


def classify(report: DensityReport, m: float, margin: float = 0.2) -> str:
    """``superdense`` (an ``m``-density point), ``not``, or ``inconclusive``."""
    if report.exact_zero:
        return SUPERDENSE if m <= report.cap else INCONCLUSIVE
    d, se = report.slope, report.stderr
    if not (math.isfinite(d) and math.isfinite(se)):
        return INCONCLUSIVE
    if d - se > m + margin:
        return SUPERDENSE
    if d + se < m - margin:
        return NOT_DENSE
    return INCONCLUSIVE
