"""Maurer-Cartan forms of matrix group charts and Cartan development.

For a chart ``u -> z(u)`` of a matrix group, the Maurer-Cartan form is
``Gamma = z^-1 dz = sum_i z^-1 (dz/du_i) du_i``.  It satisfies
``d Gamma + Gamma ^ Gamma = 0``; :func:`mc_residual` measures how far an
arbitrary matrix 1-form is from that equation.

:func:`cartan_integrate` solves the development ODE ``f' = f phi(c')``
along a polyline with classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import DomainError, SingularMatrixError, StepSizeError
from .fields import (
    ChartDomain,
    ChartMap,
    PolyField,
    ScalarField,
    apply_function,
    constant,
    coordinate,
    reciprocal,
)
from .forms import MatrixForm, _det, _zero_high, entry_max_norm, exterior_derivative, pullback, wedge
from .multiindex import MultiIndex

__all__ = [
    "LieGroupChart",
    "CATALOG",
    "chart",
    "maurer_cartan",
    "mc_residual",
    "mc_residual_numeric",
    "left_translation",
    "cartan_integrate",
    "develop",
    "pulled_back_mc",
    "holonomy",
    "agreement_scan",
    "AgreementScan",
    "grid_points",
]


@dataclass
class LieGroupChart:
    """A chart ``u -> z(u)`` of an L x L matrix group.

    ``embed`` is an L x L nested list of scalar fields on ``domain``.
    ``translate(g, coords)`` gives the chart coordinates of ``z(g) z(u)`` as
    fields in ``coords``.  ``mc_closed_form`` optionally gives the
    ``du_i``-coefficient matrices of ``z^-1 dz`` in closed form (used when
    the embedding is not polynomial); it is checked against the numeric
    value before use.
    """

    name: str
    L: int
    domain: ChartDomain
    embed: List[List[ScalarField]]
    translate: Optional[Callable] = None
    mc_closed_form: Optional[List[List[List[object]]]] = None
    identity: Optional[tuple] = None

    @property
    def dim(self):
        return self.domain.dim

    def matrix(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.dim)
        return np.array([[f.eval(u) for f in row] for row in self.embed], dtype=float)

    def matrices(self, U) -> np.ndarray:
        """``z`` at points ``U`` of shape ``(dim, N)``; returns ``(N, L, L)``."""
        U = np.asarray(U, dtype=float)
        vals = np.array([[f.values(U) for f in row] for row in self.embed])
        return np.moveaxis(vals, -1, 0)

    def partial_matrices(self, U, i) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        vals = np.array([[f.partial(i).values(U) for f in row] for row in self.embed])
        return np.moveaxis(vals, -1, 0)

    def check_invertible(self, U) -> None:
        dets = np.linalg.det(self.matrices(U))
        bad = np.flatnonzero(np.abs(dets) < 1e-12)
        if bad.size:
            loc = np.asarray(U)[:, bad[0]]
            raise SingularMatrixError(f"z is singular on chart {self.name}", tuple(loc.tolist()))


def _fields(domain, rows):
    """Nested rows of literals: ints, fields, or callables of the coordinate list."""
    coords = [coordinate(domain, i) for i in range(1, domain.dim + 1)]
    out = []
    for row in rows:
        new_row = []
        for item in row:
            if callable(item) and not isinstance(item, ScalarField):
                item = item(coords)
            new_row.append(item if isinstance(item, ScalarField) else constant(domain, item))
        out.append(new_row)
    return out


def _gl1():
    dom = ChartDomain(((0.05, 20.0),))
    return LieGroupChart(
        "gl1+", 1, dom, _fields(dom, [[lambda u: u[0]]]),
        translate=lambda g, u: [g[0] * u[0]], identity=(1.0,),
    )


def _affine2():
    dom = ChartDomain(((0.05, 20.0), (-20.0, 20.0)))
    return LieGroupChart(
        "affine2", 2, dom,
        _fields(dom, [[lambda u: u[0], lambda u: u[1]], [0, 1]]),
        translate=lambda g, u: [g[0] * u[0], g[0] * u[1] + g[1]],
        identity=(1.0, 0.0),
    )


def _diag2():
    dom = ChartDomain(((0.05, 20.0), (0.05, 20.0)))
    return LieGroupChart(
        "diag2+", 2, dom,
        _fields(dom, [[lambda u: u[0], 0], [0, lambda u: u[1]]]),
        translate=lambda g, u: [g[0] * u[0], g[1] * u[1]],
        identity=(1.0, 1.0),
    )


def _so2():
    dom = ChartDomain(((-math.pi, math.pi),))
    t = coordinate(dom, 1)
    c, s = apply_function("cos", t), apply_function("sin", t)
    return LieGroupChart(
        "so2", 2, dom, [[c, -s], [s, c]],
        translate=lambda g, u: [u[0] + g[0]],
        mc_closed_form=[[[0, -1], [1, 0]]],
        identity=(0.0,),
    )


def _heisenberg():
    dom = ChartDomain(((-10.0, 10.0),) * 3)
    return LieGroupChart(
        "heisenberg", 3, dom,
        _fields(dom, [[1, lambda u: u[0], lambda u: u[2]], [0, 1, lambda u: u[1]], [0, 0, 1]]),
        translate=lambda g, u: [u[0] + g[0], u[1] + g[1], u[2] + g[2] + g[0] * u[1]],
        identity=(0.0, 0.0, 0.0),
    )


CATALOG: Dict[str, Callable[[], LieGroupChart]] = {
    "gl1+": _gl1,
    "affine2": _affine2,
    "diag2+": _diag2,
    "so2": _so2,
    "heisenberg": _heisenberg,
}


def chart(name: str) -> LieGroupChart:
    try:
        return CATALOG[name]()
    except KeyError:
        raise DomainError(f"unknown chart {name!r}; known: {sorted(CATALOG)}") from None


# ---------------------------------------------------------------------------
# Maurer-Cartan form


def _inverse(Z):
    """Adjugate over determinant, on scalar fields."""
    n = len(Z)
    det = _det(Z)
    if det is None or det.is_zero():
        raise SingularMatrixError("embedding has identically zero determinant", None)
    inv_det = reciprocal(det)
    if n == 1:
        return [[inv_det]]
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[Z[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = _det(minor)
            if cof is None:
                inv[i][j] = constant(det.domain, 0)
                continue
            if (i + j) % 2:
                cof = -cof
            inv[i][j] = cof * inv_det
    return inv


def _matmul(A, B):
    n = len(A)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            total = None
            for q in range(n):
                if A[i][q].is_zero() or B[q][j].is_zero():
                    continue
                term = A[i][q] * B[q][j]
                total = term if total is None else total + term
            row.append(total if total is not None else constant(A[0][0].domain, 0))
        out.append(row)
    return out


def _check_closed_form(G: LieGroupChart, coeffs, samples=64, tol=1e-12):
    rng = np.random.default_rng(0)
    lo, hi = G.domain.lo, G.domain.hi
    U = lo[:, None] + (hi - lo)[:, None] * rng.random((G.dim, samples))
    Z = G.matrices(U)
    Zinv = np.linalg.inv(Z)
    for i in range(1, G.dim + 1):
        expect = Zinv @ G.partial_matrices(U, i)
        given = np.array(coeffs[i - 1], dtype=float)
        err = float(np.max(np.abs(expect - given)))
        if err > tol:
            raise DomainError(f"closed-form Maurer-Cartan coefficients of {G.name} are off by {err:.3e}")


def maurer_cartan(G: LieGroupChart, closed_form: bool = True) -> MatrixForm:
    """``Gamma = z^-1 dz`` as a matrix 1-form on the chart.

    Coefficients are exact Laurent polynomials when the embedding is
    polynomial with a monomial determinant.  For charts with a verified
    closed form (``closed_form=True``) those coefficients are used instead
    of the numeric product.
    """
    dom = G.domain
    if closed_form and G.mc_closed_form is not None:
        _check_closed_form(G, G.mc_closed_form)
        entries = [[{} for _ in range(G.L)] for _ in range(G.L)]
        for i, mat in enumerate(G.mc_closed_form, start=1):
            key = MultiIndex((i,), dom.dim)
            for a in range(G.L):
                for b in range(G.L):
                    if mat[a][b] != 0:
                        entries[a][b][key] = constant(dom, mat[a][b])
        return MatrixForm(dom, 1, entries)
    Zinv = _inverse(G.embed)
    entries = [[{} for _ in range(G.L)] for _ in range(G.L)]
    for i in range(1, dom.dim + 1):
        dZ = [[f.partial(i) for f in row] for row in G.embed]
        prod = _matmul(Zinv, dZ)
        key = MultiIndex((i,), dom.dim)
        for a in range(G.L):
            for b in range(G.L):
                if not prod[a][b].is_zero():
                    entries[a][b][key] = prod[a][b]
    return MatrixForm(dom, 1, entries)


def mc_residual(phi: MatrixForm) -> MatrixForm:
    """``d phi + phi ^ phi``; zero exactly when the Maurer-Cartan equation holds."""
    if phi.degree != 1:
        raise DomainError(f"Maurer-Cartan residual needs a 1-form, got degree {phi.degree}")
    if phi.dim < 2:
        # no 2-forms on a line: the equation holds vacuously
        return _zero_high(phi.domain, 2, phi.L)
    return exterior_derivative(phi) + wedge(phi, phi)


def _numeric_embedding(G: LieGroupChart) -> LieGroupChart:
    embed = [[f.as_numeric(analytic=True) if isinstance(f, PolyField) else f for f in row] for row in G.embed]
    return LieGroupChart(G.name, G.L, G.domain, embed, G.translate, None, G.identity)


def mc_residual_numeric(G: LieGroupChart, points) -> float:
    """Max residual of ``z^-1 dz`` built on the numeric lane at ``points`` ``(dim, N)``."""
    gamma = maurer_cartan(_numeric_embedding(G), closed_form=False)
    return float(np.max(entry_max_norm(mc_residual(gamma), np.asarray(points, dtype=float))))


def left_translation(G: LieGroupChart, g, source: ChartDomain) -> ChartMap:
    """``u -> coordinates of z(g) z(u)`` from ``source`` into the chart."""
    if G.translate is None:
        raise DomainError(f"chart {G.name} has no left translation")
    coords = [coordinate(source, i) for i in range(1, source.dim + 1)]
    comps = [c if isinstance(c, ScalarField) else constant(source, c) for c in G.translate(tuple(g), coords)]
    fmap = ChartMap(source, G.domain, comps)
    corners = np.array(np.meshgrid(*[[lo, hi] for lo, hi in source.box])).reshape(source.dim, -1)
    image = fmap.values(corners)
    if not np.all(G.domain.contains(image)):
        raise DomainError(f"left translation by {tuple(g)} leaves chart {G.name} on {source.box}")
    return fmap


# ---------------------------------------------------------------------------
# development


def _segment_coefficients(phi, a, b, n):
    """``phi_{c(t)}(c')`` at the RK4 nodes ``t = k / (2n)`` of segment ``a -> b``."""
    v = b - a
    t = np.arange(2 * n + 1) / (2.0 * n)
    X = a[:, None] + v[:, None] * t[None, :]
    vals = phi.coefficient_values(X)  # (M, L, L, 2n+1)
    A = np.tensordot(v, vals, axes=(0, 0))  # (L, L, 2n+1)
    return np.moveaxis(A, -1, 0)


def _rk4_segment(A, f, n, out=None):
    h = 1.0 / n
    for k in range(n):
        A0, Am, A1 = A[2 * k], A[2 * k + 1], A[2 * k + 2]
        k1 = f @ A0
        k2 = (f + 0.5 * h * k1) @ Am
        k3 = (f + 0.5 * h * k2) @ Am
        k4 = (f + h * k3) @ A1
        f = f + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if out is not None:
            out.append(f)
    return f


def _run_path(phi, path, step, start, trajectory=False, steps=None):
    f = np.eye(phi.L) if start is None else np.array(start, dtype=float)
    traj = [f] if trajectory else None
    for seg, (a, b) in enumerate(zip(path[:-1], path[1:])):
        length = float(np.linalg.norm(b - a))
        if length == 0:
            continue
        n = steps[seg] if steps is not None else max(1, int(math.ceil(length / step - 1e-9)))
        A = _segment_coefficients(phi, a, b, n)
        f = _rk4_segment(A, f, n, traj)
    return f, traj


def cartan_integrate(
    phi: MatrixForm,
    path: Sequence,
    step: float = 1e-3,
    start=None,
    tol: Optional[float] = None,
    max_halvings: int = 6,
    trajectory: bool = False,
):
    """Develop ``phi`` along a polyline: solve ``f' = f phi(c')``, ``f(start) = start``.

    Classical RK4 with steps of at most ``step`` per unit length.  With
    ``tol`` set, the result is compared with a run at half the step; the
    step keeps halving until the two agree to ``tol`` (entrywise max) or
    :class:`StepSizeError` is raised after ``max_halvings``.

    Returns the final matrix, or ``(final, trajectory)`` where the
    trajectory lists ``f`` after every step.
    """
    if phi.degree != 1:
        raise DomainError(f"development needs a 1-form, got degree {phi.degree}")
    if step <= 0:
        raise StepSizeError(f"step must be positive, got {step}")
    path = [np.asarray(p, dtype=float).reshape(phi.dim) for p in path]
    if len(path) < 2:
        raise DomainError("a path needs at least two points")
    f, traj = _run_path(phi, path, step, start, trajectory)
    if tol is not None:
        for _ in range(max_halvings):
            step /= 2.0
            g, gtraj = _run_path(phi, path, step, start, trajectory)
            diff = float(np.max(np.abs(g - f)))
            f, traj = g, gtraj
            if diff <= tol:
                break
        else:
            raise StepSizeError(f"step halving did not reach {tol:.1e} (last change {diff:.3e})")
    return (f, traj) if trajectory else f


def develop(phi: MatrixForm, base, point, step: float = 1e-3, steps: Optional[int] = None, start=None):
    """``f(point)`` developed along the straight ray from ``base``.

    Passing ``steps`` fixes the step count so nearby points share one
    discretization (needed for finite-difference derivatives of ``f``).
    """
    base = np.asarray(base, dtype=float).reshape(phi.dim)
    point = np.asarray(point, dtype=float).reshape(phi.dim)
    f, _ = _run_path(phi, [base, point], step, start, steps=None if steps is None else [steps])
    return f


def pulled_back_mc(phi: MatrixForm, base, point, step=1e-3, fd_step=1e-4):
    """``(f^-1 df)`` at ``point`` for the ray-developed ``f``, as ``(dim, L, L)``.

    Derivatives are fourth-order central differences over a common
    discretization of the rays.
    """
    base = np.asarray(base, dtype=float)
    point = np.asarray(point, dtype=float)
    n = max(1, int(math.ceil(np.linalg.norm(point - base) / step)))
    f0 = develop(phi, base, point, steps=n)
    f0inv = np.linalg.inv(f0)
    out = []
    for i in range(phi.dim):
        e = np.zeros(phi.dim)
        e[i] = fd_step
        fp1 = develop(phi, base, point + e, steps=n)
        fm1 = develop(phi, base, point - e, steps=n)
        fp2 = develop(phi, base, point + 2 * e, steps=n)
        fm2 = develop(phi, base, point - 2 * e, steps=n)
        df = (8 * (fp1 - fm1) - (fp2 - fm2)) / (12 * fd_step)
        out.append(f0inv @ df)
    return np.array(out)


def holonomy(phi: MatrixForm, loop: Sequence, step: float = 1e-3) -> float:
    """``max |f_loop - I|`` after developing around a closed polyline."""
    loop = [np.asarray(p, dtype=float) for p in loop]
    if not np.allclose(loop[0], loop[-1]):
        loop = loop + [loop[0]]
    f = cartan_integrate(phi, loop, step)
    return float(np.max(np.abs(f - np.eye(phi.L))))


@dataclass
class AgreementScan:
    points: np.ndarray  # (dim, K)
    residuals: np.ndarray  # (K,)
    grid: np.ndarray  # (dim, N)
    grid_residuals: np.ndarray  # (N,)
    eps: float

    @property
    def count(self):
        return self.points.shape[1]


def agreement_scan(fmap: ChartMap, G: LieGroupChart, phi: MatrixForm, grid, eps: float) -> AgreementScan:
    """Grid points where ``|f^* Gamma - phi|`` (entrywise max) is at most ``eps``."""
    gamma = maurer_cartan(G)
    pulled = pullback(fmap, gamma)
    diff = pulled - phi
    grid = np.asarray(grid, dtype=float)
    res = entry_max_norm(diff, grid)
    keep = res <= eps
    return AgreementScan(grid[:, keep], res[keep], grid, res, eps)


def grid_points(domain: ChartDomain, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in domain.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])
