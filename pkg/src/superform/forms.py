"""L x L matrices of differential h-forms over a common chart domain.

Each matrix entry is a dict ``MultiIndex -> ScalarField``; absent keys are
zero coefficients and exact polynomial zeros are pruned, so two forms
compare equal exactly when their pruned coefficient maps agree.
"""

from __future__ import annotations

import itertools
from numbers import Number
from typing import Dict, Sequence

import numpy as np

from .errors import CapabilityError, DomainError
from .fields import ChartDomain, ChartMap, ScalarField, as_field, constant
from .multiindex import MultiIndex, enumerate_multiindices, merge, permutation_sign

__all__ = [
    "MatrixForm",
    "wedge",
    "exterior_derivative",
    "pullback",
    "evaluate",
    "is_zero_at",
    "zero_mask",
    "entry_max_norm",
    "restrict",
]

Entry = Dict[MultiIndex, ScalarField]


def _prune(entry: Entry) -> Entry:
    return {k: v for k, v in entry.items() if not v.is_zero()}


def _accumulate(entry: Entry, key: MultiIndex, value: ScalarField):
    if value.is_zero():
        return
    if key in entry:
        total = entry[key] + value
        if total.is_zero():
            del entry[key]
        else:
            entry[key] = total
    else:
        entry[key] = value


class MatrixForm:
    """An element of Mat_L C^p F^h on a box chart domain."""

    __slots__ = ("L", "degree", "domain", "entries")

    def __init__(self, domain: ChartDomain, degree: int, entries: Sequence[Sequence[Entry]]):
        L = len(entries)
        if L < 1 or any(len(row) != L for row in entries):
            raise DomainError("entries must form a square, non-empty matrix")
        if not 0 <= degree <= domain.dim:
            raise DomainError(f"degree {degree} out of range 0..{domain.dim}")
        rows = []
        for row in entries:
            new_row = []
            for entry in row:
                clean = {}
                for key, coeff in entry.items():
                    if not isinstance(key, MultiIndex):
                        key = MultiIndex(tuple(key), domain.dim)
                    if key.dim != domain.dim or key.degree != degree:
                        raise DomainError(f"component {key} does not belong to I({domain.dim},{degree})")
                    coeff = as_field(domain, coeff)
                    if coeff.domain.dim != domain.dim:
                        raise DomainError("coefficient field on a different domain")
                    if not coeff.is_zero():
                        clean[key] = coeff
                new_row.append(clean)
            rows.append(tuple(new_row))
        self.L = L
        self.degree = degree
        self.domain = domain
        self.entries = tuple(rows)

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, domain, degree, L=1):
        return cls(domain, degree, [[{} for _ in range(L)] for _ in range(L)])

    @classmethod
    def scalar(cls, domain, degree, entry):
        """L = 1 form from a dict ``{index tuple: coefficient}``."""
        return cls(domain, degree, [[entry]])

    @classmethod
    def from_function(cls, domain, degree, L, fill):
        """Build entries from ``fill(i, j) -> dict`` with 1-based i, j."""
        return cls(domain, degree, [[fill(i, j) for j in range(1, L + 1)] for i in range(1, L + 1)])

    @classmethod
    def _raw(cls, domain, degree, rows):
        f = cls.__new__(cls)
        f.L = len(rows)
        f.degree = degree
        f.domain = domain
        f.entries = tuple(tuple(_prune(e) for e in row) for row in rows)
        return f

    # inspection -----------------------------------------------------------
    @property
    def dim(self):
        return self.domain.dim

    def components(self):
        """Basis indices in lexicographic order."""
        return enumerate_multiindices(self.dim, self.degree)

    def entry(self, i, j) -> Entry:
        """Entry ``(i, j)`` with 1-based indices."""
        return self.entries[i - 1][j - 1]

    def coefficient(self, i, j, index) -> ScalarField:
        if not isinstance(index, MultiIndex):
            index = MultiIndex(tuple(index), self.dim)
        return self.entries[i - 1][j - 1].get(index, constant(self.domain, 0))

    def fields(self):
        for row in self.entries:
            for entry in row:
                yield from entry.values()

    def is_zero(self):
        return all(not entry for row in self.entries for entry in row)

    @property
    def is_polynomial(self):
        return all(f.is_polynomial for f in self.fields())

    def __eq__(self, other):
        if not isinstance(other, MatrixForm):
            return NotImplemented
        if (self.L, self.degree, self.dim) != (other.L, other.degree, other.dim):
            return False
        for r1, r2 in zip(self.entries, other.entries):
            for e1, e2 in zip(r1, r2):
                if e1.keys() != e2.keys():
                    return False
                for k in e1:
                    eq = e1[k] == e2[k]
                    if eq is NotImplemented or not eq:
                        return False
        return True

    __hash__ = None

    def __repr__(self):
        return f"MatrixForm(L={self.L}, degree={self.degree}, dim={self.dim}, {self})"

    def __str__(self):
        from .literals import format_form

        return format_form(self)

    # linear structure -----------------------------------------------------
    def _check_compatible(self, other):
        if not isinstance(other, MatrixForm):
            raise TypeError(f"expected MatrixForm, got {type(other).__name__}")
        if other.L != self.L or other.dim != self.dim:
            raise DomainError(f"forms of size {self.L}/{other.L} on dimension {self.dim}/{other.dim}")

    def __add__(self, other):
        self._check_compatible(other)
        if other.degree != self.degree:
            raise DomainError(f"cannot add forms of degree {self.degree} and {other.degree}")
        rows = []
        for r1, r2 in zip(self.entries, other.entries):
            row = []
            for e1, e2 in zip(r1, r2):
                out = dict(e1)
                for k, v in e2.items():
                    _accumulate(out, k, v)
                row.append(out)
            rows.append(row)
        return MatrixForm._raw(self.domain, self.degree, rows)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, a):
        """Multiply by a number or a scalar field."""
        rows = [[{k: v * a for k, v in e.items()} for e in row] for row in self.entries]
        return MatrixForm._raw(self.domain, self.degree, rows)

    def __mul__(self, a):
        if isinstance(a, (Number, ScalarField)):
            return self.scale(a)
        return NotImplemented

    __rmul__ = __mul__

    def matmul_constant(self, A, left=True):
        """``A @ self`` (or ``self @ A``) for a constant L x L matrix ``A``."""
        A = np.asarray(A, dtype=object)
        rows = []
        for i in range(self.L):
            row = []
            for j in range(self.L):
                out = {}
                for q in range(self.L):
                    a, e = (A[i, q], self.entries[q][j]) if left else (A[q, j], self.entries[i][q])
                    if a == 0:
                        continue
                    for k, v in e.items():
                        _accumulate(out, k, v * a)
                row.append(out)
            rows.append(row)
        return MatrixForm._raw(self.domain, self.degree, rows)

    def wedge(self, other):
        return wedge(self, other)

    def d(self):
        return exterior_derivative(self)

    def __xor__(self, other):
        return wedge(self, other)

    # numerics -------------------------------------------------------------
    def coefficient_values(self, X) -> np.ndarray:
        """Coefficients at points ``X`` of shape ``(M, *batch)``.

        Returns an array of shape ``(C(M, h), L, L, *batch)`` in
        lexicographic component order.
        """
        X = np.asarray(X, dtype=float)
        self.domain.check(X)
        return self._coefficient_values(X)

    def _coefficient_values(self, X):
        comps = self.components()
        pos = {c: n for n, c in enumerate(comps)}
        out = np.zeros((len(comps), self.L, self.L) + X.shape[1:])
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                for k, f in entry.items():
                    out[pos[k], i, j] = f._eval(X)
        return out


# ---------------------------------------------------------------------------
# calculus


def wedge(lam: MatrixForm, mu: MatrixForm) -> MatrixForm:
    """``(lam ^ mu)^(ij) = sum_q lam^(iq) ^ mu^(qj)``."""
    lam._check_compatible(mu)
    deg = lam.degree + mu.degree
    if deg > lam.dim:
        raise DomainError(f"wedge degree {deg} exceeds dimension {lam.dim}")
    L = lam.L
    rows = []
    for i in range(L):
        row = []
        for j in range(L):
            out: Entry = {}
            for q in range(L):
                a, b = lam.entries[i][q], mu.entries[q][j]
                if not a or not b:
                    continue
                for ka, fa in a.items():
                    for kb, fb in b.items():
                        m = merge(ka, kb)
                        if m is None:
                            continue
                        prod = fa * fb
                        _accumulate(out, m.index, prod if m.sign > 0 else -prod)
            row.append(out)
        rows.append(row)
    return MatrixForm._raw(lam.domain, deg, rows)


def exterior_derivative(omega: MatrixForm) -> MatrixForm:
    """Entrywise d: ``d(f dx_a) = sum_i D_i f dx_i ^ dx_a``."""
    if omega.degree >= omega.dim:
        raise DomainError(f"cannot differentiate a {omega.degree}-form on dimension {omega.dim}")
    M = omega.dim
    basis = [MultiIndex((i,), M) for i in range(1, M + 1)]
    rows = []
    for row in omega.entries:
        new_row = []
        for entry in row:
            out: Entry = {}
            for k, f in entry.items():
                if not f.can_differentiate():
                    raise CapabilityError(f"coefficient {f} is {f.smoothness}, not differentiable")
                for i, ei in enumerate(basis, start=1):
                    if i in k.indices:
                        continue
                    df = f.partial(i)
                    if df.is_zero():
                        continue
                    m = merge(ei, k)
                    _accumulate(out, m.index, df if m.sign > 0 else -df)
            new_row.append(out)
        rows.append(new_row)
    return MatrixForm._raw(omega.domain, omega.degree + 1, rows)


def _det(mat):
    """Leibniz expansion; entries are scalar fields."""
    n = len(mat)
    if n == 0:
        return None
    total = None
    for perm in itertools.permutations(range(n)):
        term = None
        for r, c in enumerate(perm):
            f = mat[r][c]
            if f.is_zero():
                term = None
                break
            term = f if term is None else term * f
        else:
            if term is None:
                continue
            if permutation_sign(perm) < 0:
                term = -term
            total = term if total is None else total + term
    return total


def pullback(fmap: ChartMap, omega: MatrixForm) -> MatrixForm:
    """``f^* omega`` on the source domain of ``fmap``.

    The ``dx_alpha`` coefficient of ``f^*(g dy_beta)`` is
    ``(g o f) * det(J[beta, alpha])``.  Degrees above the source dimension
    give the zero form.
    """
    if fmap.target.dim != omega.dim:
        raise DomainError(f"map into dimension {fmap.target.dim}, form on dimension {omega.dim}")
    h = omega.degree
    src = fmap.source
    if h > src.dim:
        return _zero_high(src, h, omega.L)
    jac = fmap.jacobian() if h > 0 else None
    minors = {}

    def minor(beta, alpha):
        key = (beta, alpha)
        if key not in minors:
            sub = [[jac[b - 1][a - 1] for a in alpha.indices] for b in beta.indices]
            minors[key] = _det(sub)
        return minors[key]

    src_basis = enumerate_multiindices(src.dim, h)
    empty = MultiIndex((), src.dim)
    composed = {}
    rows = []
    for row in omega.entries:
        new_row = []
        for entry in row:
            out: Entry = {}
            for beta, g in entry.items():
                gid = id(g)
                if gid not in composed:
                    composed[gid] = g.compose(fmap)
                gf = composed[gid]
                if gf.is_zero():
                    continue
                if h == 0:
                    _accumulate(out, empty, gf)
                    continue
                for alpha in src_basis:
                    det = minor(beta, alpha)
                    if det is None or det.is_zero():
                        continue
                    _accumulate(out, alpha, gf * det)
            new_row.append(out)
        rows.append(new_row)
    return MatrixForm._raw(src, h, rows)


class _HighDegreeZero(MatrixForm):
    """Zero form whose degree exceeds the domain dimension (I(m, h) is empty)."""

    def __init__(self, domain, degree, L):
        self.L = L
        self.degree = degree
        self.domain = domain
        self.entries = tuple(tuple({} for _ in range(L)) for _ in range(L))

    def components(self):
        return []


def _zero_high(domain, degree, L):
    return _HighDegreeZero(domain, degree, L)


def evaluate(omega: MatrixForm, point, vectors=()) -> np.ndarray:
    """``omega_P(v_1, ..., v_h)`` as an L x L array."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if len(vectors) != omega.degree:
        raise DomainError(f"{omega.degree}-form needs {omega.degree} vectors, got {len(vectors)}")
    for v in vectors:
        if v.shape != (omega.dim,):
            raise DomainError(f"vector of shape {v.shape} on dimension {omega.dim}")
    P = np.asarray(point, dtype=float)
    coeffs = omega.coefficient_values(P)
    out = np.zeros((omega.L, omega.L))
    V = np.array(vectors).reshape(len(vectors), omega.dim)
    for n, alpha in enumerate(omega.components()):
        rows = [a - 1 for a in alpha.indices]
        det = np.linalg.det(V[:, rows].T) if rows else 1.0
        out += coeffs[n] * det
    return out


def entry_max_norm(omega: MatrixForm, X) -> np.ndarray:
    """Max |coefficient| over entries and components at each point."""
    X = np.asarray(X, dtype=float)
    vals = omega.coefficient_values(X)
    if vals.shape[0] == 0:
        return np.zeros(X.shape[1:])
    return np.max(np.abs(vals.reshape((-1,) + X.shape[1:])), axis=0)


def is_zero_at(omega: MatrixForm, point, eps=0.0) -> bool:
    """True iff every coefficient of ``omega`` at ``point`` is within ``eps`` of 0."""
    return bool(entry_max_norm(omega, np.asarray(point, dtype=float)) <= eps)


def zero_mask(omega: MatrixForm, X, eps=0.0) -> np.ndarray:
    """Vectorized :func:`is_zero_at` over points of shape ``(M, *batch)``."""
    return entry_max_norm(omega, X) <= eps


def _rebind(f: ScalarField, domain: ChartDomain) -> ScalarField:
    from .fields import NumericField, PolyField

    if isinstance(f, PolyField):
        return PolyField(domain, f.poly)
    partials = (lambda i: _rebind(f.partial(i), domain)) if f.can_differentiate() else None
    return NumericField(domain, f._eval, partials, f.smoothness, f.label)


def restrict(omega: MatrixForm, domain: ChartDomain) -> MatrixForm:
    """``omega|_U`` for a sub-box ``U`` of the form's domain."""
    if domain.dim != omega.dim:
        raise DomainError(f"sub-box of dimension {domain.dim} for a form on dimension {omega.dim}")
    if np.any(domain.lo < omega.domain.lo) or np.any(domain.hi > omega.domain.hi):
        raise DomainError(f"{domain.box} is not contained in {omega.domain.box}")
    rows = [[{k: _rebind(v, domain) for k, v in e.items()} for e in row] for row in omega.entries]
    return MatrixForm._raw(domain, omega.degree, rows)
