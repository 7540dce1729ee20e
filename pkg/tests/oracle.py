"""Independent sympy implementation of matrix-valued exterior calculus.

A form is ``(degree, dim, rows)`` with ``rows[i][j]`` a dict from sorted
index tuples to sympy expressions.  Signs come from sympy's permutation
parity, not from the package.
"""

import itertools

import sympy as sp
from sympy.combinatorics import Permutation

from superform.fields import PolyField


def symbols(dim):
    return sp.symbols(f"x1:{dim + 1}")


def poly_to_sympy(poly, xs):
    return sp.Add(*[sp.Rational(c) * sp.Mul(*[x**e for x, e in zip(xs, exps)])
                    for exps, c in poly.terms.items()])


def from_form(omega):
    xs = symbols(omega.dim)
    rows = []
    for row in omega.entries:
        new = []
        for entry in row:
            d = {}
            for k, f in entry.items():
                assert isinstance(f, PolyField)
                d[k.indices] = poly_to_sympy(f.poly, xs)
            new.append(d)
        rows.append(new)
    return omega.degree, omega.dim, rows


def _clean(d):
    out = {}
    for k, v in d.items():
        v = sp.expand(v)
        if v != 0:
            out[k] = v
    return out


def _sorted_sign(seq):
    if len(set(seq)) < len(seq):
        return 0, None
    order = sorted(range(len(seq)), key=lambda i: seq[i])
    return (-1 if Permutation(order).is_odd else 1), tuple(sorted(seq))


def scalar_wedge(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            s, k = _sorted_sign(ka + kb)
            if s:
                out[k] = out.get(k, 0) + s * va * vb
    return _clean(out)


def wedge(A, B):
    ha, dim, ra = A
    hb, _, rb = B
    L = len(ra)
    rows = []
    for i in range(L):
        row = []
        for j in range(L):
            acc = {}
            for k in range(L):
                for key, v in scalar_wedge(ra[i][k], rb[k][j]).items():
                    acc[key] = acc.get(key, 0) + v
            row.append(_clean(acc))
        rows.append(row)
    return ha + hb, dim, rows


def d(A):
    h, dim, rows = A
    xs = symbols(dim)
    out_rows = []
    for row in rows:
        new = []
        for entry in row:
            acc = {}
            for key, v in entry.items():
                for i in range(1, dim + 1):
                    s, k = _sorted_sign((i,) + key)
                    if s:
                        acc[k] = acc.get(k, 0) + s * sp.diff(v, xs[i - 1])
            new.append(_clean(acc))
        out_rows.append(new)
    return h + 1, dim, out_rows


def pullback(components, source_dim, A):
    """``components``: sympy expressions in the source symbols."""
    h, dim, rows = A
    xs = symbols(source_dim)
    ys = symbols(dim)
    sub = dict(zip(ys, components))
    J = sp.Matrix([[sp.diff(c, x) for x in xs] for c in components])
    out_rows = []
    for row in rows:
        new = []
        for entry in row:
            acc = {}
            for key, v in entry.items():
                v2 = v.subs(sub, simultaneous=True)
                for alpha in itertools.combinations(range(1, source_dim + 1), h):
                    minor = J.extract([k - 1 for k in key], [a - 1 for a in alpha]).det() if h else 1
                    acc[alpha] = acc.get(alpha, 0) + v2 * minor
            new.append(_clean(acc))
        out_rows.append(new)
    return h, source_dim, out_rows


def same(A, B):
    """Coefficient-map equality after expansion."""
    if A[0] != B[0] or len(A[2]) != len(B[2]):
        return False
    for ra, rb in zip(A[2], B[2]):
        for ea, eb in zip(ra, rb):
            keys = set(ea) | set(eb)
            if any(sp.expand(ea.get(k, 0) - eb.get(k, 0)) != 0 for k in keys):
                return False
    return True


def as_strings(A):
    """Frozen-literal form: ``[[{ "1,2": "x1*x2" }]]`` with sympy's str."""
    return [[{",".join(map(str, k)): str(v) for k, v in sorted(e.items())} for e in row] for row in A[2]]
