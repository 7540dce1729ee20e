"""Scalar coefficient fields on box-shaped chart domains.

Two bodies are supported.  :class:`PolyField` wraps an exact
:class:`~superform.polynomial.Polynomial`; :class:`NumericField` wraps a
vectorized callable together with an optional rule producing analytic
partial derivatives.  Any operation that touches a numeric operand yields a
numeric field, built lazily from closures, never tabulated.

Vectorized callables receive coordinates as an array of shape ``(M, *batch)``
and return an array of shape ``batch``.  They must be pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from numbers import Number
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, DomainError
from .polynomial import Polynomial

__all__ = [
    "Smoothness",
    "ChartDomain",
    "ScalarField",
    "PolyField",
    "NumericField",
    "ChartMap",
    "as_field",
    "coordinate",
    "constant",
    "numeric",
    "apply_function",
    "UNARY_FUNCTIONS",
]

FD_BASE_STEP = np.finfo(float).eps ** (1.0 / 3.0)


class Smoothness(IntEnum):
    C0 = 0
    C1 = 1
    C2 = 2
    CINF = 3

    def decremented(self):
        return self if self is Smoothness.CINF else Smoothness(max(self - 1, 0))

    def __str__(self):
        return "C^inf" if self is Smoothness.CINF else f"C^{int(self)}"


@dataclass(frozen=True)
class ChartDomain:
    """Closed box ``prod [lo_i, hi_i]`` in chart coordinates."""

    box: tuple

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if not box:
            raise DomainError("a chart domain needs at least one axis")
        for i, (lo, hi) in enumerate(box, start=1):
            if not lo < hi:
                raise DomainError(f"axis {i}: empty interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)

    @classmethod
    def cube(cls, dim, lo=-1.0, hi=1.0):
        return cls(((lo, hi),) * dim)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def lo(self):
        return np.array([b[0] for b in self.box])

    @property
    def hi(self):
        return np.array([b[1] for b in self.box])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, X) -> np.ndarray:
        """Membership mask for points of shape ``(M, *batch)``."""
        X = np.asarray(X, dtype=float)
        lo = self.lo.reshape((-1,) + (1,) * (X.ndim - 1))
        hi = self.hi.reshape((-1,) + (1,) * (X.ndim - 1))
        return np.all((X >= lo) & (X <= hi), axis=0)

    def check(self, X, what="point"):
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.dim:
            raise DomainError(f"{what} has dimension {X.shape[0]}, domain has {self.dim}")
        inside = self.contains(X)
        if not np.all(inside):
            bad = np.moveaxis(X, 0, -1)[~inside][0]
            raise DomainError(f"{what} {tuple(float(c) for c in bad)} outside domain {self.box}")

    def contains_ball(self, center, r) -> bool:
        c = np.asarray(center, dtype=float)
        return bool(np.all(c - r >= self.lo) and np.all(c + r <= self.hi))


def _broadcast(value, batch):
    value = np.asarray(value, dtype=float)
    if value.shape != batch:
        value = np.broadcast_to(value, batch).copy()
    return value


class ScalarField:
    """Common interface; see :class:`PolyField` and :class:`NumericField`."""

    domain: ChartDomain
    smoothness: Smoothness

    # evaluation
    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        self.domain.check(X)
        return self._eval(X)

    def _eval(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, point):
        return self.eval(point)

    def eval(self, point):
        X = np.asarray([float(c) for c in point])
        self.domain.check(X)
        return float(self._eval(X))

    # calculus
    def partial(self, i: int) -> "ScalarField":  # pragma: no cover - abstract
        raise NotImplementedError

    def compose(self, fmap: "ChartMap") -> "ScalarField":  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def is_polynomial(self) -> bool:
        return False

    def is_zero(self) -> bool:
        """True only when the field is known to vanish identically."""
        return False

    def can_differentiate(self) -> bool:
        return self.smoothness >= Smoothness.C1

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.domain.dim != self.domain.dim:
                raise DomainError(
                    f"fields on domains of dimension {self.domain.dim} and {other.domain.dim}"
                )
            return other
        if isinstance(other, Number):
            return constant(self.domain, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Number) and not isinstance(other, bool):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _add(self, other.scale(-1))

    def __rsub__(self, other):
        return (-self) + other

    def __truediv__(self, other):
        if isinstance(other, Number):
            if isinstance(other, (int, Fraction)):
                return self.scale(Fraction(1, 1) / other)
            return self.scale(1.0 / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _mul(self, reciprocal(other))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            return reciprocal(self) ** (-k)
        result = constant(self.domain, 1)
        for _ in range(k):
            result = result * self
        return result

    def scale(self, a) -> "ScalarField":  # pragma: no cover - abstract
        raise NotImplementedError


class PolyField(ScalarField):
    """Exact polynomial body; always ``C^inf``."""

    __slots__ = ("domain", "poly")
    smoothness = Smoothness.CINF

    def __init__(self, domain: ChartDomain, poly: Polynomial):
        if poly.nvars != domain.dim:
            raise DomainError(f"polynomial in {poly.nvars} variables on a {domain.dim}-dim domain")
        self.domain = domain
        self.poly = poly

    @property
    def is_polynomial(self):
        return True

    def is_zero(self):
        return self.poly.is_zero()

    def _eval(self, X):
        return self.poly.values(X)

    def eval(self, point):
        """Exact for rational points; float otherwise."""
        if len(point) != self.domain.dim:
            raise DomainError(f"point of dimension {len(point)} on a {self.domain.dim}-dim domain")
        self.domain.check(np.asarray([float(c) for c in point]))
        return self.poly.evaluate(list(point))

    def partial(self, i):
        if not 1 <= i <= self.domain.dim:
            raise DomainError(f"axis {i} out of range 1..{self.domain.dim}")
        return PolyField(self.domain, self.poly.derivative(i))

    def scale(self, a):
        return PolyField(self.domain, self.poly.scale(a))

    def compose(self, fmap):
        _check_compose(self, fmap)
        if all(c.is_polynomial for c in fmap.components):
            sub = self.poly.substitute([c.poly for c in fmap.components])
            if sub is not None:
                return PolyField(fmap.source, sub)
        return _lazy_compose(self, fmap)

    def as_numeric(self, smoothness=Smoothness.CINF, analytic=False):
        """Re-wrap as a numeric field (for testing the finite-difference path)."""
        partial = (lambda i: self.partial(i).as_numeric(smoothness, analytic)) if analytic else None
        return NumericField(self.domain, self.poly.values, partial, smoothness, label=f"({self})")

    def __eq__(self, other):
        if isinstance(other, PolyField):
            return self.domain.dim == other.domain.dim and self.poly == other.poly
        return NotImplemented

    __hash__ = None

    def __str__(self):
        return str(self.poly)

    def __repr__(self):
        return f"PolyField({self.poly})"


class NumericField(ScalarField):
    """Callable body with an optional analytic-partials rule.

    ``partials`` maps a 1-based axis to a :class:`ScalarField`.  Without it,
    derivatives are central differences with step
    ``cbrt(eps) * max(1, |x_i|)``, refined once by Richardson extrapolation
    when the field is at least ``C^2``.
    """

    __slots__ = ("domain", "func", "partials", "smoothness", "label")

    def __init__(
        self,
        domain: ChartDomain,
        func: Callable,
        partials: Optional[Callable[[int], ScalarField]] = None,
        smoothness: Smoothness = Smoothness.CINF,
        label: str = "<numeric>",
    ):
        self.domain = domain
        self.func = func
        self.partials = partials
        self.smoothness = Smoothness(smoothness)
        self.label = label

    def _eval(self, X):
        return _broadcast(self.func(X), X.shape[1:])

    def has_analytic_partials(self):
        return self.partials is not None

    def partial(self, i):
        if not 1 <= i <= self.domain.dim:
            raise DomainError(f"axis {i} out of range 1..{self.domain.dim}")
        if self.smoothness < Smoothness.C1:
            raise CapabilityError(f"cannot differentiate {self.smoothness} field {self.label}")
        if self.partials is not None:
            out = self.partials(i)
            if not isinstance(out, ScalarField):
                out = numeric(self.domain, out, smoothness=self.smoothness.decremented())
            if isinstance(out, NumericField) and out.smoothness > self.smoothness.decremented():
                out = NumericField(
                    out.domain, out.func, out.partials, self.smoothness.decremented(), out.label
                )
            return out
        return self._fd_partial(i)

    def _fd_partial(self, i):
        k = i - 1
        f = self._eval
        richardson = self.smoothness >= Smoothness.C2

        def central(X, h):
            step = np.zeros_like(X)
            step[k] = h
            return (f(X + step) - f(X - step)) / (2.0 * h)

        def deriv(X):
            X = np.asarray(X, dtype=float)
            h = FD_BASE_STEP * np.maximum(1.0, np.abs(X[k]))
            d1 = central(X, h)
            if not richardson:
                return d1
            d2 = central(X, h / 2.0)
            return (4.0 * d2 - d1) / 3.0

        return NumericField(
            self.domain, deriv, None, self.smoothness.decremented(), label=f"D{i}[{self.label}]"
        )

    def scale(self, a):
        if a == 0:
            return constant(self.domain, 0)
        if a == 1:
            return self
        af = float(a)
        f = self._eval
        partials = None
        if self.partials is not None or self.smoothness >= Smoothness.C1:
            partials = lambda i: self.partial(i).scale(a)  # noqa: E731
        return NumericField(
            self.domain, lambda X: af * f(X), partials, self.smoothness, label=f"{a}*{self.label}"
        )

    def compose(self, fmap):
        _check_compose(self, fmap)
        return _lazy_compose(self, fmap)

    def __str__(self):
        return self.label

    def __repr__(self):
        return f"NumericField({self.label}, {self.smoothness})"


# ---------------------------------------------------------------------------
# constructors


def coordinate(domain: ChartDomain, i: int) -> PolyField:
    """The coordinate function ``x_i`` (1-based)."""
    return PolyField(domain, Polynomial.variable(domain.dim, i))


def constant(domain: ChartDomain, c) -> PolyField:
    return PolyField(domain, Polynomial.constant(domain.dim, c))


def numeric(domain, func, partials=None, smoothness=Smoothness.CINF, label="<numeric>"):
    """Build a numeric field; ``partials`` may be a list of callables/fields or a rule."""
    if partials is not None and not callable(partials):
        items = list(partials)
        if len(items) != domain.dim:
            raise DomainError(f"need {domain.dim} partials, got {len(items)}")

        def rule(i, items=items):
            p = items[i - 1]
            if isinstance(p, ScalarField):
                return p
            return numeric(domain, p, smoothness=Smoothness(smoothness).decremented(),
                           label=f"D{i}[{label}]")

        partials = rule
    return NumericField(domain, func, partials, smoothness, label)


def as_field(domain, value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, Polynomial):
        return PolyField(domain, value)
    if isinstance(value, Number):
        return constant(domain, value)
    if callable(value):
        return numeric(domain, value)
    raise TypeError(f"cannot interpret {value!r} as a scalar field")


# ---------------------------------------------------------------------------
# arithmetic internals


def _derivable(*fields):
    return all(f.can_differentiate() for f in fields)


def _add(a, b):
    if a.is_polynomial and b.is_polynomial:
        return PolyField(a.domain, a.poly + b.poly)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    fa, fb = a._eval, b._eval
    partials = (lambda i: a.partial(i) + b.partial(i)) if _derivable(a, b) else None
    return NumericField(
        a.domain,
        lambda X: fa(X) + fb(X),
        partials,
        min(a.smoothness, b.smoothness),
        label=f"({a} + {b})",
    )


def _mul(a, b):
    if a.is_polynomial and b.is_polynomial:
        return PolyField(a.domain, a.poly * b.poly)
    if a.is_zero() or b.is_zero():
        return constant(a.domain, 0)
    fa, fb = a._eval, b._eval
    partials = (lambda i: a.partial(i) * b + a * b.partial(i)) if _derivable(a, b) else None
    return NumericField(
        a.domain,
        lambda X: fa(X) * fb(X),
        partials,
        min(a.smoothness, b.smoothness),
        label=f"({a})*({b})",
    )


def reciprocal(f: ScalarField) -> ScalarField:
    """``1/f``; exact for nonzero monomials, numeric otherwise."""
    if f.is_polynomial and f.poly.is_monomial():
        return PolyField(f.domain, f.poly ** -1)
    if f.is_zero():
        raise DomainError("reciprocal of the zero field")
    ff = f._eval

    def func(X):
        v = ff(X)
        if np.any(v == 0):
            raise DomainError(f"division by zero in 1/({f})")
        return 1.0 / v

    out = None

    def partials(i):
        return -(f.partial(i) * out * out)

    out = NumericField(f.domain, func, partials if f.can_differentiate() else None,
                       f.smoothness, label=f"1/({f})")
    return out


def _check_compose(field, fmap):
    if fmap.target.dim != field.domain.dim:
        raise DomainError(
            f"map into dimension {fmap.target.dim} cannot feed a field on dimension {field.domain.dim}"
        )


def _lazy_compose(field, fmap):
    comps = fmap.components
    outer = field

    def func(X):
        Y = np.stack([c._eval(X) for c in comps])
        outer.domain.check(Y, what="image point")
        return outer._eval(Y)

    partials = None
    if field.can_differentiate() and all(c.can_differentiate() for c in comps):
        def partials(i):
            total = constant(fmap.source, 0)
            for k, c in enumerate(comps, start=1):
                dc = c.partial(i)
                if dc.is_zero():
                    continue
                total = total + outer.partial(k).compose(fmap) * dc
            return total

    smooth = min([field.smoothness] + [c.smoothness for c in comps])
    return NumericField(fmap.source, func, partials, smooth, label=f"{field}∘f")


# ---------------------------------------------------------------------------
# elementary functions


@dataclass(frozen=True)
class _Unary:
    name: str
    fn: Callable
    deriv: Optional[str]  # name of derivative function, or expression key
    smoothness: Smoothness


def _pos(u):
    return np.maximum(u, 0.0)


def _pos2(u):
    return np.maximum(u, 0.0) ** 2


def _sqrt(u):
    if np.any(u < 0):
        raise DomainError("sqrt of a negative value")
    return np.sqrt(u)


def _log(u):
    if np.any(u <= 0):
        raise DomainError("log of a non-positive value")
    return np.log(u)


UNARY_FUNCTIONS = {
    "exp": _Unary("exp", np.exp, "exp", Smoothness.CINF),
    "sin": _Unary("sin", np.sin, "cos", Smoothness.CINF),
    "cos": _Unary("cos", np.cos, "-sin", Smoothness.CINF),
    "log": _Unary("log", _log, "1/u", Smoothness.CINF),
    "sqrt": _Unary("sqrt", _sqrt, "1/(2sqrt)", Smoothness.CINF),
    "abs": _Unary("abs", np.abs, None, Smoothness.C0),
    "sign": _Unary("sign", np.sign, None, Smoothness.C0),
    "pos": _Unary("pos", _pos, None, Smoothness.C0),
    # positive part squared: C^1, derivative 2*pos(u)
    "pos2": _Unary("pos2", _pos2, "2pos", Smoothness.C1),
}


def apply_function(name: str, u: ScalarField) -> ScalarField:
    """Compose an elementary function with a field, chaining analytic partials."""
    try:
        spec = UNARY_FUNCTIONS[name]
    except KeyError:
        raise DomainError(f"unknown function {name!r}; known: {sorted(UNARY_FUNCTIONS)}") from None
    if u.is_polynomial and u.poly.is_constant():
        c = float(u.poly.terms.get((0,) * u.domain.dim, 0))
        return constant(u.domain, float(spec.fn(np.asarray(c))))
    fu = u._eval
    smooth = min(spec.smoothness, u.smoothness)

    def func(X):
        return spec.fn(fu(X))

    out = None
    partials = None
    if spec.deriv is not None and smooth >= Smoothness.C1:
        def outer_derivative():
            if spec.deriv == "exp":
                return out
            if spec.deriv == "cos":
                return apply_function("cos", u)
            if spec.deriv == "-sin":
                return -apply_function("sin", u)
            if spec.deriv == "1/u":
                return reciprocal(u)
            if spec.deriv == "1/(2sqrt)":
                return reciprocal(out) * Fraction(1, 2)
            if spec.deriv == "2pos":
                return apply_function("pos", u) * 2
            raise AssertionError(spec.deriv)

        def partials(i):
            du = u.partial(i)
            if du.is_zero():
                return constant(u.domain, 0)
            return outer_derivative() * du

    out = NumericField(u.domain, func, partials, smooth, label=f"{name}({u})")
    return out


# ---------------------------------------------------------------------------
# chart maps


class ChartMap:
    """A map ``source -> target`` given by component fields on ``source``."""

    def __init__(self, source: ChartDomain, target: ChartDomain, components: Sequence):
        comps = tuple(as_field(source, c) for c in components)
        if len(comps) != target.dim:
            raise DomainError(f"map into dimension {target.dim} needs {target.dim} components")
        for c in comps:
            if c.domain.dim != source.dim:
                raise DomainError("component field lives on a different domain")
        self.source = source
        self.target = target
        self.components = comps
        self._jac = None

    @classmethod
    def identity(cls, domain):
        return cls(domain, domain, [coordinate(domain, i) for i in range(1, domain.dim + 1)])

    @property
    def is_polynomial(self):
        return all(c.is_polynomial for c in self.components)

    def values(self, X):
        X = np.asarray(X, dtype=float)
        self.source.check(X)
        return np.stack([c._eval(X) for c in self.components])

    def __call__(self, point):
        return np.array([c.eval(point) for c in self.components], dtype=float)

    def jacobian(self):
        """Fields ``J[k][i] = D_i f_k`` (0-based lists, 1-based math)."""
        if self._jac is None:
            for c in self.components:
                if not c.can_differentiate():
                    raise CapabilityError(f"map component {c} is not differentiable")
            self._jac = [
                [c.partial(i) for i in range(1, self.source.dim + 1)] for c in self.components
            ]
        return self._jac

    def compose(self, inner: "ChartMap") -> "ChartMap":
        """``self ∘ inner``."""
        return ChartMap(inner.source, self.target, [c.compose(inner) for c in self.components])

    def __repr__(self):
        return f"ChartMap({', '.join(str(c) for c in self.components)})"
