"""Sparse multivariate polynomials with exact rational coefficients.

Exponents may be negative (Laurent polynomials), which keeps forms such as
``a^-1 da`` exact.  Coefficients are ``int``/``Fraction`` when built from
exact literals and ``float`` otherwise; the two only mix when the caller
mixes them.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DomainError

__all__ = ["Polynomial", "normalize_coeff", "format_coeff"]


def normalize_coeff(c):
    if isinstance(c, bool):
        return int(c)
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, Rational):
        return int(c) if Fraction(c).denominator == 1 else Fraction(c)
    if isinstance(c, (int, float)):
        return c
    if isinstance(c, np.integer):
        return int(c)
    if isinstance(c, np.floating):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _is_zero(c):
    return c == 0


def format_coeff(c) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    if isinstance(c, float):
        return repr(c)
    return str(c)


class Polynomial:
    """``terms`` maps exponent tuples (length ``nvars``) to nonzero coefficients."""

    __slots__ = ("nvars", "terms", "_cache")

    def __init__(self, nvars: int, terms=None):
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise DomainError(f"exponent {exps} does not match {self.nvars} variables")
            c = normalize_coeff(c)
            if not _is_zero(c):
                clean[exps] = c
        self.terms = clean
        self._cache = None

    # construction helpers ------------------------------------------------
    @classmethod
    def constant(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, i):
        """The coordinate ``x_i`` (1-based)."""
        if not 1 <= i <= nvars:
            raise DomainError(f"variable x{i} out of range 1..{nvars}")
        e = [0] * nvars
        e[i - 1] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def _raw(cls, nvars, terms):
        # terms already clean
        p = cls.__new__(cls)
        p.nvars = nvars
        p.terms = terms
        p._cache = None
        return p

    # inspection ----------------------------------------------------------
    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def is_monomial(self):
        return len(self.terms) == 1

    def is_exact(self):
        return all(not isinstance(c, float) for c in self.terms.values())

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def has_negative_exponents(self):
        return any(x < 0 for e in self.terms for x in e)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self!s})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps in sorted(self.terms, key=lambda e: (-sum(e), [-x for x in e])):
            c = self.terms[exps]
            neg = c < 0
            mag = -c if neg else c
            factors = []
            for i, e in enumerate(exps, start=1):
                if e == 1:
                    factors.append(f"x{i}")
                elif e != 0:
                    factors.append(f"x{i}^{e}")
            if not factors:
                body = format_coeff(mag)
            elif mag == 1 and not isinstance(mag, float):
                body = "*".join(factors)
            else:
                body = format_coeff(mag) + "*" + "*".join(factors)
            if not parts:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        return "".join(parts)

    # arithmetic ----------------------------------------------------------
    def _check(self, other):
        if self.nvars != other.nvars:
            raise DomainError(f"polynomials in {self.nvars} and {other.nvars} variables")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = normalize_coeff(out.get(e, 0) + c)
            if _is_zero(v):
                out.pop(e, None)
            else:
                out[e] = v
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, a):
        a = normalize_coeff(a)
        if _is_zero(a):
            return Polynomial._raw(self.nvars, {})
        return Polynomial._raw(
            self.nvars, {e: normalize_coeff(c * a) for e, c in self.terms.items()}
        )

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            if not self.is_monomial():
                raise DomainError("negative power of a non-monomial is not a polynomial")
            return self._monomial_power(k)
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _monomial_power(self, k):
        (e, c), = self.terms.items()
        if isinstance(c, float):
            cc = c ** k
        else:
            cc = Fraction(c) ** k
        return Polynomial._raw(self.nvars, {tuple(x * k for x in e): normalize_coeff(cc)})

    def derivative(self, i):
        """Formal partial derivative in ``x_i`` (1-based)."""
        if not 1 <= i <= self.nvars:
            raise DomainError(f"axis {i} out of range 1..{self.nvars}")
        k = i - 1
        out = {}
        for e, c in self.terms.items():
            if e[k] == 0:
                continue
            ne = list(e)
            ne[k] -= 1
            out[tuple(ne)] = normalize_coeff(c * e[k])
        return Polynomial._raw(self.nvars, out)

    def substitute(self, components):
        """Compose with a polynomial map given by ``components``.

        Returns ``None`` when a negative exponent would have to be applied to
        a non-monomial component (the result would not be a Laurent
        polynomial).
        """
        if len(components) != self.nvars:
            raise DomainError(f"need {self.nvars} components, got {len(components)}")
        if not components:
            return Polynomial(0, self.terms)
        nv = components[0].nvars
        powers = [dict() for _ in components]

        def power(k, e):
            cache = powers[k]
            if e not in cache:
                if e < 0 and not components[k].is_monomial():
                    return None
                cache[e] = components[k] ** e
            return cache[e]

        result = Polynomial(nv)
        for exps, c in self.terms.items():
            term = Polynomial.constant(nv, c)
            for k, e in enumerate(exps):
                if e == 0:
                    continue
                p = power(k, e)
                if p is None:
                    return None
                term = term * p
            result = result + term
        return result

    # evaluation ----------------------------------------------------------
    def evaluate(self, point):
        """Evaluate at one point; exact when the point and coefficients are rational."""
        if len(point) != self.nvars:
            raise DomainError(f"point of dimension {len(point)} for {self.nvars} variables")
        exact = all(isinstance(x, (int, Fraction)) for x in point)
        pt = [Fraction(x) if exact else float(x) for x in point]
        total = 0
        for exps, c in self.terms.items():
            v = c
            for x, e in zip(pt, exps):
                if e:
                    if x == 0 and e < 0:
                        raise DomainError("negative power of a zero coordinate")
                    v = v * x ** e
            total = total + v
        return normalize_coeff(total) if exact else float(total)

    def values(self, X):
        """Vectorized evaluation; ``X`` has shape ``(nvars, *batch)``."""
        X = np.asarray(X, dtype=float)
        batch = X.shape[1:]
        if not self.terms:
            return np.zeros(batch)
        if self._cache is None:
            exps = np.array(list(self.terms), dtype=int).reshape(len(self.terms), self.nvars)
            coeffs = np.array([float(c) for c in self.terms.values()])
            self._cache = (exps, coeffs)
        exps, coeffs = self._cache
        out = np.zeros(batch)
        with np.errstate(divide="raise", invalid="raise"):
            try:
                for row, c in zip(exps, coeffs):
                    term = np.full(batch, c)
                    for k, e in enumerate(row):
                        if e:
                            term = term * X[k] ** e if e > 0 else term / X[k] ** (-e)
                    out += term
            except FloatingPointError as exc:
                raise DomainError("negative power of a zero coordinate") from exc
        return out
