"""Text syntax for fields, matrix forms and chart maps.

Scalar expressions::

    3/2*x1^2*x2 - x3
    exp(-x1)*x2 + pos2(x1^2 + x2^2 - 1)

Integer and ``a/b`` literals stay exact; decimal literals are floats.
Known functions are listed in :data:`superform.fields.UNARY_FUNCTIONS`.

Matrix forms are nested rows of entries; each entry is a sum of terms
``<coefficient> d(i,j,...)`` naming ``dx_i ^ dx_j ^ ...``::

    [[x2 d(1), (x1 + 1) d(2)], [0, -d(2)]]

Polynomial coefficients round-trip exactly through :func:`format_form`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError
from .fields import ChartDomain, ChartMap, PolyField, ScalarField, apply_function, constant, coordinate
from .forms import MatrixForm
from .multiindex import MultiIndex, permutation_sign

__all__ = [
    "parse_field",
    "parse_form",
    "parse_map",
    "format_field",
    "format_form",
    "format_map",
    "form_from_json",
    "map_from_json",
    "form_to_json",
    "domain_from_json",
]

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, domain: ChartDomain, names=None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.domain = domain
        if names is None:
            names = [f"x{k}" for k in range(1, domain.dim + 1)]
        self.names = {n: k for k, n in enumerate(names, start=1)}

    # token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(msg, self.text, tok.pos)

    def expect(self, text):
        if self.tok.text != text:
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        self.i += 1

    def at_dspec(self):
        return self.tok.kind == "name" and self.tok.text == "d" and self.peek().text == "("

    # scalar grammar
    def expr(self):
        sign = 1
        if self.tok.text in "+-" and self.tok.kind == "op":
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
        value = self.term()
        if sign < 0:
            value = -value
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self, stop_at_d=False):
        value = self.power()
        while self.tok.kind == "op" and self.tok.text in "*/":
            if stop_at_d and self.tok.text == "*" and self.peek().text == "d" and self.peek(2).text == "(":
                break
            op = self.tok.text
            self.i += 1
            rhs = self.power()
            if op == "*":
                value = _mul(value, rhs)
            else:
                value = _div(value, rhs, self)
        return value

    def power(self):
        base = self.atom()
        if self.tok.text == "^":
            self.i += 1
            neg = False
            if self.tok.text in "+-" and self.tok.kind == "op":
                neg = self.tok.text == "-"
                self.i += 1
            if self.tok.kind != "num" or not self.tok.text.isdigit():
                self.error("exponent must be an integer")
            k = int(self.tok.text)
            self.i += 1
            k = -k if neg else k
            if isinstance(base, ScalarField):
                return base ** k
            if k < 0 and not isinstance(base, float):
                return Fraction(base) ** k
            return base ** k
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            if re.fullmatch(r"\d+", tok.text):
                return int(tok.text)
            return float(tok.text)
        if tok.kind == "name":
            if tok.text in self.names:
                self.i += 1
                return coordinate(self.domain, self.names[tok.text])
            if self.peek().text == "(" and tok.text != "d":
                self.i += 2
                arg = self.expr()
                self.expect(")")
                try:
                    return apply_function(tok.text, _field(arg, self.domain))
                except Exception as exc:
                    raise ParseError(str(exc), self.text, tok.pos) from None
            self.error(f"unknown name {tok.text!r}")
        if tok.text == "(":
            self.i += 1
            value = self.expr()
            self.expect(")")
            return value
        if tok.text == "-":
            self.i += 1
            return -self.power()
        self.error(f"unexpected {tok.text or 'end of input'!r}")

    # form grammar
    def dspec(self):
        start = self.tok
        self.expect("d")
        self.expect("(")
        idx = []
        if self.tok.text != ")":
            while True:
                if self.tok.kind != "num" or not self.tok.text.isdigit():
                    self.error("d(...) takes positive integers")
                idx.append(int(self.tok.text))
                self.i += 1
                if self.tok.text == ",":
                    self.i += 1
                    continue
                break
        self.expect(")")
        if sorted(set(idx)) != idx:
            # unsorted input is allowed; the sign comes from the sorting permutation
            if len(set(idx)) != len(idx):
                return None, 0
            sign = permutation_sign(idx)
            idx = sorted(idx)
        else:
            sign = 1
        try:
            return MultiIndex(tuple(idx), self.domain.dim), sign
        except Exception as exc:
            raise ParseError(str(exc), self.text, start.pos) from None

    def entry(self):
        terms = []
        first = True
        while True:
            sign = 1
            if self.tok.kind == "op" and self.tok.text in "+-":
                sign = -1 if self.tok.text == "-" else 1
                self.i += 1
            elif not first:
                break
            first = False
            pos = self.tok
            if self.at_dspec():
                coeff = 1
            else:
                coeff = self.term(stop_at_d=True)
                if self.tok.text == "*" and self.peek().text == "d":
                    self.i += 1
            if self.at_dspec():
                key, s = self.dspec()
            else:
                key, s = MultiIndex((), self.domain.dim), 1
            if key is not None:
                terms.append((key, sign * s, coeff, pos))
            if not (self.tok.kind == "op" and self.tok.text in "+-"):
                break
        return terms

    def form(self):
        self.expect("[")
        rows = []
        while True:
            self.expect("[")
            row = [self.entry()]
            while self.tok.text == ",":
                self.i += 1
                row.append(self.entry())
            self.expect("]")
            rows.append(row)
            if self.tok.text == ",":
                self.i += 1
                continue
            break
        self.expect("]")
        return rows


def _mul(a, b):
    if isinstance(a, ScalarField) or isinstance(b, ScalarField):
        return a * b
    if isinstance(a, float) or isinstance(b, float):
        return float(a) * float(b)
    return Fraction(a) * Fraction(b)


def _div(a, b, parser):
    if isinstance(b, ScalarField):
        if isinstance(a, ScalarField):
            return a / b
        return b.__rtruediv__(a)
    if b == 0:
        parser.error("division by zero")
    if isinstance(a, ScalarField):
        return a / b
    if isinstance(a, float) or isinstance(b, float):
        return float(a) / float(b)
    return Fraction(a) / Fraction(b)


def _field(value, domain):
    if isinstance(value, ScalarField):
        return value
    return constant(domain, value)


def parse_field(text: str, domain: ChartDomain, names=None) -> ScalarField:
    p = _Parser(text, domain, names)
    value = p.expr()
    if p.tok.kind != "end":
        p.error(f"unexpected {p.tok.text!r}")
    return _field(value, domain)


def parse_form(text: str, domain: ChartDomain, degree=None, names=None) -> MatrixForm:
    p = _Parser(text, domain, names)
    rows = p.form()
    if p.tok.kind != "end":
        p.error(f"unexpected {p.tok.text!r} after form")
    L = len(rows)
    for r, row in enumerate(rows):
        if len(row) != L:
            raise ParseError(f"row {r + 1} has {len(row)} entries, expected {L}", text, 0)
    degrees = {key.degree for row in rows for entry in row for key, _, c, _ in entry if not _is_zero_value(c)}
    if degree is None:
        if len(degrees) > 1:
            raise ParseError(f"terms of mixed degrees {sorted(degrees)}", text, 0)
        if not degrees:
            raise ParseError("degree of the zero form cannot be inferred; give it explicitly", text, 0)
        degree = degrees.pop()
    entries = []
    for row in rows:
        new_row = []
        for entry in row:
            out = {}
            for key, sign, coeff, tok in entry:
                if _is_zero_value(coeff):
                    continue
                if key.degree != degree:
                    raise ParseError(f"term of degree {key.degree} in a {degree}-form", text, tok.pos)
                f = _field(coeff, domain)
                if sign < 0:
                    f = -f
                out[key] = out[key] + f if key in out else f
            new_row.append(out)
        entries.append(new_row)
    return MatrixForm(domain, degree, entries)


def _is_zero_value(c):
    if isinstance(c, ScalarField):
        return c.is_zero()
    return c == 0


def parse_map(components, source: ChartDomain, target: ChartDomain, names=None) -> ChartMap:
    return ChartMap(source, target, [parse_field(c, source, names) for c in components])


# formatting --------------------------------------------------------------


def format_field(f: ScalarField) -> str:
    return str(f)


def _format_term(f: ScalarField, key: MultiIndex):
    text = format_field(f)
    d = "" if key.degree == 0 else str(key)
    if isinstance(f, PolyField) and f.poly.is_monomial():
        if d and text == "1":
            return "+", d
        if d and text == "-1":
            return "-", d
        if text.startswith("-"):
            return "-", (text[1:] + (" " + d if d else ""))
        return "+", text + (" " + d if d else "")
    return "+", f"({text})" + (" " + d if d else "")


def format_entry(entry) -> str:
    if not entry:
        return "0"
    parts = []
    for key in sorted(entry):
        sign, body = _format_term(entry[key], key)
        if not parts:
            parts.append(("-" if sign == "-" else "") + body)
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)


def format_form(omega: MatrixForm) -> str:
    return "[" + ", ".join(
        "[" + ", ".join(format_entry(e) for e in row) + "]" for row in omega.entries
    ) + "]"


def format_map(fmap: ChartMap):
    return [format_field(c) for c in fmap.components]


# JSON documents ------------------------------------------------------------


def domain_from_json(box) -> ChartDomain:
    return ChartDomain(tuple((float(lo), float(hi)) for lo, hi in box))


def form_from_json(doc, domain=None) -> MatrixForm:
    """``{"box": [[lo, hi], ...], "degree": h, "form": "<literal>"}``."""
    if domain is None:
        domain = domain_from_json(doc["box"])
    return parse_form(doc["form"], domain, doc.get("degree"), doc.get("variables"))


def form_to_json(omega: MatrixForm):
    return {"box": [list(b) for b in omega.domain.box], "degree": omega.degree, "form": format_form(omega)}


def map_from_json(doc, source=None, target=None) -> ChartMap:
    """``{"source_box": ..., "target_box": ..., "components": [...]}``."""
    source = source or domain_from_json(doc["source_box"])
    target = target or domain_from_json(doc["target_box"])
    return parse_map(doc["components"], source, target, doc.get("variables"))
