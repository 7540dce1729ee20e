"""Seeded random polynomial forms and maps for identity checks."""

from __future__ import annotations

import itertools

from .fields import ChartDomain, ChartMap, PolyField
from .forms import MatrixForm
from .multiindex import enumerate_multiindices
from .polynomial import Polynomial

__all__ = ["random_polynomial", "random_form", "random_polynomial_map", "random_point"]


def random_polynomial(rng, nvars, max_degree=3, max_terms=3, coeff_range=5):
    """Sparse polynomial with small integer coefficients."""
    exps = [e for e in itertools.product(range(max_degree + 1), repeat=nvars) if sum(e) <= max_degree]
    n = int(rng.integers(1, max_terms + 1))
    terms = {}
    for k in rng.choice(len(exps), size=min(n, len(exps)), replace=False):
        c = int(rng.integers(-coeff_range, coeff_range + 1))
        if c:
            terms[exps[k]] = c
    return Polynomial(nvars, terms)


def random_form(rng, domain: ChartDomain, L, degree, max_degree=3, density=0.6, max_terms=3):
    """Random polynomial L x L form; each component is present with probability ``density``."""
    comps = enumerate_multiindices(domain.dim, degree)

    def fill(i, j):
        entry = {}
        for k in comps:
            if rng.random() < density:
                p = random_polynomial(rng, domain.dim, max_degree, max_terms)
                if not p.is_zero():
                    entry[k] = PolyField(domain, p)
        return entry

    return MatrixForm.from_function(domain, degree, L, fill)


def random_polynomial_map(rng, source: ChartDomain, target: ChartDomain, max_degree=2, max_terms=3):
    comps = [PolyField(source, random_polynomial(rng, source.dim, max_degree, max_terms))
             for _ in range(target.dim)]
    return ChartMap(source, target, comps)


def random_point(rng, domain: ChartDomain, n=None):
    lo, hi = domain.lo, domain.hi
    if n is None:
        return lo + (hi - lo) * rng.random(domain.dim)
    return (lo[:, None] + (hi - lo)[:, None] * rng.random((domain.dim, n)))
