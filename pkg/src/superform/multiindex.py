"""Strictly increasing multi-indices labelling the wedge basis ``dx_alpha``.

Indices are 1-based everywhere, so ``MultiIndex((1, 3), 3)`` is
``dx_1 ^ dx_3`` on a 3-dimensional domain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

from .errors import DomainError

__all__ = ["MultiIndex", "Merged", "enumerate_multiindices", "merge", "permutation_sign"]


@dataclass(frozen=True, order=True)
class MultiIndex:
    """An element of I(M, p): a strictly increasing tuple in ``1..dim``."""

    indices: tuple
    dim: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.dim < 0:
            raise DomainError(f"ambient dimension must be >= 0, got {self.dim}")
        if len(idx) > self.dim:
            raise DomainError(f"multi-index {idx} longer than ambient dimension {self.dim}")
        for a, b in zip(idx, idx[1:]):
            if not a < b:
                raise DomainError(f"multi-index {idx} is not strictly increasing")
        if idx and (idx[0] < 1 or idx[-1] > self.dim):
            raise DomainError(f"multi-index {idx} has entries outside 1..{self.dim}")

    @property
    def degree(self) -> int:
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self):
        return "d(" + ",".join(str(i) for i in self.indices) + ")"


class Merged(NamedTuple):
    sign: int
    index: MultiIndex


def enumerate_multiindices(dim: int, p: int) -> list:
    """All of I(dim, p) in lexicographic order; ``p == 0`` gives the empty index."""
    if p < 0 or p > dim:
        raise DomainError(f"degree {p} out of range 0..{dim}")
    return list(_enumerate(dim, p))


@lru_cache(maxsize=None)
def _enumerate(dim, p):
    return tuple(MultiIndex(c, dim) for c in itertools.combinations(range(1, dim + 1), p))


def permutation_sign(seq) -> int:
    """Parity of the permutation sorting ``seq`` (entries assumed distinct)."""
    seq = list(seq)
    sign = 1
    # cycle decomposition on the ranks
    order = sorted(range(len(seq)), key=seq.__getitem__)
    seen = [False] * len(seq)
    for start in range(len(seq)):
        if seen[start]:
            continue
        j, length = start, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def merge(alpha: MultiIndex, beta: MultiIndex) -> Optional[Merged]:
    """Wedge ``dx_alpha ^ dx_beta``.

    Returns ``None`` when the index sets collide (the wedge vanishes),
    otherwise the sign of the sorting permutation and the merged index.
    """
    if alpha.dim != beta.dim:
        raise DomainError(f"ambient dimensions differ: {alpha.dim} vs {beta.dim}")
    return _merge(alpha, beta)


@lru_cache(maxsize=65536)
def _merge(alpha, beta):
    cat = alpha.indices + beta.indices
    if len(set(cat)) < len(cat):
        return None
    return Merged(permutation_sign(cat), MultiIndex(tuple(sorted(cat)), alpha.dim))
