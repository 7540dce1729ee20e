import itertools
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from superform.errors import DomainError
from superform.multiindex import MultiIndex, enumerate_multiindices, merge, permutation_sign


def mi(*idx, dim=3):
    return MultiIndex(idx, dim)


def test_enumeration_examples():
    assert [m.indices for m in enumerate_multiindices(3, 2)] == [(1, 2), (1, 3), (2, 3)]
    assert len(enumerate_multiindices(4, 2)) == 6
    for M in range(1, 6):
        assert [m.indices for m in enumerate_multiindices(M, M)] == [tuple(range(1, M + 1))]
    assert [m.indices for m in enumerate_multiindices(3, 0)] == [()]


def test_merge_examples():
    assert merge(mi(1, 3), mi(2)) == (-1, mi(1, 2, 3))
    assert merge(mi(1, 2), mi(2)) is None
    assert merge(mi(1), mi(2)) == (1, mi(1, 2))


@pytest.mark.parametrize("bad", [(2, 1), (1, 1), (0, 1), (1, 4), (1, 2, 3, 3)])
def test_invalid_indices(bad):
    with pytest.raises(DomainError):
        MultiIndex(bad, 3)


def test_enumerate_out_of_range():
    with pytest.raises(DomainError):
        enumerate_multiindices(3, 4)


def test_merge_needs_same_dimension():
    with pytest.raises(DomainError):
        merge(MultiIndex((1,), 2), MultiIndex((2,), 3))


def test_str_is_one_based():
    assert str(mi(1, 3)) == "d(1,3)"


@given(st.integers(1, 7), st.data())
def test_enumeration_count_and_order(M, data):
    p = data.draw(st.integers(0, M))
    got = enumerate_multiindices(M, p)
    assert len(got) == comb(M, p)
    assert [m.indices for m in got] == sorted(m.indices for m in got)
    assert all(len(m) == p for m in got)


@given(st.permutations(list(range(6))))
def test_permutation_sign_matches_inversions(perm):
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    assert permutation_sign(perm) == (-1) ** inversions


def _subsets(M):
    return [m for p in range(M + 1) for m in enumerate_multiindices(M, p)]


@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_antisymmetry_exhaustive(M):
    for a in _subsets(M):
        for b in _subsets(M):
            ab, ba = merge(a, b), merge(b, a)
            assert (ab is None) == (ba is None) == bool(set(a) & set(b))
            if ab is not None:
                assert ab.index == ba.index
                assert ab.sign == (-1) ** (len(a) * len(b)) * ba.sign


@pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
def test_triple_merge_associativity_exhaustive(M):
    subs = _subsets(M)
    for a, b, c in itertools.product(subs, repeat=3):
        if len(a) + len(b) + len(c) > M:
            continue
        ab = merge(a, b)
        left = None if ab is None else merge(ab.index, c)
        bc = merge(b, c)
        right = None if bc is None else merge(a, bc.index)
        assert (left is None) == (right is None)
        if left is not None:
            assert left.index == right.index
            assert ab.sign * left.sign == bc.sign * right.sign
