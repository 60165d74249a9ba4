from itertools import combinations

import pytest

from formdeck.errors import InvalidDegreeError
from formdeck.exterior import (
    Alternator,
    enumerate_alternators,
    hodge_star_basis,
    permutation_parity,
    wedge_sign,
)


def A(*idx, d=2):
    return Alternator(d, idx)


def test_degree_zero_is_single_empty_alternator():
    assert enumerate_alternators(3, 0) == [Alternator(3, ())]


def test_coordinate_one_forms():
    assert [a.indices for a in enumerate_alternators(2, 1)] == [(1,), (2,)]


def test_count_matches_brute_force_subsets():
    got = [a.indices for a in enumerate_alternators(4, 2)]
    assert len(got) == 6
    assert got == list(combinations(range(1, 5), 2))


@pytest.mark.parametrize("d,k", [(2, 3), (1, -1)])
def test_bad_degree_rejected(d, k):
    with pytest.raises(InvalidDegreeError):
        enumerate_alternators(d, k)


def test_bad_indices_rejected():
    with pytest.raises(ValueError):
        Alternator(2, (2, 1))
    with pytest.raises(ValueError):
        Alternator(2, (3,))


def test_wedge_signs():
    assert wedge_sign(A(1), A(1)) == (0, None)
    assert wedge_sign(A(1), A(2)) == (1, A(1, 2))
    assert wedge_sign(A(2), A(1)) == (-1, A(1, 2))


def test_wedge_graded_commutativity():
    for d in range(1, 5):
        for k in range(d + 1):
            for l in range(d + 1 - k):
                for a in enumerate_alternators(d, k):
                    for b in enumerate_alternators(d, l):
                        s1, m1 = wedge_sign(a, b)
                        s2, m2 = wedge_sign(b, a)
                        assert m1 == m2
                        assert s1 == (-1) ** (k * l) * s2


def test_star_in_two_dimensions():
    assert hodge_star_basis(Alternator(2, ())) == (1, A(1, 2))
    assert hodge_star_basis(A(2)) == (-1, A(1))


def test_star_star_sign():
    for d in range(5):
        for k in range(d + 1):
            for a in enumerate_alternators(d, k):
                s1, b = hodge_star_basis(a)
                s2, c = hodge_star_basis(b)
                assert c == a
                assert s1 * s2 == (-1) ** (k * (d - k))


def test_star_gives_volume_with_wedge():
    # a ^ *a = vol for every basis alternator
    for d in range(1, 5):
        vol = Alternator(d, tuple(range(1, d + 1)))
        for k in range(d + 1):
            for a in enumerate_alternators(d, k):
                s, b = hodge_star_basis(a)
                sw, m = wedge_sign(a, b)
                assert m == vol and s * sw == 1


def test_permutation_parity():
    assert permutation_parity([0, 1, 2]) == 1
    assert permutation_parity([1, 0, 2]) == -1
    assert permutation_parity([2, 0, 1]) == 1
