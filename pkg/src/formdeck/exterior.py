"""Combinatorial exterior algebra on coordinate alternators.

An alternator ``dx^a`` on a ``d``-dimensional cell is named by a strictly
increasing tuple of coordinate indices taken from ``{1, ..., d}``.  Every
coefficient array in the package stores alternators in the lexicographic
order produced by :func:`enumerate_alternators`.

Internally the numeric modules work with 0-based index tuples; the helpers
prefixed with an underscore use that convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

from .errors import InvalidDegreeError


@dataclass(frozen=True, order=True)
class Alternator:
    """Basis alternator ``dx^{indices}`` on a cell of dimension ``dim``."""

    dim: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) > self.dim:
            raise InvalidDegreeError(f"degree {len(idx)} exceeds dimension {self.dim}")
        if any(i < 1 or i > self.dim for i in idx):
            raise ValueError(f"indices {idx} outside 1..{self.dim}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices {idx} are not strictly increasing")

    @property
    def degree(self) -> int:
        return len(self.indices)

    def zero_based(self) -> tuple[int, ...]:
        return tuple(i - 1 for i in self.indices)


def permutation_parity(seq) -> int:
    """Sign (+1 or -1) of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    inversions = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inversions += 1
    return -1 if inversions % 2 else 1


def _check_degree(d: int, k: int) -> None:
    if d < 0 or k < 0 or k > d:
        raise InvalidDegreeError(f"no alternators of degree {k} in dimension {d}")


@lru_cache(maxsize=None)
def _combos(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    _check_degree(d, k)
    return tuple(combinations(range(d), k))


@lru_cache(maxsize=None)
def _combo_index(d: int, k: int) -> dict:
    return {c: i for i, c in enumerate(_combos(d, k))}


def n_alternators(d: int, k: int) -> int:
    if k < 0 or k > d:
        return 0
    return comb(d, k)


def enumerate_alternators(d: int, k: int) -> list[Alternator]:
    """All degree-``k`` alternators in dimension ``d``, lexicographically."""
    return [Alternator(d, tuple(i + 1 for i in c)) for c in _combos(d, k)]


def _merge(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, tuple[int, ...] | None]:
    if set(a) & set(b):
        return 0, None
    return permutation_parity(a + b), tuple(sorted(a + b))


def wedge_sign(a: Alternator, b: Alternator) -> tuple[int, Alternator | None]:
    """Sign and merged alternator of ``dx^a ^ dx^b``.

    Returns ``(0, None)`` when the index sets overlap.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sign, merged = _merge(a.indices, b.indices)
    if sign == 0:
        return 0, None
    return sign, Alternator(a.dim, merged)


def _star(d: int, a: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    comp = tuple(i for i in range(d) if i not in a)
    return permutation_parity(a + comp), comp


def hodge_star_basis(a: Alternator) -> tuple[int, Alternator]:
    """``*dx^a = sign * dx^complement`` for an orthonormal, positive frame."""
    sign, comp = _star(a.dim, a.zero_based())
    return sign, Alternator(a.dim, tuple(i + 1 for i in comp))
