"""Monomial bookkeeping, affine pullbacks and exact simplex moments.

Monomials of total degree ``<= r`` in ``d`` variables are stored in graded
order (degree 0 first), so the coefficients of ``P_{r-1}`` are a prefix of
those of ``P_r``.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb, factorial

import numpy as np

from .exterior import _combos


def n_monomials(d: int, r: int) -> int:
    return comb(r + d, d) if r >= 0 else 0


@lru_cache(maxsize=None)
def monomials(d: int, r: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for deg in range(r + 1):
        out.extend(_homogeneous(d, deg))
    return tuple(out)


def _homogeneous(d: int, deg: int):
    if d == 0:
        return [()] if deg == 0 else []
    res = []
    # lexicographically decreasing in the first variable
    for first in range(deg, -1, -1):
        for rest in _homogeneous(d - 1, deg - first):
            res.append((first,) + rest)
    return res


@lru_cache(maxsize=None)
def monomial_index(d: int, r: int) -> dict:
    return {m: i for i, m in enumerate(monomials(d, r))}


@lru_cache(maxsize=None)
def monomial_array(d: int, r: int) -> np.ndarray:
    return np.array(monomials(d, r), dtype=int).reshape(-1, d)


@lru_cache(maxsize=None)
def shift_table(d: int, r: int) -> np.ndarray:
    """``T[m, j]`` = index in ``monomials(d, r)`` of monomial ``m + e_j``.

    Rows range over ``monomials(d, r - 1)``.
    """
    idx = monomial_index(d, r)
    rows = monomials(d, r - 1) if r >= 1 else ()
    table = np.zeros((len(rows), d), dtype=int)
    for i, m in enumerate(rows):
        for j in range(d):
            mm = list(m)
            mm[j] += 1
            table[i, j] = idx[tuple(mm)]
    return table


@lru_cache(maxsize=None)
def sum_table(d: int, r1: int, r2: int) -> np.ndarray:
    """Index of ``a + b`` in ``monomials(d, r1 + r2)`` for ``a``, ``b`` in the two lists."""
    idx = monomial_index(d, r1 + r2)
    A = monomials(d, r1)
    B = monomials(d, r2)
    return np.array([[idx[tuple(x + y for x, y in zip(a, b))] for b in B] for a in A],
                    dtype=int).reshape(len(A), len(B))


def affine_pullback_poly(A: np.ndarray, b: np.ndarray, r: int) -> np.ndarray:
    """Matrix of the substitution ``y = b + A z`` on polynomials of degree ``<= r``.

    ``A`` has shape ``(..., d_from, d_to)`` and ``b`` shape ``(..., d_from)``.
    Column ``alpha`` of the result holds the coefficients (in ``z``) of
    ``prod_i (b_i + A_i . z)^{alpha_i}``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    batch = A.shape[:-2]
    d_from, d_to = A.shape[-2:]
    mons = monomials(d_from, r)
    idx = monomial_index(d_from, r)
    n_to = n_monomials(d_to, r)
    C = np.zeros(batch + (n_to, len(mons)))
    C[..., 0, 0] = 1.0
    if r == 0:
        return C
    shift = shift_table(d_to, r)
    n_prev = shift.shape[0]
    for col, m in enumerate(mons):
        if col == 0:
            continue
        i = next(j for j, e in enumerate(m) if e > 0)
        parent = list(m)
        parent[i] -= 1
        p = C[..., :, idx[tuple(parent)]]
        new = b[..., i, None] * p
        for j in range(d_to):
            new[..., shift[:, j]] += A[..., i, j, None] * p[..., :n_prev]
        C[..., :, col] = new
    return C


def alternator_pullback(A: np.ndarray, k: int) -> np.ndarray:
    """Pullback of constant ``k``-alternators through the linear map ``A``.

    Entry ``[b', b]`` is ``det(A[b, b'])``; shape ``(..., C(d_to,k), C(d_from,k))``.
    """
    A = np.asarray(A, dtype=float)
    batch = A.shape[:-2]
    d_from, d_to = A.shape[-2:]
    rows = _combos(d_from, k)
    cols = _combos(d_to, k)
    out = np.zeros(batch + (len(cols), len(rows)))
    if k == 0:
        out[..., 0, 0] = 1.0
        return out
    for a, beta in enumerate(rows):
        for c, gamma in enumerate(cols):
            sub = A[..., list(beta), :][..., list(gamma)]
            out[..., c, a] = np.linalg.det(sub)
    return out


@lru_cache(maxsize=None)
def reference_moments(d: int, r: int) -> np.ndarray:
    """``int t^a dt`` over the unit reference ``d``-simplex for ``|a| <= r``.

    Uses ``prod a_i! / (|a| + d)!`` (barycentric monomial formula with the
    remaining barycentric exponent equal to zero).
    """
    vals = []
    for a in monomials(d, r):
        num = 1
        for e in a:
            num *= factorial(e)
        vals.append(num / factorial(sum(a) + d))
    return np.array(vals)


def simplex_moments(verts: np.ndarray, measures: np.ndarray, r: int) -> np.ndarray:
    """Exact moments ``int_S y^gamma`` over a batch of ``d``-simplices.

    ``verts`` has shape ``(S, d+1, d)`` (local coordinates ``y``), ``measures``
    shape ``(S,)``.  Returns an array of shape ``(S, n_monomials(d, r))``.
    """
    verts = np.asarray(verts, dtype=float)
    S, npts, d = verts.shape
    if d == 0:
        return np.asarray(measures, dtype=float)[:, None] * np.ones((S, 1))
    A = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    C = affine_pullback_poly(A, verts[:, 0, :], r)
    ref = reference_moments(d, r)
    scale = np.asarray(measures, dtype=float) * factorial(d)
    return scale[:, None] * np.einsum("sam,a->sm", C, ref)


def simplex_measure(points: np.ndarray) -> np.ndarray:
    """k-dimensional measure of simplices given as ``(S, k+1, n)`` arrays."""
    points = np.asarray(points, dtype=float)
    k = points.shape[-2] - 1
    if k == 0:
        return np.ones(points.shape[:-2])
    E = points[..., 1:, :] - points[..., :1, :]
    G = E @ np.swapaxes(E, -1, -2)
    det = np.linalg.det(G)
    return np.sqrt(np.clip(det, 0.0, None)) / factorial(k)


def faces(simplex, k: int):
    """All ``k``-faces (as sorted vertex tuples) of a vertex collection."""
    return combinations(sorted(simplex), k + 1)
