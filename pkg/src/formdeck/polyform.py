"""Polynomial differential forms on a single flat cell.

A :class:`PolyForm` stores the coefficients of ``sum c[a, b] y^a dy^b`` where
``y`` are the scaled chart coordinates of the owning cell (see
:mod:`formdeck.geometry`).  Rows of ``coeffs`` follow the graded monomial
order of :mod:`formdeck._poly`, columns the lexicographic alternator order.

Besides the pointwise algebra (``d``, Koszul, Hodge star, wedge, traces)
this module builds trimmed polynomial spaces, their L2 projectors and
measures the local operator norms of ``d`` and the Koszul operator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from ._poly import monomial_index, monomials, n_monomials, shift_table, sum_table
from .errors import IllConditionedBasisError, InvalidDegreeError
from .exterior import _combo_index, _combos, _merge, _star, n_alternators
from .geometry import CellGeometry

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
CONDITION_CAP = 1e12


@dataclass
class PolyForm:
    """Polynomial ``k``-form on a ``d``-cell, in scaled chart coordinates."""

    cell_dim: int
    form_degree: int
    poly_degree: int
    coeffs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        if self.form_degree < 0 or self.form_degree > self.cell_dim:
            raise InvalidDegreeError(
                f"form degree {self.form_degree} on a {self.cell_dim}-cell")
        shape = (n_monomials(self.cell_dim, self.poly_degree),
                 n_alternators(self.cell_dim, self.form_degree))
        c = np.asarray(self.coeffs, dtype=float)
        if c.size != shape[0] * shape[1]:
            raise ValueError(f"coefficient size {c.size} does not match {shape}")
        self.coeffs = c.reshape(shape)

    @classmethod
    def zeros(cls, d, k, r, scale=1.0):
        return cls(d, k, r, np.zeros((n_monomials(d, r), n_alternators(d, k))), scale)

    @classmethod
    def from_vector(cls, d, k, r, vec, scale=1.0):
        return cls(d, k, r, np.asarray(vec, dtype=float), scale)

    @classmethod
    def from_terms(cls, d, k, terms, scale=1.0):
        """Build from ``{(alpha, beta): value}`` with 1-based ``beta`` indices."""
        r = max((sum(a) for a, _ in terms), default=0)
        out = cls.zeros(d, k, r, scale)
        mi = monomial_index(d, r)
        ai = _combo_index(d, k)
        for (alpha, beta), val in terms.items():
            out.coeffs[mi[tuple(alpha)], ai[tuple(b - 1 for b in beta)]] += val
        return out

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def raise_degree(self, r: int) -> "PolyForm":
        if r < self.poly_degree:
            tail = self.coeffs[n_monomials(self.cell_dim, r):]
            if np.any(tail != 0):
                raise ValueError("cannot lower the degree of a form with nonzero top terms")
            return PolyForm(self.cell_dim, self.form_degree, r,
                            self.coeffs[: n_monomials(self.cell_dim, r)], self.scale)
        c = np.zeros((n_monomials(self.cell_dim, r), self.coeffs.shape[1]))
        c[: self.coeffs.shape[0]] = self.coeffs
        return PolyForm(self.cell_dim, self.form_degree, r, c, self.scale)

    def _binary(self, other, op):
        if (self.cell_dim, self.form_degree) != (other.cell_dim, other.form_degree):
            raise ValueError("forms live in different spaces")
        r = max(self.poly_degree, other.poly_degree)
        a, b = self.raise_degree(r), other.raise_degree(r)
        return PolyForm(self.cell_dim, self.form_degree, r, op(a.coeffs, b.coeffs), self.scale)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return PolyForm(self.cell_dim, self.form_degree, self.poly_degree, -self.coeffs, self.scale)

    def __mul__(self, s):
        return PolyForm(self.cell_dim, self.form_degree, self.poly_degree, s * self.coeffs, self.scale)

    __rmul__ = __mul__

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Alternator components at chart points ``y`` of shape ``(m, d)``."""
        y = np.asarray(y, dtype=float)
        if self.cell_dim == 0:
            m = y.shape[0] if y.ndim == 2 else 1
            return np.ones((m, 1)) @ self.coeffs
        y = np.atleast_2d(y).reshape(-1, self.cell_dim)
        mons = np.array(monomials(self.cell_dim, self.poly_degree), dtype=int)
        vals = np.prod(y[:, None, :] ** mons[None, :, :], axis=2)
        return vals @ self.coeffs


# ---------------------------------------------------------------- matrices

@lru_cache(maxsize=None)
def d_matrix(d: int, k: int, r: int) -> np.ndarray:
    """Unit-scale exterior derivative ``P_r Lambda^k -> P_r Lambda^{k+1}``."""
    if k >= d:
        raise InvalidDegreeError(f"d of a {k}-form on a {d}-cell")
    mons = monomials(d, r)
    mi = monomial_index(d, r)
    src = _combos(d, k)
    dst = _combo_index(d, k + 1)
    na_src, na_dst = len(src), len(dst)
    M = np.zeros((len(mons) * na_dst, len(mons) * na_src))
    for m, alpha in enumerate(mons):
        for a, beta in enumerate(src):
            for j in range(d):
                if alpha[j] == 0:
                    continue
                sign, merged = _merge((j,), beta)
                if sign == 0:
                    continue
                low = list(alpha)
                low[j] -= 1
                M[mi[tuple(low)] * na_dst + dst[merged], m * na_src + a] += sign * alpha[j]
    return M


@lru_cache(maxsize=None)
def koszul_matrix(d: int, k: int, r: int) -> np.ndarray:
    """Unit-scale Koszul operator ``P_r Lambda^k -> P_{r+1} Lambda^{k-1}``."""
    if k < 1 or k > d:
        raise InvalidDegreeError(f"Koszul of a {k}-form on a {d}-cell")
    mons = monomials(d, r)
    shift = shift_table(d, r + 1)
    src = _combos(d, k)
    dst = _combo_index(d, k - 1)
    na_src, na_dst = len(src), len(dst)
    M = np.zeros((n_monomials(d, r + 1) * na_dst, len(mons) * na_src))
    for m in range(len(mons)):
        for a, beta in enumerate(src):
            for p, j in enumerate(beta):
                rest = beta[:p] + beta[p + 1:]
                M[shift[m, j] * na_dst + dst[rest], m * na_src + a] += (-1) ** p
    return M


@lru_cache(maxsize=None)
def star_matrix(d: int, k: int, r: int) -> np.ndarray:
    """Hodge star ``P_r Lambda^k -> P_r Lambda^{d-k}`` in a positive orthonormal frame."""
    src = _combos(d, k)
    dst = _combo_index(d, d - k)
    S = np.zeros((len(dst), len(src)))
    for a, beta in enumerate(src):
        sign, comp = _star(d, beta)
        S[dst[comp], a] = sign
    return np.kron(np.eye(n_monomials(d, r)), S)


def star_inverse_matrix(d: int, k: int, r: int) -> np.ndarray:
    """Inverse of ``star_matrix(d, k, r)``, acting on ``(d-k)``-forms."""
    return (-1) ** (k * (d - k)) * star_matrix(d, d - k, r)


def exterior_derivative(w: PolyForm) -> PolyForm:
    d, k, r = w.cell_dim, w.form_degree, w.poly_degree
    if k >= d:
        raise InvalidDegreeError(f"exterior derivative of a {k}-form on a {d}-cell")
    out = d_matrix(d, k, r) @ w.vector / w.scale
    res = PolyForm(d, k + 1, r, out, w.scale)
    return res.raise_degree(max(r - 1, 0)) if r > 0 else PolyForm.zeros(d, k + 1, 0, w.scale)


def koszul(w: PolyForm) -> PolyForm:
    d, k, r = w.cell_dim, w.form_degree, w.poly_degree
    if k == 0:
        raise InvalidDegreeError("Koszul operator of a 0-form")
    out = koszul_matrix(d, k, r) @ w.vector * w.scale
    return PolyForm(d, k - 1, r + 1, out, w.scale)


def hodge_star(w: PolyForm) -> PolyForm:
    d, k, r = w.cell_dim, w.form_degree, w.poly_degree
    return PolyForm(d, d - k, r, star_matrix(d, k, r) @ w.vector, w.scale)


def hodge_star_inverse(w: PolyForm) -> PolyForm:
    d, k, r = w.cell_dim, w.form_degree, w.poly_degree
    return PolyForm(d, d - k, r, star_inverse_matrix(d, d - k, r) @ w.vector, w.scale)


def wedge(w: PolyForm, u: PolyForm) -> PolyForm:
    if w.cell_dim != u.cell_dim:
        raise ValueError("forms on cells of different dimension")
    d = w.cell_dim
    k, l = w.form_degree, u.form_degree
    if k + l > d:
        raise InvalidDegreeError(f"wedge of degrees {k} and {l} on a {d}-cell")
    r = w.poly_degree + u.poly_degree
    st = sum_table(d, w.poly_degree, u.poly_degree)
    dst = _combo_index(d, k + l)
    out = np.zeros((n_monomials(d, r), n_alternators(d, k + l)))
    for a, ba in enumerate(_combos(d, k)):
        for b, bb in enumerate(_combos(d, l)):
            sign, merged = _merge(ba, bb)
            if sign == 0:
                continue
            prod = np.outer(w.coeffs[:, a], u.coeffs[:, b])
            np.add.at(out[:, dst[merged]], st, sign * prod)
    return PolyForm(d, k + l, r, out, w.scale)


def trace(w: PolyForm, cell: CellGeometry, sub: CellGeometry) -> PolyForm:
    """Pull ``w`` (written in the chart of ``cell``) back to the chart of ``sub``."""
    if not cell.check_subcell(sub):
        raise ValueError("target is not contained in the affine hull of the cell")
    if w.form_degree > sub.dim:
        raise InvalidDegreeError(f"trace of a {w.form_degree}-form onto a {sub.dim}-cell")
    M = cell.pullback(sub, w.form_degree, w.poly_degree)
    return PolyForm(sub.dim, w.form_degree, w.poly_degree, M @ w.vector, sub.scale)


def inner_product(w: PolyForm, u: PolyForm, cell: CellGeometry) -> float:
    """Exact ``int_f w ^ *u`` over the simplices of ``cell``."""
    if w.form_degree != u.form_degree or w.cell_dim != u.cell_dim:
        raise InvalidDegreeError("inner product of forms of different degree")
    G = cell.form_gram(w.form_degree, w.poly_degree, u.poly_degree)
    return float(w.vector @ G @ u.vector)


def integrate(w: PolyForm, cell: CellGeometry) -> float:
    """Integral of a top-degree form over the oriented cell."""
    if w.form_degree != cell.dim:
        raise InvalidDegreeError("only top-degree forms can be integrated over a cell")
    return float(cell.moments(w.poly_degree) @ w.coeffs[:, 0])


def random_polyform(rng, d, k, r, scale=1.0) -> PolyForm:
    return PolyForm(d, k, r, rng.standard_normal((n_monomials(d, r), n_alternators(d, k))), scale)


# ---------------------------------------------------------- trimmed spaces

def _gram_factor(G: np.ndarray) -> np.ndarray:
    """Upper factor ``U`` with ``G = U^T U``; falls back to a symmetric root."""
    try:
        return sla.cholesky(G, lower=False)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(G)
        return (V * np.sqrt(np.clip(w, 0.0, None))).T


def orthonormal_span(S: np.ndarray, G: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """L2-orthonormal basis of the column span of ``S`` for the metric ``G``.

    Rank is decided on the singular values of ``U S`` with ``G = U^T U``;
    values below ``tol`` times the largest are dropped.
    """
    if S.shape[1] == 0:
        return np.zeros((S.shape[0], 0))
    U = _gram_factor(G)
    B = U @ S
    _, s, Vt = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((S.shape[0], 0))
    keep = s > tol * s[0]
    return S @ (Vt[keep].T / s[keep])


def _truncate(M: np.ndarray, d: int, k: int, r: int, tol: float = 1e-9) -> np.ndarray:
    """Drop the top rows of a coefficient matrix from ``P_R`` down to ``P_r``."""
    n = n_monomials(d, r) * n_alternators(d, k)
    tail = M[n:]
    if tail.size and np.abs(tail).max() > tol * max(1.0, np.abs(M).max()):
        raise ValueError("truncation would drop nonzero coefficients")
    return M[:n]


def _pad(M: np.ndarray, d: int, k: int, r: int) -> np.ndarray:
    n = n_monomials(d, r) * n_alternators(d, k)
    out = np.zeros((n,) + M.shape[1:])
    out[: M.shape[0]] = M
    return out


def d_range(cell: CellGeometry, k: int, r: int) -> np.ndarray:
    """Spanning set of ``d P_r Lambda^{k-1}`` as columns in ``P_r Lambda^k``."""
    d = cell.dim
    if k == 0 or r < 1:
        return np.zeros((n_monomials(d, r) * n_alternators(d, k), 0))
    return d_matrix(d, k - 1, r) / cell.scale


def koszul_range(cell: CellGeometry, k: int, r: int) -> np.ndarray:
    """Spanning set of ``kappa P_r Lambda^{k+1}`` as columns in ``P_{r+1} Lambda^k``."""
    d = cell.dim
    if k + 1 > d or r < 0:
        return np.zeros((n_monomials(d, max(r + 1, 0)) * n_alternators(d, k), 0))
    return koszul_matrix(d, k + 1, r) * cell.scale


@dataclass
class TrimmedBasis:
    """Basis of the trimmed space ``P^-_r Lambda^k`` of one cell.

    ``matrix`` holds the basis forms as columns of coefficients in
    ``P_r Lambda^k``; ``split`` tags the exact-form block and the Koszul block.
    """

    cell: object
    form_degree: int
    poly_degree: int
    matrix: np.ndarray
    gram: np.ndarray
    split: tuple[slice, slice]
    geometry: CellGeometry = field(repr=False)
    condition: float = 1.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def basis_forms(self) -> list[PolyForm]:
        g = self.geometry
        return [PolyForm(g.dim, self.form_degree, self.poly_degree, self.matrix[:, i], g.scale)
                for i in range(self.dim)]

    def form(self, c: np.ndarray) -> PolyForm:
        g = self.geometry
        return PolyForm(g.dim, self.form_degree, self.poly_degree, self.matrix @ c, g.scale)

    def projector(self, r_in: int | None = None) -> np.ndarray:
        """Matrix taking ``P_{r_in} Lambda^k`` coefficients to basis coordinates."""
        r_in = self.poly_degree if r_in is None else r_in
        G = self.geometry.form_gram(self.form_degree, self.poly_degree, r_in)
        return sla.cho_solve(sla.cho_factor(self.gram), self.matrix.T @ G)


def build_trimmed_basis(cell: CellGeometry, r: int, k: int, key=None) -> TrimmedBasis:
    """Basis of ``P^-_r Lambda^k(f) = d P_r Lambda^{k-1} + kappa P_{r-1} Lambda^{k+1}``."""
    d = cell.dim
    if k < 0 or k > d or r < 0:
        raise InvalidDegreeError(f"trimmed space of degree ({r}, {k}) on a {d}-cell")
    if cell.measure <= 0:
        raise IllConditionedBasisError("zero-measure cell", cell=key)
    G = cell.form_gram(k, r)
    if k == 0:
        Q = orthonormal_span(np.eye(G.shape[0]), G)
        nd = Q.shape[1]
        blocks = [Q]
    else:
        Qd = orthonormal_span(d_range(cell, k, r), G)
        K = koszul_range(cell, k, r - 1)
        Qk = orthonormal_span(_pad(K, d, k, r), G) if K.shape[1] else np.zeros((G.shape[0], 0))
        nd = Qd.shape[1]
        blocks = [Qd, Qk]
    T = np.hstack(blocks)
    gram = T.T @ G @ T
    gram = 0.5 * (gram + gram.T)
    if T.shape[1]:
        ev = np.linalg.eigvalsh(gram)
        cond = ev[-1] / ev[0] if ev[0] > 0 else np.inf
    else:
        cond = 1.0
    if cond > CONDITION_CAP:
        raise IllConditionedBasisError(
            f"trimmed basis of cell {key} has Gram condition {cond:.3e}", cell=key, condition=cond)
    log.debug("trimmed basis cell=%s r=%d k=%d dim=%d cond=%.3e", key, r, k, T.shape[1], cond)
    return TrimmedBasis(key, k, r, T, gram, (slice(0, nd), slice(nd, T.shape[1])), cell, cond)


def trimmed_project(w, basis: TrimmedBasis) -> np.ndarray:
    """Coordinates of the L2 projection of ``w`` onto the trimmed space."""
    if isinstance(w, PolyForm):
        if w.form_degree != basis.form_degree:
            raise InvalidDegreeError("form degree does not match the basis")
        return basis.projector(w.poly_degree) @ w.vector
    return basis.projector() @ np.asarray(w, dtype=float)


# ------------------------------------------------------- local constants

@dataclass
class LocalConstants:
    nd: float
    nk: float
    nd_inv: float
    nk_inv: float
    trace_const: float


def _max_gen_sv(A, G_out, G_in):
    """Largest ``||A x||_{G_out} / ||x||_{G_in}``."""
    if A.shape[1] == 0:
        return 0.0
    lam = sla.eigh(A.T @ G_out @ A, G_in, eigvals_only=True)
    return float(np.sqrt(max(lam[-1], 0.0)))


def _min_sv_on_basis(A, Q, G_out):
    """Smallest ``||A x||_{G_out}`` over unit vectors of an orthonormal basis ``Q``."""
    if Q.shape[1] == 0:
        return np.nan
    B = A @ Q
    lam = np.linalg.eigvalsh(B.T @ G_out @ B)
    return float(np.sqrt(max(lam[0], 0.0)))


def measure_local_constants(cell: CellGeometry, boundary: list[CellGeometry],
                            r: int, k: int) -> LocalConstants:
    """Operator norms of ``d``, ``kappa``, their inverses and the discrete trace.

    All quantities act on degree-``k`` forms of ``cell``: ``d`` on
    ``P_r Lambda^k``, ``kappa`` on ``P_r Lambda^k``, ``d^{-1}`` on
    ``d kappa P_r Lambda^k`` and ``kappa^{-1}`` on ``kappa d P_r Lambda^k``.
    The trace constant is ``sup ||tr w||_{boundary} / ||w||`` over
    ``P_r Lambda^k`` with the boundary norm summed over ``boundary``.
    """
    d = cell.dim
    G = cell.form_gram(k, r)
    nan = float("nan")
    nd = nk = nd_inv = nk_inv = nan
    if k < d:
        D = d_matrix(d, k, r) / cell.scale
        nd = _max_gen_sv(D, cell.form_gram(k + 1, r), G)
    if k >= 1:
        K = koszul_matrix(d, k, r) * cell.scale
        nk = _max_gen_sv(K, cell.form_gram(k - 1, r + 1), G)
        # d^{-1}: d kappa P_r Lambda^k -> kappa P_r Lambda^k
        Qk = orthonormal_span(K, cell.form_gram(k - 1, r + 1))
        Dk = d_matrix(d, k - 1, r + 1) / cell.scale
        s = _min_sv_on_basis(Dk, Qk, cell.form_gram(k, r + 1))
        nd_inv = 1.0 / s if s and s > 0 else nan
    if k < d and k >= 0 and r >= 1:
        # kappa^{-1}: kappa d P_r Lambda^k -> d P_r Lambda^k
        Dr = d_matrix(d, k, r) / cell.scale
        Qd = orthonormal_span(Dr, cell.form_gram(k + 1, r))
        Kk = koszul_matrix(d, k + 1, r) * cell.scale
        s = _min_sv_on_basis(Kk, Qd, cell.form_gram(k, r + 1))
        nk_inv = 1.0 / s if s and s > 0 else nan
    Gb = np.zeros_like(G)
    for sub in boundary:
        if k > sub.dim:
            continue
        M = cell.pullback(sub, k, r)
        Gb += M.T @ sub.form_gram(k, r) @ M
    trace_const = _max_gen_sv(np.eye(G.shape[0]), Gb, G)
    return LocalConstants(nd, nk, nd_inv, nk_inv, trace_const)


def decomposition_constant(cell: CellGeometry, r: int, k: int) -> float:
    """Best ``C`` with ``||mu|| + ||nu|| <= C ||mu + nu||`` on the two blocks.

    ``mu`` ranges over ``d P_{r+1} Lambda^{k-1}`` and ``nu`` over
    ``kappa P_{r-1} Lambda^{k+1}``; the value is ``sqrt(2 / (1 - c))`` with
    ``c`` the cosine of the smallest principal angle between the blocks.
    """
    d = cell.dim
    G = cell.form_gram(k, r)
    if k == 0:
        return 1.0
    Dm = _truncate(d_matrix(d, k - 1, r + 1), d, k, r) / cell.scale
    Q1 = orthonormal_span(Dm, G)
    K = koszul_range(cell, k, r - 1)
    if K.shape[1] == 0 or Q1.shape[1] == 0:
        return 1.0
    Q2 = orthonormal_span(_pad(K, d, k, r), G)
    c = np.linalg.norm(Q1.T @ G @ Q2, 2)
    return float(np.sqrt(2.0 / (1.0 - min(c, 1.0 - 1e-16))))
