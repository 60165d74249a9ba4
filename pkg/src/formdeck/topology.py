"""Chains, cochains, incidence matrices and cycle spaces.

A :class:`ChainComplex` is either the full simplicial or polytopal complex of
a mesh, or the simplicial complex restricted to the closure ``S_h(f)`` of a
cell or to its boundary ``S_h(df)``.  Chains and cochains carry dense
coefficient vectors indexed by the complex's own (local) numbering; the
global simplex or cell ids are in ``complex.ids[k]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import log as _log

import numpy as np
import scipy.sparse as sps

from .errors import FeasibilityError, NotABoundaryError
from .mesh import Cell, PolytopalMesh

log = logging.getLogger(__name__)

RANK_TOL = 1e-9
RESIDUAL_TOL = 1e-10


@dataclass(eq=False)
class ChainComplex:
    tag: str
    ids: list[np.ndarray]
    boundaries: list[sps.csr_matrix]  # boundaries[k]: C_k -> C_{k-1}

    @property
    def top(self) -> int:
        return len(self.ids) - 1

    def size(self, k: int) -> int:
        return len(self.ids[k]) if 0 <= k <= self.top else 0

    def boundary_matrix(self, k: int) -> sps.csr_matrix:
        if k <= 0 or k > self.top:
            return sps.csr_matrix((self.size(k - 1), self.size(k)), dtype=np.int64)
        return self.boundaries[k]

    def incidence_matrix(self, k: int) -> sps.csr_matrix:
        """Coboundary ``delta^k``: rows ``(k+1)``-cells, columns ``k``-cells."""
        return self.boundary_matrix(k + 1).T.tocsr()

    def local_index(self, k: int) -> dict:
        return {int(g): i for i, g in enumerate(self.ids[k])}


@dataclass
class Chain:
    complex: ChainComplex
    degree: int
    coeffs: np.ndarray

    def support(self) -> np.ndarray:
        return self.complex.ids[self.degree][np.nonzero(self.coeffs)[0]]

    def as_dict(self) -> dict:
        ids = self.complex.ids[self.degree]
        return {int(ids[i]): float(self.coeffs[i]) for i in np.nonzero(self.coeffs)[0]}


@dataclass
class Cochain:
    complex: ChainComplex
    degree: int
    coeffs: np.ndarray

    def pair(self, w: Chain) -> float:
        if w.degree != self.degree:
            raise ValueError("pairing of different degrees")
        return float(self.coeffs @ w.coeffs)


def simplicial_complex(mesh: PolytopalMesh) -> ChainComplex:
    ids = [np.arange(mesh.num_simplices(k)) for k in range(mesh.n + 1)]
    bd = [None] + [mesh.simplex_boundary_matrix(k) for k in range(1, mesh.n + 1)]
    return ChainComplex("simplicial", ids, bd)


def polytopal_complex(mesh: PolytopalMesh) -> ChainComplex:
    ids = [np.arange(mesh.num_cells(k)) for k in range(mesh.n + 1)]
    bd = [None] + [mesh.cell_boundary_matrix(k) for k in range(1, mesh.n + 1)]
    return ChainComplex("polytopal", ids, bd)


def restricted_complex(mesh: PolytopalMesh, ids: list[np.ndarray], tag: str) -> ChainComplex:
    bd = [None]
    for k in range(1, len(ids)):
        B = mesh.simplex_boundary_matrix(k)[ids[k - 1]][:, ids[k]]
        bd.append(B.tocsr())
    return ChainComplex(tag, [np.asarray(i, dtype=int) for i in ids], bd)


def cell_complex(mesh: PolytopalMesh, cell: Cell) -> ChainComplex:
    """``S_h(f)``: all simplices in the closure of ``cell``."""
    return restricted_complex(mesh, [cell.closure[k] for k in range(cell.dim + 1)],
                              f"S_h{cell.key}")


def cell_boundary_complex(mesh: PolytopalMesh, cell: Cell) -> ChainComplex:
    """``S_h(df)``: simplices of the closure lying on the boundary of ``cell``."""
    return restricted_complex(mesh, [cell.boundary_closure(k) for k in range(cell.dim)],
                              f"S_h(d{cell.key})")


def boundary(w: Chain) -> Chain:
    B = w.complex.boundary_matrix(w.degree)
    return Chain(w.complex, w.degree - 1, B @ w.coeffs) if w.degree > 0 else \
        Chain(w.complex, -1, np.zeros(0))


def coboundary(lam: Cochain) -> Cochain:
    D = lam.complex.incidence_matrix(lam.degree)
    return Cochain(lam.complex, lam.degree + 1, D @ lam.coeffs)


def matrix_rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


@dataclass
class CycleSpace:
    basis: np.ndarray  # columns span Z_k
    dim_cycles: int
    dim_boundaries: int

    @property
    def betti(self) -> int:
        return self.dim_cycles - self.dim_boundaries


def cycle_space(cx: ChainComplex, k: int) -> CycleSpace:
    """Kernel basis of ``d_k`` and the rank of ``d_{k+1}``."""
    B = cx.boundary_matrix(k).toarray().astype(float)
    m = cx.size(k)
    if B.shape[0] == 0 or m == 0:
        basis = np.eye(m)
    else:
        _, s, Vt = np.linalg.svd(B, full_matrices=True)
        rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        basis = Vt[rank:].T
    dim_b = matrix_rank(cx.boundary_matrix(k + 1).toarray()) if k < cx.top else 0
    return CycleSpace(basis, basis.shape[1], dim_b)


def betti_numbers(cx: ChainComplex) -> list[int]:
    return [cycle_space(cx, k).betti for k in range(cx.top + 1)]


# ----------------------------------------------------- spanning sets

@dataclass
class SpanningSet:
    """Output of the spanning-set loop on one cell for one degree."""

    cell: tuple[int, int]
    degree: int
    complex: ChainComplex
    cycles: list[Chain]
    simplices: list[int]
    boundary_cycle_dim: int = 0
    cycle_dim: int = 0
    residuals: list[float] = field(default_factory=list)

    def duality_matrix(self) -> np.ndarray:
        loc = self.complex.local_index(self.degree)
        return np.array([[z.coeffs[loc[F]] for z in self.cycles] for F in self.simplices]
                        ).reshape(len(self.simplices), len(self.cycles))


def construct_spanning_set(mesh: PolytopalMesh, cell: Cell, k: int) -> SpanningSet:
    """Cycles ``z_i`` dual to interior simplices ``F_i`` that complete ``Z_k(S_h(df))``.

    Interior ``k``-simplices are visited in ascending id.  ``F`` is accepted
    when some cycle supported on the boundary simplices, the previously
    rejected interior simplices and ``F`` pairs to one with ``F``; the
    minimal-norm such cycle is recorded.
    """
    if k > cell.dim - 1 or k < 0:
        raise ValueError(f"degree {k} is not below the cell dimension {cell.dim}")
    cx = cell_complex(mesh, cell)
    B = cx.boundary_matrix(k).toarray().astype(float)
    loc = cx.local_index(k)
    V = sorted(loc[int(F)] for F in cell.boundary_closure(k))
    interior = sorted(int(F) for F in cell.interior[k])
    cycles, accepted, residuals = [], [], []
    for F in interior:
        jF = loc[F]
        J = sorted(V + [jF])
        BJ = B[:, J]
        e = np.zeros((1, len(J)))
        e[0, J.index(jF)] = 1.0
        A = np.vstack([BJ, e])
        rhs = np.zeros(A.shape[0])
        rhs[-1] = 1.0
        feasible = matrix_rank(A) > matrix_rank(BJ)
        zJ, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        res = float(np.linalg.norm(A @ zJ - rhs))
        if feasible != (res <= 1e-8):
            raise FeasibilityError(
                f"cell {cell.key}, k={k}, simplex {F}: rank test says feasible={feasible} "
                f"but least-norm residual is {res:.3e}")
        if feasible:
            z = np.zeros(cx.size(k))
            z[J] = zJ
            cycles.append(Chain(cx, k, z))
            accepted.append(F)
            residuals.append(res)
        else:
            V = sorted(V + [jF])
    out = SpanningSet(cell.key, k, cx, cycles, accepted, residuals=residuals)
    bcx = cell_boundary_complex(mesh, cell)
    out.boundary_cycle_dim = cycle_space(bcx, k).dim_cycles
    out.cycle_dim = cycle_space(cx, k).dim_cycles
    if out.cycle_dim != out.boundary_cycle_dim + len(cycles):
        raise FeasibilityError(
            f"cell {cell.key}, k={k}: dim Z_k = {out.cycle_dim} but boundary cycles "
            f"{out.boundary_cycle_dim} + {len(cycles)} spanning cycles")
    return out


@dataclass
class Preimage:
    chain: Chain
    norm_ratio: float
    residual: float
    cramer_cap: float


def boundary_preimage(z: Chain, tol: float = RESIDUAL_TOL) -> Preimage:
    """Least-norm ``w`` with ``dw = z`` in the complex carrying ``z``."""
    cx, k = z.complex, z.degree
    B = cx.boundary_matrix(k + 1).toarray().astype(float)
    if B.shape[1] == 0:
        w = np.zeros(0)
    else:
        w, *_ = np.linalg.lstsq(B, z.coeffs, rcond=None)
    res = float(np.linalg.norm(B @ w - z.coeffs)) if B.shape[1] else float(np.linalg.norm(z.coeffs))
    scale = max(1.0, float(np.linalg.norm(z.coeffs)))
    if res > tol * scale:
        raise NotABoundaryError(f"chain is not a boundary in {cx.tag} (residual {res:.3e})",
                                residual=res)
    zn = float(np.linalg.norm(z.coeffs))
    ratio = float(np.linalg.norm(w)) / zn if zn > 0 else 0.0
    r = cx.size(k)
    cap = float(np.exp(0.5 * r * _log(r))) if r > 1 else 1.0
    if ratio > cap:
        raise NotABoundaryError(f"preimage ratio {ratio:.3e} exceeds the Cramer cap {cap:.3e}")
    log.debug("boundary preimage in %s: ratio %.3e", cx.tag, ratio)
    return Preimage(Chain(cx, k + 1, w), ratio, res, cap)
