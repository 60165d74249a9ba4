"""Lifting polytopal cochains to the simplicial submesh and back.

``I^k`` maps a cochain on the polytopal cells to one on the simplicial
submesh so that it commutes with the coboundary; ``J^k`` sums simplicial
values over the member simplices of each ``k``-cell and is a left inverse.
Both are linear, so they are materialised as matrices.  ``I^k`` is built
for ``k = n`` first and, within each degree, cell dimension by cell
dimension upwards, since its values on a ``d``-cell need ``I^{k+1}`` on the
cell and ``I^k`` on the cell boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .errors import FeasibilityError, NotACoboundaryError
from .mesh import PolytopalMesh
from .topology import Chain, SpanningSet, boundary_preimage, construct_spanning_set
from .whitney import WhitneyComplex

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


@dataclass
class CellLiftData:
    """Spanning cycles of one cell in one degree with their preimages."""

    spanning: SpanningSet
    anchor: int | None
    preimages: list[Chain] = field(default_factory=list)
    boundary_parts: list[np.ndarray] = field(default_factory=list)  # global k-simplex ids
    boundary_coeffs: list[np.ndarray] = field(default_factory=list)


class LiftContext:
    """Per-cell spanning data and the lift matrices of a mesh."""

    def __init__(self, mesh: PolytopalMesh):
        self.mesh = mesh
        self.n = mesh.n
        self._data: dict[tuple[int, int, int], CellLiftData] = {}

    def anchor(self, d: int, i: int) -> int:
        """Lowest boundary vertex of the cell, used to reduce degree-0 cycles."""
        c = self.mesh.cell(d, i)
        return int(c.boundary_closure(0).min())

    def cell_data(self, d: int, i: int, k: int) -> CellLiftData:
        key = (d, i, k)
        if key in self._data:
            return self._data[key]
        mesh = self.mesh
        cell = mesh.cell(d, i)
        span = construct_spanning_set(mesh, cell, k)
        cx = span.complex
        loc = cx.local_index(k)
        anchor = self.anchor(d, i) if k == 0 else None
        bd_ids = set(int(F) for F in cell.boundary_closure(k))
        data = CellLiftData(span, anchor)
        for z in span.cycles:
            coeffs = z.coeffs.copy()
            if anchor is not None:
                coeffs[loc[anchor]] -= 1.0
            w = boundary_preimage(Chain(cx, k, coeffs))
            data.preimages.append(w.chain)
            ids = cx.ids[k]
            mask = np.array([int(g) in bd_ids for g in ids]) & (coeffs != 0)
            data.boundary_parts.append(ids[mask])
            data.boundary_coeffs.append(coeffs[mask])
        self._data[key] = data
        return data

    def build(self) -> "LiftContext":
        for d in range(1, self.n + 1):
            for c in self.mesh.cells[d]:
                for k in range(d):
                    self.cell_data(d, c.id, k)
        return self

    # ---------------------------------------------------------- matrices
    def cell_coboundary(self, k: int) -> np.ndarray:
        if k >= self.n:
            return np.zeros((0, self.mesh.num_cells(k)))
        return self.mesh.cell_boundary_matrix(k + 1).T.toarray().astype(float)

    def simplex_coboundary(self, k: int) -> sps.csr_matrix:
        if k >= self.n:
            return sps.csr_matrix((0, self.mesh.num_simplices(k)))
        return self.mesh.simplex_boundary_matrix(k + 1).T.tocsr().astype(float)

    @cached_property
    def lift_matrices(self) -> list[np.ndarray]:
        """``L[k]`` with ``I^k(lam) = L[k] @ lam`` (rows simplices, columns cells)."""
        mesh, n = self.mesh, self.n
        L: list[np.ndarray | None] = [None] * (n + 1)
        for k in range(n, -1, -1):
            Lk = np.zeros((mesh.num_simplices(k), mesh.num_cells(k)))
            for c in mesh.cells[k]:
                members = c.simplices
                Lk[members, c.id] = mesh.simplex_measures[k][members] / c.measure
            if k < n:
                D = self.cell_coboundary(k)
                LD = L[k + 1] @ D
                for d in range(k + 1, n + 1):
                    for c in mesh.cells[d]:
                        data = self.cell_data(d, c.id, k)
                        for F, w, bids, bco in zip(data.spanning.simplices, data.preimages,
                                                   data.boundary_parts, data.boundary_coeffs):
                            wi = w.complex.ids[k + 1]
                            row = w.coeffs @ LD[wi] - bco @ Lk[bids]
                            Lk[F] = row
            L[k] = Lk
        return L

    @cached_property
    def projection_matrices(self) -> list[sps.csr_matrix]:
        """``J[k]`` summing member-simplex values of each ``k``-cell."""
        mesh = self.mesh
        out = []
        for k in range(self.n + 1):
            rows, cols = [], []
            for c in mesh.cells[k]:
                rows.extend([c.id] * len(c.simplices))
                cols.extend(int(s) for s in c.simplices)
            out.append(sps.csr_matrix((np.ones(len(rows)), (rows, cols)),
                                      shape=(mesh.num_cells(k), mesh.num_simplices(k))))
        return out

    @cached_property
    def whitney(self) -> WhitneyComplex:
        return WhitneyComplex(self.mesh)

    # -------------------------------------------------------- diagnostics
    def cochain_map_defect(self, k: int, lam: np.ndarray) -> float:
        """``max |delta I^k lam - I^{k+1} delta lam|`` relative to ``max |I^{k+1} delta lam|``."""
        L = self.lift_matrices
        lhs = self.simplex_coboundary(k) @ (L[k] @ lam)
        rhs = L[k + 1] @ (self.cell_coboundary(k) @ lam)
        return float(np.abs(lhs - rhs).max(initial=0.0)) / max(1.0, np.abs(rhs).max(initial=0.0))

    def left_inverse_defect(self, k: int, lam: np.ndarray) -> float:
        back = self.projection_matrices[k] @ (self.lift_matrices[k] @ lam)
        return float(np.abs(back - lam).max(initial=0.0))

    def projection_cochain_defect(self, k: int, lt: np.ndarray) -> float:
        J = self.projection_matrices
        lhs = self.cell_coboundary(k) @ (J[k] @ lt)
        rhs = J[k + 1] @ (self.simplex_coboundary(k) @ lt)
        return float(np.abs(lhs - rhs).max(initial=0.0)) / max(1.0, np.abs(rhs).max(initial=0.0))

    def local_lift_constant(self, k: int) -> float:
        """Worst per-``n``-cell constant ``C`` in ``|I lam|^2 <= C (|lam|^2 + |delta lam|^2)``."""
        mesh, n = self.mesh, self.n
        L = self.lift_matrices[k]
        D = self.cell_coboundary(k)
        worst = 0.0
        for T in mesh.cells[n]:
            rows = T.closure[k]
            cols = T.subcells[k]
            drows = T.subcells[k + 1] if k < n else np.zeros(0, int)
            A = L[np.ix_(rows, cols)]
            B = np.eye(len(cols))
            if drows.size:
                Dl = D[np.ix_(drows, cols)]
                B = B + Dl.T @ Dl
            ev = sla.eigh(A.T @ A, B, eigvals_only=True)
            worst = max(worst, float(ev[-1]))
        return worst

    def local_projection_constant(self, k: int) -> float:
        """Worst per-``n``-cell operator norm squared of ``J^k``."""
        J = self.projection_matrices[k]
        worst = 0.0
        for T in self.mesh.cells[self.n]:
            A = J[T.subcells[k]][:, T.closure[k]].toarray()
            if A.size:
                worst = max(worst, float(np.linalg.norm(A, 2) ** 2))
        return worst


def lift(ctx: LiftContext, lam: np.ndarray, k: int) -> np.ndarray:
    """Simplicial cochain ``I^k(lam)``."""
    return ctx.lift_matrices[k] @ np.asarray(lam, dtype=float)


def project_back(ctx: LiftContext, lt: np.ndarray, k: int) -> np.ndarray:
    """Polytopal cochain ``J^k(lt)``."""
    return ctx.projection_matrices[k] @ np.asarray(lt, dtype=float)


@dataclass
class PoincareResult:
    cochain: np.ndarray
    weighted_ratio: float
    residual: float
    whitney_ratio: float


def weighted_norm_sq(mesh: PolytopalMesh, values: np.ndarray, k: int, power: int) -> float:
    """``sum_T h_T^power sum_{f in k-cells of T} values_f^2``."""
    total = 0.0
    for T in mesh.cells[mesh.n]:
        total += T.h ** power * float(np.sum(values[T.subcells[k]] ** 2))
    return total


def cochain_poincare(ctx: LiftContext, xi: np.ndarray, k: int,
                     tol: float = FEASIBILITY_TOL) -> PoincareResult:
    """Polytopal ``k``-cochain ``lam`` with ``delta lam = xi`` and a measured weighted bound."""
    mesh, n = ctx.mesh, ctx.n
    if not 0 <= k < n:
        raise ValueError(f"degree {k} must lie in [0, {n - 1}]")
    xi = np.asarray(xi, dtype=float)
    D = ctx.cell_coboundary(k)
    theta, *_ = np.linalg.lstsq(D, xi, rcond=None)
    res = float(np.linalg.norm(D @ theta - xi))
    if res > tol * max(1.0, float(np.linalg.norm(xi))):
        raise NotACoboundaryError(f"cochain is not a coboundary (residual {res:.3e})",
                                  residual=res)
    xt = lift(ctx, xi, k + 1)
    try:
        lt, wratio = ctx.whitney.min_norm_preimage(xt, k)
    except NotACoboundaryError as exc:
        raise FeasibilityError(f"lifted cochain is not exact in the Whitney complex: {exc}") \
            from exc
    lam = project_back(ctx, lt, k)
    resid = float(np.abs(D @ lam - xi).max(initial=0.0))
    if resid > tol * max(1.0, float(np.abs(xi).max(initial=0.0))):
        raise FeasibilityError(f"delta lam differs from xi by {resid:.3e}")
    num = weighted_norm_sq(mesh, lam, k, n - 2 * k)
    den = weighted_norm_sq(mesh, xi, k + 1, n - 2 * k - 2)
    ratio = float(np.sqrt(num / den)) if den > 0 else 0.0
    log.debug("cochain Poincare k=%d: weighted ratio %.4g", k, ratio)
    return PoincareResult(lam, ratio, resid, wratio)


def poincare_operator(ctx: LiftContext, k: int) -> np.ndarray:
    """Dense matrix of ``xi -> lam`` restricted to coboundaries (``lam`` from ``cochain_poincare``)."""
    W = ctx.whitney
    Ds = ctx.simplex_coboundary(k).toarray()
    Lc = sla.cholesky(W.gram(k).toarray(), lower=True)
    A = sla.solve_triangular(Lc, Ds.T, lower=True).T
    P = sla.solve_triangular(Lc.T, np.linalg.pinv(A, rcond=1e-12), lower=False)
    return ctx.projection_matrices[k] @ (P @ ctx.lift_matrices[k + 1])


def weighted_poincare_constant(ctx: LiftContext, k: int) -> float:
    """Worst weighted ratio of ``cochain_poincare`` over all coboundaries of degree ``k+1``."""
    mesh, n = ctx.mesh, ctx.n
    D = ctx.cell_coboundary(k)
    T = poincare_operator(ctx, k) @ D
    wl = np.zeros(mesh.num_cells(k))
    wx = np.zeros(mesh.num_cells(k + 1))
    for c in mesh.cells[n]:
        wl[c.subcells[k]] += c.h ** (n - 2 * k)
        wx[c.subcells[k + 1]] += c.h ** (n - 2 * k - 2)
    _, s, Vt = np.linalg.svd(D)
    rank = int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        return 0.0
    V = Vt[:rank].T
    TV, DV = T @ V, D @ V
    ev = sla.eigh(TV.T @ (wl[:, None] * TV), DV.T @ (wx[:, None] * DV), eigvals_only=True)
    return float(np.sqrt(max(ev[-1], 0.0)))
