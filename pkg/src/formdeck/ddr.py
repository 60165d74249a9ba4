"""Discrete de Rham spaces on polytopal meshes.

A discrete ``k``-form stores, for every ``d``-cell ``f`` with ``d >= k``,
the coordinates of ``*omega_f`` in the trimmed basis of
``P^-_r Lambda^{d-k}(f)``.  Local discrete exterior derivatives and
potentials are linear in these coordinates; each is kept as a pair
``(dof indices, dense matrix)`` producing coefficients of the Hodge-starred
polynomial form in the chart of the cell.  They are assembled one cell
dimension at a time, since both need the potentials on the cell boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from ._poly import alternator_pullback, n_monomials
from .errors import InvalidDegreeError, SolveResidualError
from .exterior import n_alternators
from .geometry import CellGeometry
from .mesh import PolytopalMesh
from .polyform import (
    PolyForm,
    TrimmedBasis,
    _pad,
    _truncate,
    build_trimmed_basis,
    d_matrix,
    exterior_derivative,
    hodge_star,
    hodge_star_inverse,
    integrate,
    koszul_range,
    orthonormal_span,
    star_matrix,
    trace,
    wedge,
)
from .quadrature import simplex_rule

log = logging.getLogger(__name__)

SOLVE_TOL = 1e-10

LocalOp = tuple[np.ndarray, np.ndarray]


def _combine(terms: list[tuple[np.ndarray, np.ndarray]], rows: int) -> LocalOp:
    """Sum operators given on different index sets."""
    idx = np.unique(np.concatenate([t[0] for t in terms])) if terms else np.zeros(0, int)
    pos = {int(g): i for i, g in enumerate(idx)}
    M = np.zeros((rows, len(idx)))
    for ids, A in terms:
        cols = np.array([pos[int(g)] for g in ids], dtype=int)
        M[:, cols] += A
    return idx, M


def _n_forms(d: int, k: int, r: int) -> int:
    return n_monomials(d, r) * n_alternators(d, k)


@dataclass(frozen=True)
class DiscreteKForm:
    """Element of ``X^k_h``: one trimmed component per cell of dimension ``>= k``."""

    space: "DDRComplex"
    degree: int
    values: np.ndarray

    def component(self, d: int, i: int) -> np.ndarray:
        return self.values[self.space.offsets[self.degree][(d, i)]]

    def star_component(self, d: int, i: int) -> PolyForm:
        """``*omega_f`` as a polynomial ``(d-k)``-form in the chart of the cell."""
        return self.space.basis(d, i, d - self.degree).form(self.component(d, i))

    def form_component(self, d: int, i: int) -> PolyForm:
        return hodge_star_inverse(self.star_component(d, i))

    def __add__(self, other: "DiscreteKForm") -> "DiscreteKForm":
        return DiscreteKForm(self.space, self.degree, self.values + other.values)

    def __sub__(self, other: "DiscreteKForm") -> "DiscreteKForm":
        return DiscreteKForm(self.space, self.degree, self.values - other.values)

    def __mul__(self, s: float) -> "DiscreteKForm":
        return DiscreteKForm(self.space, self.degree, self.values * s)

    __rmul__ = __mul__


class DDRComplex:
    """Spaces ``X^k_h``, local operators and global differentials of degree ``r``."""

    def __init__(self, mesh: PolytopalMesh, r: int):
        if r < 0:
            raise InvalidDegreeError("polynomial degree must be non-negative")
        self.mesh = mesh
        self.r = r
        self.n = mesh.n
        self._bases: dict[tuple[int, int, int], TrimmedBasis] = {}
        self.offsets: list[dict[tuple[int, int], slice]] = []
        self.dims: list[int] = []
        for k in range(self.n + 1):
            off, pos = {}, 0
            for d in range(k, self.n + 1):
                for c in mesh.cells[d]:
                    m = self.basis(d, c.id, d - k).dim
                    off[(d, c.id)] = slice(pos, pos + m)
                    pos += m
            self.offsets.append(off)
            self.dims.append(pos)
        self._ops: dict[int, tuple[dict, dict]] = {}

    # ------------------------------------------------------------ bases
    def geometry(self, d: int, i: int) -> CellGeometry:
        return self.mesh.cell(d, i).geometry

    def basis(self, d: int, i: int, l: int) -> TrimmedBasis:
        key = (d, i, l)
        if key not in self._bases:
            self._bases[key] = build_trimmed_basis(self.geometry(d, i), self.r, l, key=(d, i))
        return self._bases[key]

    def dofs(self, k: int, d: int, i: int) -> np.ndarray:
        s = self.offsets[k][(d, i)]
        return np.arange(s.start, s.stop)

    def zero(self, k: int) -> DiscreteKForm:
        return DiscreteKForm(self, k, np.zeros(self.dims[k]))

    def random(self, k: int, rng) -> DiscreteKForm:
        return DiscreteKForm(self, k, rng.standard_normal(self.dims[k]))

    # ---------------------------------------------------- interpolation
    def interpolate(self, omega, k: int, geom: CellGeometry | None = None,
                    degree: int | None = None, quad_degree: int | None = None) -> DiscreteKForm:
        """Interpolate a global ``k``-form.

        ``omega`` is either a :class:`PolyForm` on the ambient space (chart
        ``geom``, identity frame at the origin by default) or a callable
        mapping ``(q, n)`` ambient points to ``(q, C(n, k))`` coefficients in
        the ambient basis ``dx^beta``.  Callables are integrated with a rule
        exact for degree ``degree + r``.
        """
        n = self.n
        out = np.zeros(self.dims[k])
        if isinstance(omega, PolyForm):
            if omega.form_degree != k or omega.cell_dim != n:
                raise InvalidDegreeError("interpolated form must be an ambient k-form")
            if geom is None:
                from .geometry import ambient_geometry

                geom = ambient_geometry(n, scale=omega.scale)
            for d in range(k, n + 1):
                for c in self.mesh.cells[d]:
                    tw = trace(omega, geom, c.geometry)
                    basis = self.basis(d, c.id, d - k)
                    out[self.offsets[k][(d, c.id)]] = basis.projector(tw.poly_degree) @ \
                        hodge_star(tw).vector
            return DiscreteKForm(self, k, out)
        if not callable(omega):
            raise TypeError("omega must be a PolyForm or a callable")
        if degree is None:
            raise ValueError("a callable form needs its polynomial degree (or exactness degree)")
        needed = degree + self.r
        qdeg = needed if quad_degree is None else quad_degree
        if qdeg < needed:
            raise ValueError(f"quadrature degree {qdeg} cannot integrate degree-{degree} data "
                             f"against degree-{self.r} test forms exactly")
        for d in range(k, n + 1):
            for c in self.mesh.cells[d]:
                g = c.geometry
                l = d - k
                basis = self.basis(d, c.id, l)
                Ca = alternator_pullback(g.frame, k)  # ambient k -> cell k
                S = star_matrix(d, k, 0)
                rhs = np.zeros(basis.dim)
                for pts, meas in zip(g.simplices, g.measures):
                    x, w = simplex_rule(pts, qdeg, meas)
                    vals = omega(x) @ Ca.T @ S.T  # (q, C(d, l))
                    y = g.to_local(x)
                    for j, bf in enumerate(basis.basis_forms):
                        rhs[j] += np.sum(w[:, None] * bf.evaluate(y) * vals)
                out[self.offsets[k][(d, c.id)]] = sla.cho_solve(sla.cho_factor(basis.gram), rhs)
        return DiscreteKForm(self, k, out)

    # --------------------------------------------------- local operators
    def _gram(self, d, i, l, r1, r2=None):
        return self.geometry(d, i).form_gram(l, r1, r2)

    def local_operators(self, k: int) -> tuple[dict, dict]:
        """``(potentials, derivatives)`` keyed by ``(d, i)`` for cells of dimension ``>= k``."""
        if k in self._ops:
            return self._ops[k]
        mesh, r, n = self.mesh, self.r, self.n
        pots: dict[tuple[int, int], LocalOp] = {}
        ders: dict[tuple[int, int], LocalOp] = {}
        sign = (-1) ** (k + 1)
        for c in mesh.cells[k]:
            pots[(k, c.id)] = (self.dofs(k, k, c.id), self.basis(k, c.id, 0).matrix.copy())
        for d in range(k + 1, n + 1):
            for c in mesh.cells[d]:
                key = (d, c.id)
                g = c.geometry
                l = d - k
                T = self.basis(d, c.id, l).matrix
                own = self.dofs(k, d, c.id)
                # discrete exterior derivative
                Dm = d_matrix(d, l - 1, r) / g.scale
                G_l = g.form_gram(l, r)
                G_lm = g.form_gram(l - 1, r)
                terms = [(own, sign * Dm.T @ G_l @ T)]
                bterms_r = []
                for j, eps in c.boundary:
                    fp = mesh.cell(d - 1, j)
                    idx, P = pots[(d - 1, j)]
                    Gf = fp.geometry.form_gram(l - 1, r)
                    Tr = g.pullback(fp.geometry, l - 1, r)
                    terms.append((idx, eps * Tr.T @ Gf @ P))
                    bterms_r.append((j, eps, idx, P))
                idx, R = _combine(terms, G_lm.shape[0])
                Dloc = sla.cho_solve(sla.cho_factor(G_lm), R)
                ders[key] = (idx, Dloc)
                # potential
                Km = koszul_range(g, l - 1, r)  # kappa P_r Lambda^l in P_{r+1} Lambda^{l-1}
                Qmu = orthonormal_span(Km, g.form_gram(l - 1, r + 1))
                dQmu = _truncate(d_matrix(d, l - 1, r + 1) @ Qmu / g.scale, d, l, r)
                if l + 1 <= d and r >= 1:
                    Kn = _pad(koszul_range(g, l, r - 1), d, l, r)
                    Qnu = orthonormal_span(Kn, G_l)
                else:
                    Qnu = np.zeros((G_l.shape[0], 0))
                A = sign * np.vstack([dQmu.T @ G_l, Qnu.T @ G_l])
                if A.shape[0] != A.shape[1]:
                    raise SolveResidualError(
                        f"cell {key}: potential system is {A.shape[0]}x{A.shape[1]}; "
                        f"ranks d-kappa {Qmu.shape[1]}, kappa {Qnu.shape[1]}")
                Gmix = g.form_gram(l - 1, r + 1, r)
                rterms = [(idx, Qmu.T @ Gmix @ Dloc)]
                for j, eps, bidx, P in bterms_r:
                    fp = mesh.cell(d - 1, j)
                    Tr1 = g.pullback(fp.geometry, l - 1, r + 1)
                    Gf = fp.geometry.form_gram(l - 1, r + 1, r)
                    rterms.append((bidx, -eps * (Tr1 @ Qmu).T @ Gf @ P))
                top = _combine(rterms, Qmu.shape[1])
                bottom = (own, sign * Qnu.T @ G_l @ T)
                pidx, rhs_top = top
                allidx = np.union1d(pidx, own)
                RHS = np.zeros((A.shape[0], len(allidx)))
                RHS[: Qmu.shape[1], np.searchsorted(allidx, pidx)] = rhs_top
                RHS[Qmu.shape[1]:, np.searchsorted(allidx, own)] = bottom[1]
                Pmat, *_ = np.linalg.lstsq(A, RHS, rcond=None)
                res = np.linalg.norm(A @ Pmat - RHS) / max(1.0, np.linalg.norm(RHS))
                if res > SOLVE_TOL:
                    raise SolveResidualError(
                        f"cell {key}: potential system residual {res:.3e} "
                        f"(cond {np.linalg.cond(A):.3e})", residual=res)
                pots[key] = (allidx, Pmat)
        self._ops[k] = (pots, ders)
        return pots, ders

    @staticmethod
    def _apply(op: LocalOp, values: np.ndarray) -> np.ndarray:
        idx, M = op
        return M @ values[idx]

    def potential(self, w: DiscreteKForm, d: int, i: int) -> PolyForm:
        """``*P^k_{r,f} w`` as a polynomial ``(d-k)``-form on the cell."""
        pots, _ = self.local_operators(w.degree)
        g = self.geometry(d, i)
        return PolyForm(d, d - w.degree, self.r, self._apply(pots[(d, i)], w.values), g.scale)

    def local_derivative(self, w: DiscreteKForm, d: int, i: int) -> PolyForm:
        """``*d^k_{r,f} w`` as a polynomial ``(d-k-1)``-form on the cell."""
        if d <= w.degree:
            raise InvalidDegreeError("local derivative needs a cell of dimension > k")
        _, ders = self.local_operators(w.degree)
        g = self.geometry(d, i)
        return PolyForm(d, d - w.degree - 1, self.r, self._apply(ders[(d, i)], w.values),
                        g.scale)

    # ----------------------------------------------------------- global
    @cached_property
    def _dmats(self) -> list[sps.csr_matrix]:
        out = []
        for k in range(self.n):
            _, ders = self.local_operators(k)
            rows, cols, vals = [], [], []
            for (d, i), (idx, M) in ders.items():
                proj = self.basis(d, i, d - k - 1).projector()
                B = proj @ M
                tgt = self.dofs(k + 1, d, i)
                rows.append(np.repeat(tgt, len(idx)))
                cols.append(np.tile(idx, len(tgt)))
                vals.append(B.ravel())
            cat = (lambda x: np.concatenate(x)) if rows else (lambda x: np.zeros(0))
            out.append(sps.csr_matrix((cat(vals), (cat(rows).astype(int), cat(cols).astype(int))),
                                      shape=(self.dims[k + 1], self.dims[k])))
        return out

    def d_matrix(self, k: int) -> sps.csr_matrix:
        if not 0 <= k < self.n:
            raise InvalidDegreeError(f"no discrete differential of degree {k}")
        return self._dmats[k]

    def global_d(self, w: DiscreteKForm) -> DiscreteKForm:
        return DiscreteKForm(self, w.degree + 1, self.d_matrix(w.degree) @ w.values)

    # ------------------------------------------------------------ norms
    def gram(self, k: int, variant: str = "explicit") -> sps.csr_matrix:
        """Block-diagonal Gram matrix of the chosen component norm on ``X^k_h``."""
        weights = self._weights(k, variant)
        blocks = []
        for d in range(k, self.n + 1):
            for c in self.mesh.cells[d]:
                blocks.append(weights[(d, c.id)] * self.basis(d, c.id, d - k).gram)
        return sps.block_diag(blocks, format="csr") if blocks else sps.csr_matrix((0, 0))

    def _weights(self, k: int, variant: str) -> dict:
        mesh, n = self.mesh, self.n
        wts = {(d, c.id): 0.0 for d in range(k, n + 1) for c in mesh.cells[d]}
        for T in mesh.cells[n]:
            for key, a in self._cell_weights(n, T.id, k, variant).items():
                wts[key] += a
        return wts

    def _cell_weights(self, d0: int, i0: int, k: int, variant: str) -> dict:
        """Weights of the component norms entering the local norm of cell ``(d0, i0)``."""
        mesh = self.mesh
        root = mesh.cell(d0, i0)
        out: dict[tuple[int, int], float] = {}
        if variant == "explicit":
            for d in range(k, d0 + 1):
                for j in root.subcells[d]:
                    out[(d, int(j))] = root.h ** (d0 - d)
            return out
        if variant != "recursive":
            raise ValueError(f"unknown norm variant {variant!r}")
        layer = {i0: 1.0}
        for d in range(d0, k - 1, -1):
            for j, a in layer.items():
                out[(d, j)] = out.get((d, j), 0.0) + a
            if d == k:
                break
            nxt: dict[int, float] = {}
            for j, a in layer.items():
                f = mesh.cell(d, j)
                for jj, _ in f.boundary:
                    nxt[jj] = nxt.get(jj, 0.0) + a * f.h
            layer = nxt
        return out

    def local_norm(self, w: DiscreteKForm, d: int, i: int, variant: str = "recursive") -> float:
        """Triple norm of the restriction of ``w`` to the closure of one cell."""
        if d < w.degree:
            raise InvalidDegreeError("cell dimension below the form degree")
        total = 0.0
        for (dd, j), a in self._cell_weights(d, i, w.degree, variant).items():
            c = w.component(dd, j)
            total += a * float(c @ self.basis(dd, j, dd - w.degree).gram @ c)
        return float(np.sqrt(total))

    def norm(self, w: DiscreteKForm, variant: str = "recursive") -> float:
        G = self.gram(w.degree, variant)
        return float(np.sqrt(max(w.values @ (G @ w.values), 0.0)))

    # ------------------------------------------------------- diagnostics
    def projection_residual(self, w: DiscreteKForm) -> float:
        """Largest ``|pi^- *P w - *w_f|`` (coefficients) over all cells."""
        pots, _ = self.local_operators(w.degree)
        worst = 0.0
        for (d, i), op in pots.items():
            proj = self.basis(d, i, d - w.degree).projector()
            diff = proj @ self._apply(op, w.values) - w.component(d, i)
            scale = max(1.0, float(np.abs(w.component(d, i)).max(initial=0.0)))
            worst = max(worst, float(np.abs(diff).max(initial=0.0)) / scale)
        return worst

    def stokes_residual(self, w: DiscreteKForm, d: int, i: int) -> float:
        """Discrete Stokes identity checked with wedge products and exact integrals.

        Each unit monomial test form ``mu`` of ``P_r Lambda^{d-k-1}(f)`` is used
        in turn; the largest relative mismatch is returned.
        """
        k, r = w.degree, self.r
        mesh = self.mesh
        c = mesh.cell(d, i)
        g = c.geometry
        l = d - k
        Dloc = hodge_star_inverse(self.local_derivative(w, d, i))
        own = w.form_component(d, i)
        bds = [(mesh.cell(d - 1, j), eps, hodge_star_inverse(self.potential(w, d - 1, j)))
               for j, eps in c.boundary]
        worst = 0.0
        for m in range(_n_forms(d, l - 1, r)):
            e = np.zeros(_n_forms(d, l - 1, r))
            e[m] = 1.0
            mu = PolyForm.from_vector(d, l - 1, r, e, g.scale)
            lhs = integrate(wedge(Dloc, mu), g)
            rhs = 0.0
            if r > 0:
                rhs += (-1) ** (k + 1) * integrate(wedge(own, exterior_derivative(mu)), g)
            for fp, eps, P in bds:
                tmu = trace(mu, g, fp.geometry)
                rhs += eps * integrate(wedge(P, tmu), fp.geometry)
            scale = max(1.0, abs(lhs), abs(rhs))
            worst = max(worst, abs(lhs - rhs) / scale)
        return worst

    def operator_condition(self, k: int) -> dict:
        """Sizes of the local operators, for diagnostics."""
        pots, ders = self.local_operators(k)
        return {key: op[1].shape for key, op in pots.items()}
