"""Lowest-order Whitney forms on the simplicial submesh.

For an ``n``-simplex ``T`` with barycentric coordinates ``lambda_p`` and an
increasing vertex tuple ``sigma`` the unnormalised Whitney form is

    phi_sigma = sum_i (-1)^i lambda_{sigma_i} dlambda_{sigma \\ sigma_i}.

Its integral over ``sigma`` equals ``1/k!``; the constant is measured per
degree (:func:`diagonal_constant`) and divided out in :class:`WhitneyComplex`,
so that the Whitney map is a cochain isomorphism whose inverse is plain
integration over sub-simplices.
"""

from __future__ import annotations

import logging
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sps

from ._poly import affine_pullback_poly, alternator_pullback, reference_moments
from .errors import NotACoboundaryError
from .exterior import permutation_parity
from .geometry import CellGeometry, simplex_geometry
from .mesh import PolytopalMesh
from .polyform import PolyForm, exterior_derivative, trace, wedge

log = logging.getLogger(__name__)


def barycentric_forms(geom: CellGeometry, points: np.ndarray) -> list[PolyForm]:
    """Barycentric coordinates of the simplex ``points`` as degree-1 0-forms."""
    n = points.shape[1]
    A = np.vstack([points.T, np.ones(n + 1)])
    Ainv = np.linalg.inv(A)
    out = []
    for p in range(n + 1):
        grad = Ainv[p, :n]
        const = grad @ geom.origin + Ainv[p, n]
        coeffs = np.concatenate([[const], geom.scale * (geom.frame.T @ grad)])
        out.append(PolyForm(n, 0, 1, coeffs, geom.scale))
    return out


def _constant_one_form(grad_local: np.ndarray, scale: float) -> PolyForm:
    n = grad_local.size
    return PolyForm(n, 1, 0, grad_local.reshape(1, n), scale)


def whitney_form(points: np.ndarray, sigma, k: int | None = None,
                 geom: CellGeometry | None = None) -> PolyForm:
    """Unnormalised Whitney form of the sub-simplex ``sigma`` (local vertex indices)."""
    points = np.asarray(points, dtype=float)
    sigma = tuple(int(s) for s in sigma)
    if k is not None and len(sigma) != k + 1:
        raise ValueError(f"sigma {sigma} does not describe a {k}-simplex")
    if len(set(sigma)) != len(sigma):
        raise ValueError(f"repeated vertex indices in {sigma}")
    geom = simplex_geometry(points) if geom is None else geom
    lam = barycentric_forms(geom, points)
    dl = [_constant_one_form(l.coeffs[1:, 0] / geom.scale, geom.scale) for l in lam]
    total = None
    for i, p in enumerate(sigma):
        term = lam[p]
        rest = sigma[:i] + sigma[i + 1:]
        if rest:
            alt = dl[rest[0]]
            for q in rest[1:]:
                alt = wedge(alt, dl[q])
            term = wedge(lam[p], alt)
        term = term * ((-1) ** i)
        total = term if total is None else total + term
    if total.poly_degree < 1:
        total = total.raise_degree(1)
    return total


def integrate_over_simplex(w: PolyForm, geom: CellGeometry, pts: np.ndarray) -> float:
    """Integral of ``w`` (chart ``geom``) over the oriented simplex ``pts`` (ambient)."""
    pts = np.asarray(pts, dtype=float)
    k = pts.shape[0] - 1
    if w.form_degree != k:
        raise ValueError("form degree does not match the simplex dimension")
    E = (pts[1:] - pts[0]).T
    A_phys = geom.frame.T @ E
    A = A_phys / geom.scale
    b = geom.to_local(pts[0])
    Cp = affine_pullback_poly(A, b, w.poly_degree)
    Ca = alternator_pullback(A_phys, k)
    coeff = (Cp @ w.coeffs @ Ca.T)[:, 0]
    return float(coeff @ reference_moments(k, w.poly_degree))


def de_rham_integrals(points: np.ndarray, k: int) -> np.ndarray:
    """``M[s, t] = int_{sigma_s} phi_{sigma_t}`` over all ``k``-faces of the simplex."""
    points = np.asarray(points, dtype=float)
    geom = simplex_geometry(points)
    faces = list(combinations(range(points.shape[0]), k + 1))
    forms = [whitney_form(points, s, geom=geom) for s in faces]
    M = np.zeros((len(faces), len(faces)))
    for i, s in enumerate(faces):
        for j, w in enumerate(forms):
            M[i, j] = integrate_over_simplex(w, geom, points[list(s)])
    return M


def diagonal_constant(n: int, k: int) -> float:
    """Measured ``int_sigma phi_sigma`` on the reference ``n``-simplex."""
    ref = np.vstack([np.zeros(n), np.eye(n)])
    M = de_rham_integrals(ref, k)
    return float(np.mean(np.diag(M)))


class WhitneyComplex:
    """Whitney map, de Rham map and L2 Gram matrices on a simplicial submesh."""

    def __init__(self, mesh: PolytopalMesh):
        self.mesh = mesh
        self.n = n = mesh.n
        self.constants = [diagonal_constant(n, k) for k in range(n + 1)]
        self.geoms = [simplex_geometry(p) for p in mesh.simplex_points(n)]
        # local face -> (global id, orientation sign)
        self.local_faces = [list(combinations(range(n + 1), k + 1)) for k in range(n + 1)]
        self.glob = []
        self.sign = []
        for k in range(n + 1):
            G = np.zeros((mesh.num_simplices(n), len(self.local_faces[k])), dtype=int)
            S = np.zeros_like(G)
            for t, verts in enumerate(mesh.simplices[n]):
                for j, face in enumerate(self.local_faces[k]):
                    vs = [int(verts[i]) for i in face]
                    gid = mesh.lookup[k][tuple(sorted(vs))]
                    stored = list(mesh.simplices[k][gid])
                    G[t, j] = gid
                    S[t, j] = permutation_parity([stored.index(v) for v in vs])
            self.glob.append(G)
            self.sign.append(S)
        self._forms = {}

    def local_forms(self, t: int, k: int) -> np.ndarray:
        """Normalised Whitney ``k``-forms of simplex ``t`` as coefficient columns."""
        key = (t, k)
        if key not in self._forms:
            pts = self.mesh.simplex_points(self.n, [t])[0]
            geom = self.geoms[t]
            cols = [whitney_form(pts, f, geom=geom).vector / self.constants[k]
                    for f in self.local_faces[k]]
            self._forms[key] = np.array(cols).T
        return self._forms[key]

    def local_gram(self, t: int, k: int) -> np.ndarray:
        F = self.local_forms(t, k)
        return F.T @ self.geoms[t].form_gram(k, 1) @ F

    def gram(self, k: int) -> sps.csr_matrix:
        """Global L2 Gram of the Whitney ``k``-forms."""
        return self._gram[k]

    @cached_property
    def _gram(self):
        out = []
        for k in range(self.n + 1):
            rows, cols, vals = [], [], []
            for t in range(len(self.geoms)):
                g = self.glob[k][t]
                s = self.sign[k][t]
                L = self.local_gram(t, k) * np.outer(s, s)
                rows.append(np.repeat(g, len(g)))
                cols.append(np.tile(g, len(g)))
                vals.append(L.ravel())
            m = self.mesh.num_simplices(k)
            out.append(sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows),
                                                              np.concatenate(cols))),
                                      shape=(m, m)))
        return out

    def whitney_map(self, zeta: np.ndarray, k: int) -> list[PolyForm]:
        """Piecewise polynomial form ``sum_F zeta_F phi_F`` as one PolyForm per simplex."""
        zeta = np.asarray(zeta, dtype=float)
        out = []
        for t, geom in enumerate(self.geoms):
            c = self.local_forms(t, k) @ (self.sign[k][t] * zeta[self.glob[k][t]])
            out.append(PolyForm(self.n, k, 1, c, geom.scale))
        return out

    def de_rham_map(self, field: list[PolyForm], k: int) -> np.ndarray:
        """Integrals of a piecewise form over every ``k``-simplex."""
        m = self.mesh.num_simplices(k)
        out = np.full(m, np.nan)
        for t, geom in enumerate(self.geoms):
            for j, gid in enumerate(self.glob[k][t]):
                if np.isnan(out[gid]):
                    pts = self.mesh.simplex_points(k, [gid])[0]
                    out[gid] = integrate_over_simplex(field[t], geom, pts)
        return out

    def conformity_defect(self, field: list[PolyForm]) -> float:
        """Largest mismatch of traces across interior ``(n-1)``-simplices."""
        n = self.n
        k = field[0].form_degree
        if k > n - 1:
            return 0.0
        owners = {}
        for t in range(len(self.geoms)):
            for gid in self.glob[n - 1][t]:
                owners.setdefault(int(gid), []).append(t)
        worst = 0.0
        for gid, ts in owners.items():
            if len(ts) != 2:
                continue
            pts = self.mesh.simplex_points(n - 1, [gid])[0]
            fg = _face_geometry(pts)
            a = trace(field[ts[0]], self.geoms[ts[0]], fg)
            b = trace(field[ts[1]], self.geoms[ts[1]], fg)
            scale = max(1.0, np.abs(a.coeffs).max(), np.abs(b.coeffs).max())
            worst = max(worst, float(np.abs(a.coeffs - b.coeffs).max()) / scale)
        return worst

    def norm(self, zeta: np.ndarray, k: int) -> float:
        return float(np.sqrt(max(zeta @ (self.gram(k) @ zeta), 0.0)))

    def min_norm_preimage(self, xi: np.ndarray, k: int, tol: float = 1e-9):
        """Cochain of the L2-smallest Whitney ``k``-form whose ``d`` is ``W(xi)``.

        Returns ``(lam, ratio)`` with ``ratio = ||W lam|| / ||W xi||``.
        """
        xi = np.asarray(xi, dtype=float)
        D = self.mesh.simplex_boundary_matrix(k + 1).T.toarray().astype(float)
        M = self.gram(k).toarray()
        L = sla.cholesky(M, lower=True)
        A = sla.solve_triangular(L, D.T, lower=True).T  # D L^{-T}
        u, *_ = np.linalg.lstsq(A, xi, rcond=None)
        lam = sla.solve_triangular(L.T, u, lower=False)
        resid = D @ lam - xi
        xn = self.norm(xi, k + 1)
        rn = self.norm(resid, k + 1)
        if rn > tol * max(xn, 1e-300) and rn > 1e-14:
            raise NotACoboundaryError(
                f"Whitney {k + 1}-form is not exact: harmonic component norm {rn:.3e}",
                residual=rn)
        ratio = self.norm(lam, k) / xn if xn > 0 else 0.0
        return lam, ratio

    def export_gram(self, path, k: int) -> None:
        scipy.io.mmwrite(str(path), self.gram(k).tocoo())

    def derivative_defect(self, zeta: np.ndarray, k: int) -> float:
        """``max |d W(zeta) - W(delta zeta)|`` over simplices (relative)."""
        D = self.mesh.simplex_boundary_matrix(k + 1).T
        lhs = [exterior_derivative(f) for f in self.whitney_map(zeta, k)]
        rhs = self.whitney_map(D @ zeta, k + 1)
        worst = 0.0
        for a, b in zip(lhs, rhs):
            diff = a - b
            scale = max(1.0, np.abs(b.coeffs).max())
            worst = max(worst, float(np.abs(diff.coeffs).max()) / scale)
        return worst


def _face_geometry(pts: np.ndarray) -> CellGeometry:
    k = pts.shape[0] - 1
    E = (pts[1:] - pts[0]).T
    Q, _ = np.linalg.qr(E)
    from ._poly import simplex_measure

    meas = simplex_measure(pts[None])
    return CellGeometry(k, pts.mean(0), Q[:, :k], 1.0, pts[None], meas)


def de_rham_cochain(mesh: PolytopalMesh, w: PolyForm, geom: CellGeometry, k: int,
                    on_cells: bool = True) -> np.ndarray:
    """Integrals of a globally defined form over every ``k``-cell (or ``k``-simplex)."""
    if on_cells:
        out = np.zeros(mesh.num_cells(k))
        for c in mesh.cells[k]:
            pts = mesh.simplex_points(k, c.simplices)
            out[c.id] = sum(integrate_over_simplex(w, geom, p) for p in pts)
        return out
    pts = mesh.simplex_points(k)
    return np.array([integrate_over_simplex(w, geom, p) for p in pts])
