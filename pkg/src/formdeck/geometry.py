"""Local charts of flat cells and exact integration over their simplices.

A chart of a ``d``-dimensional flat cell consists of an origin ``x_f``, an
orthonormal frame ``E`` (``n x d``) and a length scale ``h``.  Polynomial
coefficients are always written in the scaled coordinates
``y = E^T (x - x_f) / h`` while alternators use the unscaled orthonormal
coordinate differentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._poly import (
    affine_pullback_poly,
    alternator_pullback,
    n_monomials,
    simplex_moments,
    sum_table,
)
from .exterior import n_alternators


@dataclass(eq=False)
class CellGeometry:
    """Chart plus simplicial decomposition of one flat cell.

    Attributes:
        dim: intrinsic dimension ``d``.
        origin: star point ``x_f`` in ambient coordinates.
        frame: ``(n, d)`` orthonormal, positively oriented tangent frame.
        scale: monomial scaling length (the diameter ``h_f`` for mesh cells).
        simplices: ``(S, d+1, n)`` ambient vertex coordinates of the members.
        measures: ``(S,)`` measures of the members.
    """

    dim: int
    origin: np.ndarray
    frame: np.ndarray
    scale: float
    simplices: np.ndarray
    measures: np.ndarray
    key: object = None
    _moments: dict = field(default_factory=dict, repr=False)

    @property
    def measure(self) -> float:
        return float(np.sum(self.measures))

    def to_local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self.frame / self.scale

    def to_ambient(self, y: np.ndarray) -> np.ndarray:
        return self.origin + self.scale * np.asarray(y, dtype=float) @ self.frame.T

    def moments(self, r: int) -> np.ndarray:
        """``int_f y^gamma`` for all monomials of degree ``<= r``."""
        best = max((q for q in self._moments if q >= r), default=None)
        if best is None:
            loc = self.to_local(self.simplices)
            mom = simplex_moments(loc, self.measures, r).sum(axis=0)
            self._moments[r] = mom
            return mom
        return self._moments[best][: n_monomials(self.dim, r)]

    def mono_gram(self, r1: int, r2: int | None = None) -> np.ndarray:
        r2 = r1 if r2 is None else r2
        if r1 < 0 or r2 < 0:
            return np.zeros((n_monomials(self.dim, r1), n_monomials(self.dim, r2)))
        return self.moments(r1 + r2)[sum_table(self.dim, r1, r2)]

    def form_gram(self, k: int, r1: int, r2: int | None = None) -> np.ndarray:
        """L2 Gram matrix between ``P_{r1} Lambda^k`` and ``P_{r2} Lambda^k``."""
        return np.kron(self.mono_gram(r1, r2), np.eye(n_alternators(self.dim, k)))

    def pullback(self, sub: "CellGeometry", k: int, r: int) -> np.ndarray:
        """Coefficient matrix of the trace onto the subcell chart ``sub``."""
        A_phys = self.frame.T @ sub.frame
        A = A_phys * (sub.scale / self.scale)
        b = self.frame.T @ (sub.origin - self.origin) / self.scale
        Cp = affine_pullback_poly(A, b, r)
        Ca = alternator_pullback(A_phys, k)
        return np.kron(Cp, Ca)

    def check_subcell(self, sub: "CellGeometry", tol: float = 1e-9) -> bool:
        P = np.eye(self.frame.shape[0]) - self.frame @ self.frame.T
        off = np.linalg.norm(P @ sub.frame) if sub.dim else 0.0
        off += np.linalg.norm(P @ (sub.origin - self.origin)) / max(self.scale, 1e-300)
        return off <= tol


def ambient_geometry(n: int, origin=None, scale: float = 1.0,
                     simplices=None, measures=None) -> CellGeometry:
    """Chart of the ambient space itself (identity frame)."""
    origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
    simplices = np.zeros((0, n + 1, n)) if simplices is None else np.asarray(simplices, float)
    measures = np.zeros(0) if measures is None else np.asarray(measures, float)
    return CellGeometry(n, origin, np.eye(n), float(scale), simplices, measures)


def simplex_geometry(points: np.ndarray, scale: float | None = None) -> CellGeometry:
    """Full-dimensional chart of a single ``n``-simplex, origin at its centroid."""
    from ._poly import simplex_measure

    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    centroid = points.mean(axis=0)
    if scale is None:
        diffs = points[:, None, :] - points[None, :, :]
        scale = float(np.sqrt((diffs ** 2).sum(-1)).max())
    meas = simplex_measure(points[None])
    return CellGeometry(n, centroid, np.eye(n), scale, points[None], meas)
