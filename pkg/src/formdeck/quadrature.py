"""Gauss rules on simplices by collapsed (Duffy) Gauss-Jacobi products."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def reference_rule(d: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (barycentric, ``(q, d+1)``) and weights summing to one on the ``d``-simplex."""
    if d == 0:
        return np.ones((1, 1)), np.ones(1)
    m = degree // 2 + 1
    axes = []
    for j in range(d):
        # weight (1 - t)^(d-1-j) on [0, 1]
        x, w = roots_jacobi(m, d - 1 - j, 0)
        axes.append(((x + 1) / 2, w / 2 ** (d - j)))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    bary = np.zeros((t.shape[0], d + 1))
    rest = np.ones(t.shape[0])
    for j in range(d):
        bary[:, j] = rest * t[:, j]
        rest = rest * (1 - t[:, j])
    bary[:, d] = rest
    return bary, w / w.sum()


def simplex_rule(points: np.ndarray, degree: int, measure: float | None = None):
    """Ambient nodes and weights integrating degree-``degree`` polynomials exactly."""
    points = np.asarray(points, dtype=float)
    d = points.shape[0] - 1
    bary, w = reference_rule(d, degree)
    if measure is None:
        from ._poly import simplex_measure

        measure = float(simplex_measure(points[None])[0]) if d else 1.0
    return bary @ points, w * measure


def integrate_function(func, points: np.ndarray, degree: int) -> np.ndarray:
    x, w = simplex_rule(points, degree)
    return np.tensordot(w, func(x), axes=(0, 0))
