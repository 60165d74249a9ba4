"""Polytopal meshes with a conforming simplicial submesh.

Geometry lives on the simplices only.  A ``d``-cell is the union of its
member ``d``-simplices; its orientation is the common orientation of those
members (each stored with sign +1).  Every other simplex is oriented by its
stored vertex order.

The JSON file format is::

    {"ambient_dim": n,
     "vertices": [[x, ...], ...],
     "simplices": {"k": [[v0, ..., vk], ...]},
     "cells": {"k": [{"id": i, "simplices": [...],
                      "boundary": [{"cell": j, "sign": +-1}, ...],
                      "star_point": [x, ...]}]}}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from ._poly import simplex_measure
from .errors import (
    DegenerateCellError,
    MeshInvariantError,
    MeshParseError,
    NonBallCellError,
    NonConformingError,
    OrientationError,
)
from .exterior import permutation_parity
from .geometry import CellGeometry

log = logging.getLogger(__name__)

MEASURE_TOL = 1e-12


@dataclass(eq=False)
class Cell:
    """One ``d``-cell of the polytopal mesh."""

    dim: int
    id: int
    simplices: np.ndarray
    boundary: list[tuple[int, int]]
    star_point: np.ndarray | None = None
    frame: np.ndarray | None = None
    x_f: np.ndarray | None = None
    h: float = 0.0
    measure: float = 0.0
    closure: dict = field(default_factory=dict, repr=False)
    interior: dict = field(default_factory=dict, repr=False)
    subcells: dict = field(default_factory=dict, repr=False)
    geometry: CellGeometry | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple[int, int]:
        return (self.dim, self.id)

    @property
    def simplex_members(self) -> list[tuple[int, int]]:
        return [(int(s), 1) for s in self.simplices]

    def boundary_closure(self, k: int) -> np.ndarray:
        """Ids of ``k``-simplices of the simplicial boundary ``S_h(df)``."""
        return np.setdiff1d(self.closure.get(k, np.zeros(0, int)),
                            self.interior.get(k, np.zeros(0, int)))


class PolytopalMesh:
    """Validated polytopal mesh; build with :func:`load_mesh` or :func:`mesh_from_dict`."""

    def __init__(self, n, vertices, simplices, cells):
        self.n = n
        self.vertices = vertices
        self.simplices = simplices
        self.cells = cells
        self.lookup = [{tuple(sorted(s)): i for i, s in enumerate(sk)} for sk in simplices]
        self._validate()

    # ------------------------------------------------------------ counts
    def num_simplices(self, k: int) -> int:
        return len(self.simplices[k]) if 0 <= k <= self.n else 0

    def num_cells(self, k: int) -> int:
        return len(self.cells[k]) if 0 <= k <= self.n else 0

    def cell(self, d: int, i: int) -> Cell:
        return self.cells[d][i]

    def all_cells(self, min_dim: int = 0):
        for d in range(min_dim, self.n + 1):
            yield from self.cells[d]

    def simplex_points(self, k: int, ids=None) -> np.ndarray:
        s = self.simplices[k] if ids is None else self.simplices[k][np.asarray(ids, int)]
        return self.vertices[s]

    # ------------------------------------------------------ incidence
    def simplex_boundary_matrix(self, k: int) -> sps.csr_matrix:
        """Integer matrix of the simplicial boundary ``C_k -> C_{k-1}``."""
        if k <= 0 or k > self.n:
            return sps.csr_matrix((self.num_simplices(k - 1) if k > 0 else 0,
                                   self.num_simplices(k)), dtype=np.int64)
        return self._sbd[k]

    def cell_boundary_matrix(self, k: int) -> sps.csr_matrix:
        """Integer matrix of the polytopal boundary ``C_k(M_h) -> C_{k-1}(M_h)``."""
        if k <= 0 or k > self.n:
            return sps.csr_matrix((self.num_cells(k - 1) if k > 0 else 0,
                                   self.num_cells(k)), dtype=np.int64)
        return self._cbd[k]

    def _face_signs(self, k, s):
        out = []
        for i in range(k + 1):
            face = tuple(np.delete(s, i))
            fid = self.lookup[k - 1].get(tuple(sorted(face)))
            if fid is None:
                raise NonConformingError(
                    f"face {face} of {k}-simplex {tuple(s)} is missing from the simplex table")
            stored = list(self.simplices[k - 1][fid])
            perm = [stored.index(v) for v in face]
            out.append((fid, (-1) ** i * permutation_parity(perm)))
        return out

    # ----------------------------------------------------- validation
    def _validate(self):
        n = self.n
        # simplex tables and simplicial incidence
        self._sbd = [None] * (n + 1)
        for k in range(n + 1):
            sk = self.simplices[k]
            if len(self.lookup[k]) != len(sk):
                raise NonConformingError(f"duplicate {k}-simplices in the simplex table")
            if k >= 1:
                rows, cols, vals = [], [], []
                for j, s in enumerate(sk):
                    for fid, sign in self._face_signs(k, s):
                        rows.append(fid)
                        cols.append(j)
                        vals.append(sign)
                self._sbd[k] = sps.csr_matrix((vals, (rows, cols)),
                                              shape=(len(self.simplices[k - 1]), len(sk)),
                                              dtype=np.int64)
        for k in range(2, n + 1):
            if (self._sbd[k - 1] @ self._sbd[k]).count_nonzero():
                raise MeshInvariantError("simplicial boundary of boundary is nonzero")

        self.simplex_measures = []
        self.simplex_diameters = []
        for k in range(n + 1):
            pts = self.simplex_points(k)
            meas = simplex_measure(pts) if len(pts) else np.zeros(0)
            diam = _diameters(pts)
            self.simplex_measures.append(meas)
            self.simplex_diameters.append(diam)
            if k >= 1 and len(pts):
                rel = meas / np.maximum(diam, 1e-300) ** k
                bad = np.nonzero(rel <= MEASURE_TOL)[0]
                if bad.size:
                    raise DegenerateCellError(
                        f"{k}-simplices {bad.tolist()[:10]} have zero measure", cells=bad.tolist())

        # ownership of member simplices
        self.owner = []
        for k in range(n + 1):
            own = -np.ones(len(self.simplices[k]), dtype=int)
            for c in self.cells[k]:
                for s in c.simplices:
                    if own[s] >= 0:
                        raise NonConformingError(
                            f"{k}-simplex {s} is assigned to {k}-cells {own[s]} and {c.id}",
                            cells=[(k, int(own[s])), (k, c.id)])
                    own[s] = c.id
            if k == n and np.any(own < 0):
                missing = np.nonzero(own < 0)[0].tolist()
                raise NonConformingError(f"{n}-simplices {missing[:10]} belong to no {n}-cell")
            self.owner.append(own)

        # polytopal incidence and orientation coherence
        self._cbd = [None] * (n + 1)
        for d in range(1, n + 1):
            rows, cols, vals = [], [], []
            B = self._sbd[d]
            for c in self.cells[d]:
                chain = np.zeros(len(self.simplices[d]), dtype=np.int64)
                chain[c.simplices] = 1
                got = B @ chain
                expect = np.zeros_like(got)
                for j, eps in c.boundary:
                    if not (0 <= j < len(self.cells[d - 1])):
                        raise MeshInvariantError(f"cell {c.key} lists missing boundary cell {j}",
                                                 cells=[c.key])
                    expect[self.cells[d - 1][j].simplices] += eps
                    rows.append(j)
                    cols.append(c.id)
                    vals.append(eps)
                if not np.array_equal(got, expect):
                    if np.abs(got).max() > 1 or np.array_equal(np.abs(got), np.abs(expect)):
                        raise OrientationError(
                            f"orientation of cell {c.key} is incoherent with its boundary",
                            cells=[c.key])
                    raise NonConformingError(
                        f"boundary list of cell {c.key} does not match its simplicial boundary",
                        cells=[c.key])
            self._cbd[d] = sps.csr_matrix((vals, (rows, cols)),
                                          shape=(len(self.cells[d - 1]), len(self.cells[d])),
                                          dtype=np.int64)
        for d in range(2, n + 1):
            if (self._cbd[d - 1] @ self._cbd[d]).count_nonzero():
                raise MeshInvariantError("polytopal boundary of boundary is nonzero")

        self._build_closures()
        self._build_selection()
        for c in self.all_cells():
            self._build_frame(c)
        for c in self.all_cells(1):
            self._check_ball(c)

    def _build_closures(self):
        for d in range(self.n + 1):
            for c in self.cells[d]:
                clo = {k: set() for k in range(d + 1)}
                for s in c.simplices:
                    verts = self.simplices[d][s]
                    for k in range(d + 1):
                        for face in combinations(sorted(verts), k + 1):
                            clo[k].add(self.lookup[k][face])
                c.closure = {k: np.array(sorted(v), dtype=int) for k, v in clo.items()}
                sub = {d: {c.id}}
                for dd in range(d, 0, -1):
                    sub[dd - 1] = set()
                    for j in sub[dd]:
                        sub[dd - 1].update(b for b, _ in self.cells[dd][j].boundary)
                c.subcells = {k: np.array(sorted(v), dtype=int) for k, v in sub.items()}

    def _build_selection(self):
        n = self.n
        self.sel_dim = [-np.ones(self.num_simplices(k), dtype=int) for k in range(n + 1)]
        self.sel_cell = [-np.ones(self.num_simplices(k), dtype=int) for k in range(n + 1)]
        for d in range(n + 1):
            for c in self.cells[d]:
                for k in range(d + 1):
                    ids = c.closure[k]
                    new = ids[self.sel_dim[k][ids] < 0]
                    same = ids[self.sel_dim[k][ids] == d]
                    if same.size:
                        raise NonConformingError(
                            f"{k}-simplices {same.tolist()[:5]} lie in two {d}-cells "
                            f"without lying on a common lower-dimensional cell",
                            cells=[c.key])
                    self.sel_dim[k][new] = d
                    self.sel_cell[k][new] = c.id
                    c.interior[k] = np.sort(new)
        for k in range(n + 1):
            stray = np.nonzero(self.sel_dim[k] < 0)[0]
            if stray.size:
                raise NonConformingError(f"{k}-simplices {stray.tolist()[:10]} lie in no cell")
        # point (ii): closure(f) = interior(f) + closure of the boundary cells
        for d in range(1, n + 1):
            for c in self.cells[d]:
                for k in range(d):
                    bd = set()
                    for j, _ in c.boundary:
                        bd.update(self.cells[d - 1][j].closure.get(k, ()).tolist())
                    lower = set(c.closure[k].tolist()) - set(c.interior[k].tolist())
                    if lower != bd:
                        raise NonConformingError(
                            f"cell {c.key}: simplices of its closure are not partitioned by "
                            f"its boundary cells", cells=[c.key])
                if set(c.interior[d].tolist()) != set(c.simplices.tolist()):
                    raise NonConformingError(f"cell {c.key}: member simplices are not interior",
                                             cells=[c.key])

    def _build_frame(self, c: Cell):
        d, n = c.dim, self.n
        pts = self.simplex_points(d, c.simplices)
        verts = self.vertices[c.closure[0]]
        c.h = float(_diameters(verts[None])[0]) if len(verts) > 1 else 0.0
        meas = self.simplex_measures[d][c.simplices]
        c.measure = float(meas.sum())
        if d == 0:
            c.frame = np.zeros((n, 0))
            c.x_f = self.vertices[self.simplices[0][c.simplices[0]][0]].astype(float)
            c.h = 0.0
        else:
            edges = (pts[:, 1:, :] - pts[:, :1, :]).reshape(-1, n).T
            if d == n:
                E = np.eye(n)
            else:
                Q, R, _ = sla.qr(edges, mode="economic", pivoting=True)
                diag = np.abs(np.diag(R))
                rank = int(np.sum(diag > 1e-10 * diag[0]))
                if rank < d:
                    raise DegenerateCellError(f"cell {c.key} is degenerate", cells=[c.key])
                E = Q[:, :d]
            resid = np.linalg.norm(edges - E @ (E.T @ edges)) / max(np.linalg.norm(edges), 1e-300)
            if resid > 1e-9:
                raise MeshInvariantError(f"cell {c.key} is not flat", cells=[c.key])
            first = E.T @ (pts[0, 1:, :] - pts[0, :1, :]).T
            if np.linalg.det(first) < 0:
                E = E.copy()
                E[:, -1] *= -1
            dets = np.linalg.det(np.einsum("nd,snk->sdk", E,
                                           np.swapaxes(pts[:, 1:, :] - pts[:, :1, :], 1, 2)))
            if np.any(dets <= 0):
                raise OrientationError(f"member simplices of cell {c.key} are not coherently "
                                       f"oriented", cells=[c.key])
            c.frame = E
            if c.star_point is not None:
                c.x_f = np.asarray(c.star_point, dtype=float)
            else:
                cent = pts.mean(axis=1)
                c.x_f = (meas[:, None] * cent).sum(0) / c.measure
        scale = c.h if c.h > 0 else 1.0
        c.geometry = CellGeometry(d, c.x_f, c.frame, scale, pts, meas, key=c.key)

    def _check_ball(self, c: Cell):
        d = c.dim
        nsimp = [len(c.closure[k]) for k in range(d + 1)]
        ranks = [0] * (d + 2)
        for k in range(1, d + 1):
            M = self._sbd[k][c.closure[k - 1]][:, c.closure[k]].toarray()
            ranks[k] = np.linalg.matrix_rank(M) if M.size else 0
        betti = [nsimp[k] - ranks[k] - ranks[k + 1] for k in range(d + 1)]
        betti[0] -= 1
        if any(betti):
            raise NonBallCellError(f"cell {c.key} does not have the homology of a ball "
                                   f"(reduced Betti numbers {betti})", cells=[c.key])

    # -------------------------------------------------------- queries
    def selection(self, k: int, simplex: int) -> tuple[int, int]:
        """Lowest-dimensional cell containing the ``k``-simplex (as ``(dim, id)``)."""
        return int(self.sel_dim[k][simplex]), int(self.sel_cell[k][simplex])

    def partition(self, k: int) -> dict[int, np.ndarray]:
        """``{d: ids of k-simplices whose lowest containing cell has dimension d}``."""
        out = {d: np.nonzero(self.sel_dim[k] == d)[0] for d in range(k, self.n + 1)}
        total = sum(len(v) for v in out.values())
        if total != self.num_simplices(k):
            raise MeshInvariantError("selection does not partition the simplices")
        return out

    def geometry(self, d: int, i: int) -> CellGeometry:
        return self.cells[d][i].geometry

    @property
    def h(self) -> float:
        return max(c.h for c in self.cells[self.n])

    def regularity_report(self, sliver_threshold: float = 0.05) -> dict:
        """Diameter ranges, inradius ratios and the estimated regularity factor."""
        rep = {"h_range": {}, "inradius_ratio_min": {}, "simplices_per_cell_max": {}}
        rho = np.inf
        for k in range(1, self.n + 1):
            ratio = self.inradius_ratios(k)
            if ratio.size:
                rep["inradius_ratio_min"][k] = float(ratio.min())
                rho = min(rho, float(ratio.min()))
        for d in range(1, self.n + 1):
            hs = [c.h for c in self.cells[d]]
            rep["h_range"][d] = (float(min(hs)), float(max(hs)))
            rep["simplices_per_cell_max"][d] = {
                k: int(max(len(c.closure[k]) for c in self.cells[d])) for k in range(d + 1)}
            for c in self.cells[d]:
                for k in range(1, d + 1):
                    hF = self.simplex_diameters[k][c.closure[k]]
                    rho = min(rho, float(hF.min() / c.h))
        rep["rho"] = rho
        rep["sliver"] = bool(rho < sliver_threshold)
        return rep

    def inradius_ratios(self, k: int) -> np.ndarray:
        """``r_F / h_F`` for every ``k``-simplex (``k >= 1``)."""
        pts = self.simplex_points(k)
        if k == 1:
            return np.full(len(pts), 0.5)
        facets = np.zeros(len(pts))
        for i in range(k + 1):
            facets += simplex_measure(np.delete(pts, i, axis=1))
        r = k * self.simplex_measures[k] / facets
        return r / self.simplex_diameters[k]

    # --------------------------------------------------- serialization
    def to_dict(self) -> dict:
        out = {"ambient_dim": self.n,
               "vertices": self.vertices.tolist(),
               "simplices": {str(k): self.simplices[k].tolist() for k in range(self.n + 1)},
               "cells": {}}
        for d in range(self.n + 1):
            lst = []
            for c in self.cells[d]:
                e = {"id": c.id, "simplices": [int(s) for s in c.simplices],
                     "boundary": [{"cell": int(j), "sign": int(s)} for j, s in c.boundary]}
                if c.star_point is not None:
                    e["star_point"] = [float(x) for x in c.star_point]
                lst.append(e)
            out["cells"][str(d)] = lst
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def _diameters(pts: np.ndarray) -> np.ndarray:
    if pts.shape[1] < 2:
        return np.zeros(pts.shape[0])
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    return np.sqrt((diff ** 2).sum(-1)).reshape(pts.shape[0], -1).max(1)


def mesh_from_dict(data: dict) -> PolytopalMesh:
    """Parse and validate the JSON mesh structure."""
    try:
        n = data["ambient_dim"]
        if not isinstance(n, int) or n < 1:
            raise MeshParseError("ambient_dim must be a positive integer")
        vertices = np.asarray(data["vertices"], dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != n:
            raise MeshParseError(f"vertices must be a list of {n}-vectors")
        nv = len(vertices)
        raw = data["simplices"]
        simplices = []
        for k in range(n + 1):
            if str(k) not in raw and k == 0:
                arr = np.arange(nv).reshape(-1, 1)
            else:
                arr = np.asarray(raw.get(str(k), []), dtype=np.int64).reshape(-1, k + 1)
            if arr.size and (arr.min() < 0 or arr.max() >= nv):
                raise MeshParseError(f"{k}-simplex references an unknown vertex")
            if any(len(set(s)) != k + 1 for s in arr.tolist()):
                raise MeshParseError(f"{k}-simplex with repeated vertices")
            simplices.append(arr)
        cells = []
        for d in range(n + 1):
            entries = data["cells"].get(str(d), [])
            lst = [None] * len(entries)
            for e in entries:
                cid = int(e["id"])
                if not (0 <= cid < len(entries)) or lst[cid] is not None:
                    raise MeshParseError(f"{d}-cell ids must be 0..{len(entries) - 1}")
                sims = np.asarray(e["simplices"], dtype=np.int64).reshape(-1)
                if sims.size == 0 or sims.min() < 0 or sims.max() >= len(simplices[d]):
                    raise MeshParseError(f"{d}-cell {cid} has invalid member simplices")
                bnd = []
                for b in e.get("boundary", []):
                    sign = int(b["sign"])
                    if sign not in (-1, 1):
                        raise MeshParseError(f"{d}-cell {cid}: boundary sign must be +-1")
                    bnd.append((int(b["cell"]), sign))
                sp = e.get("star_point")
                if sp is not None:
                    sp = np.asarray(sp, dtype=float)
                    if sp.shape != (n,):
                        raise MeshParseError(f"{d}-cell {cid}: star_point must be an {n}-vector")
                lst[cid] = Cell(d, cid, sims, bnd, sp)
            cells.append(lst)
    except MeshParseError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MeshParseError(f"malformed mesh: {exc!r}") from exc
    return PolytopalMesh(n, vertices, simplices, cells)


def load_mesh(path) -> PolytopalMesh:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MeshParseError(f"cannot read mesh file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise MeshParseError("mesh file must contain a JSON object")
    return mesh_from_dict(data)


# ------------------------------------------------------------- building

def build_mesh(vertices, cells_by_dim, star_points=None) -> PolytopalMesh:
    """Assemble a validated mesh from cells given as lists of vertex tuples.

    ``cells_by_dim[d]`` is a list of ``d``-cells, each a list of
    ``d``-simplices (vertex tuples, any order).  Orientations of the members,
    simplex ids and boundary signs are derived.  Top-dimensional cells are
    oriented positively with respect to the ambient basis; a lower
    dimensional cell takes the orientation of its first listed member.
    """
    vertices = np.asarray(vertices, dtype=float)
    n = vertices.shape[1]
    sets = [set() for _ in range(n + 1)]
    for d in range(n + 1):
        for cell in cells_by_dim[d]:
            for s in cell:
                for k in range(d + 1):
                    sets[k].update(combinations(sorted(s), k + 1))
    ids = [{s: i for i, s in enumerate(sorted(sk))} for sk in sets]
    stored = [[list(s) for s in sorted(sk)] for sk in sets]

    for d in range(1, n + 1):
        for cell in cells_by_dim[d]:
            pts = [vertices[list(s)] for s in cell]
            if d == n:
                ref = np.eye(n)
            else:
                e0 = (pts[0][1:] - pts[0][0]).T
                ref, _ = np.linalg.qr(e0)
                if np.linalg.det(ref.T @ e0) < 0:
                    ref[:, -1] *= -1
            for s, p in zip(cell, pts):
                key = tuple(sorted(s))
                order = list(key)
                P = vertices[order]
                if np.linalg.det(ref.T @ (P[1:] - P[0]).T) < 0:
                    order[-1], order[-2] = order[-2], order[-1]
                stored[d][ids[d][key]] = order

    simplices = [np.array(st, dtype=np.int64).reshape(-1, k + 1) for k, st in enumerate(stored)]
    data = {"ambient_dim": n, "vertices": vertices.tolist(),
            "simplices": {str(k): simplices[k].tolist() for k in range(n + 1)},
            "cells": {}}
    owner = []
    for d in range(n + 1):
        own = {}
        for ci, cell in enumerate(cells_by_dim[d]):
            for s in cell:
                own[ids[d][tuple(sorted(s))]] = ci
        owner.append(own)
    for d in range(n + 1):
        lst = []
        for ci, cell in enumerate(cells_by_dim[d]):
            members = [ids[d][tuple(sorted(s))] for s in cell]
            bnd = {}
            if d >= 1:
                coeff = {}
                for sid in members:
                    s = simplices[d][sid]
                    for i in range(d + 1):
                        face = tuple(np.delete(s, i).tolist())
                        fid = ids[d - 1][tuple(sorted(face))]
                        st = list(simplices[d - 1][fid])
                        sign = (-1) ** i * permutation_parity([st.index(v) for v in face])
                        coeff[fid] = coeff.get(fid, 0) + sign
                for fid, val in sorted(coeff.items()):
                    if val == 0:
                        continue
                    if fid not in owner[d - 1]:
                        raise NonConformingError(
                            f"boundary simplex {fid} of {d}-cell {ci} belongs to no cell")
                    j = owner[d - 1][fid]
                    if bnd.setdefault(j, val) != val:
                        raise OrientationError(f"inconsistent boundary sign for cell ({d},{ci})")
            e = {"id": ci, "simplices": members,
                 "boundary": [{"cell": j, "sign": int(v)} for j, v in sorted(bnd.items())]}
            if star_points and (d, ci) in star_points:
                e["star_point"] = list(map(float, star_points[(d, ci)]))
            lst.append(e)
        data["cells"][str(d)] = lst
    return mesh_from_dict(data)
