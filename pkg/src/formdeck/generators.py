"""Mesh families used by the tests, the demos and the command line.

Cartesian meshes split every box (and every lower-dimensional face of a box)
into simplices with the Freudenthal rule, which keeps the submesh
conforming across neighbouring boxes.
"""

from __future__ import annotations

from itertools import combinations, permutations, product

import numpy as np

from .mesh import PolytopalMesh, build_mesh, mesh_from_dict

FAMILIES = ("square", "cube", "lshape", "annulus", "polygon", "pyramid")


def _freudenthal(base, axes):
    out = []
    for perm in permutations(axes):
        p = list(base)
        verts = [tuple(p)]
        for a in perm:
            p[a] += 1
            verts.append(tuple(p))
        out.append(verts)
    return out


def box_mesh(boxes, N: int, n: int, size: float = 1.0) -> PolytopalMesh:
    """Mesh of a union of grid boxes of ``[0, size]^n`` with ``N`` boxes per side."""
    boxes = sorted(set(tuple(b) for b in boxes))
    faces = [set() for _ in range(n + 1)]
    for b in boxes:
        for k in range(n + 1):
            for axes in combinations(range(n), k):
                others = [i for i in range(n) if i not in axes]
                for off in product((0, 1), repeat=len(others)):
                    base = list(b)
                    for i, o in zip(others, off):
                        base[i] += o
                    faces[k].add((tuple(base), axes))
    grid_pts = sorted({p for (base, axes) in faces[0] for p in [base]})
    vid = {p: i for i, p in enumerate(grid_pts)}
    vertices = np.array(grid_pts, dtype=float) * (size / N)
    cells = []
    for k in range(n + 1):
        lst = []
        for base, axes in sorted(faces[k]):
            lst.append([tuple(vid[p] for p in s) for s in _freudenthal(base, axes)])
        cells.append(lst)
    return build_mesh(vertices, cells)


def square_mesh(level: int) -> PolytopalMesh:
    N = 2 ** (level - 1)
    return box_mesh(product(range(N), repeat=2), N, 2)


def cube_mesh(level: int) -> PolytopalMesh:
    N = 2 ** (level - 1)
    return box_mesh(product(range(N), repeat=3), N, 3)


def lshape_mesh(level: int) -> PolytopalMesh:
    N = 2 ** level
    half = N // 2
    boxes = [(i, j) for i in range(N) for j in range(N) if not (i >= half and j >= half)]
    return box_mesh(boxes, N, 2)


def annulus_mesh(level: int) -> PolytopalMesh:
    N = 3 * 2 ** (level - 1)
    lo, hi = N // 3, 2 * N // 3
    boxes = [(i, j) for i in range(N) for j in range(N)
             if not (lo <= i < hi and lo <= j < hi)]
    return box_mesh(boxes, N, 2)


def pyramid_mesh() -> PolytopalMesh:
    """Square-based pyramid split into four tetrahedra around the base centre."""
    V = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0.5, 0.5, 0), (0.5, 0.5, 1)]
    corners = [0, 1, 2, 3]
    ring = list(zip(corners, corners[1:] + corners[:1]))
    cells = [
        [[(c,)] for c in (0, 1, 2, 3, 5)],
        [[e] for e in ring] + [[(c, 5)] for c in corners],
        [[(4, a, b) for a, b in ring]] + [[(a, b, 5)] for a, b in ring],
        [[(4, a, b, 5) for a, b in ring]],
    ]
    return build_mesh(V, cells)


def simplex_mesh(points) -> PolytopalMesh:
    """A single simplex with every face promoted to a cell."""
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    verts = range(n + 1)
    cells = [[[f] for f in combinations(verts, k + 1)] for k in range(n + 1)]
    return build_mesh(points, cells)


def polygon_mesh(level: int, seed: int = 0, max_size: int = 6) -> PolytopalMesh:
    """Random agglomeration of a criss-cross triangulation of the unit square.

    Each grid square is cut into four triangles around its centre; triangles
    are merged into simply connected polygons of up to ``max_size``
    triangles.  Collinear boundary edges shared by the same pair of polygons
    are merged into a single 1-cell.
    """
    rng = np.random.default_rng(seed)
    N = 2 ** level
    h = 1.0 / N
    vid = {}
    verts = []

    def vertex(p):
        key = (round(p[0] * 4 * N), round(p[1] * 4 * N))
        if key not in vid:
            vid[key] = len(verts)
            verts.append(p)
        return vid[key]

    tris = []
    for i in range(N):
        for j in range(N):
            c = vertex((h * (i + 0.5), h * (j + 0.5)))
            q = [vertex((h * i, h * j)), vertex((h * (i + 1), h * j)),
                 vertex((h * (i + 1), h * (j + 1))), vertex((h * i, h * (j + 1)))]
            for a in range(4):
                tris.append((c, q[a], q[(a + 1) % 4]))
    edge_tris = {}
    for t, tri in enumerate(tris):
        for e in combinations(sorted(tri), 2):
            edge_tris.setdefault(e, []).append(t)
    nbrs = [set() for _ in tris]
    for ts in edge_tris.values():
        if len(ts) == 2:
            nbrs[ts[0]].add(ts[1])
            nbrs[ts[1]].add(ts[0])

    region = -np.ones(len(tris), dtype=int)
    regions = []
    for t in rng.permutation(len(tris)):
        if region[t] >= 0:
            continue
        members = [int(t)]
        region[t] = len(regions)
        target = int(rng.integers(2, max_size + 1))
        while len(members) < target:
            cand = sorted({u for m in members for u in nbrs[m] if region[u] < 0})
            rng.shuffle(cand)
            added = False
            for u in cand:
                if _is_disk([tris[m] for m in members + [u]]):
                    members.append(u)
                    region[u] = len(regions)
                    added = True
                    break
            if not added:
                break
        regions.append(members)

    # skeleton edges labelled by the pair of regions they separate
    label = {}
    for e, ts in edge_tris.items():
        rs = tuple(sorted(region[t] for t in ts))
        if len(rs) == 1 or rs[0] != rs[1]:
            label[e] = rs
    vadj = {}
    for e in label:
        for v in e:
            vadj.setdefault(v, []).append(e)
    P = np.array(verts)

    def is_junction(v):
        es = vadj[v]
        if len(es) != 2 or label[es[0]] != label[es[1]]:
            return True
        a = [u for u in es[0] if u != v][0]
        b = [u for u in es[1] if u != v][0]
        d1, d2 = P[a] - P[v], P[b] - P[v]
        return abs(d1[0] * d2[1] - d1[1] * d2[0]) > 1e-12

    junctions = sorted(v for v in vadj if is_junction(v))
    seen = set()
    chains = []
    for v0 in junctions:
        for e in vadj[v0]:
            if e in seen:
                continue
            chain = [e]
            seen.add(e)
            cur = [u for u in e if u != v0][0]
            while not is_junction(cur):
                nxt = [f for f in vadj[cur] if f not in seen][0]
                seen.add(nxt)
                chain.append(nxt)
                cur = [u for u in nxt if u != cur][0]
            chains.append(chain)
    if len(seen) != len(label):
        raise RuntimeError("closed skeleton loop without a junction")

    cells = [
        [[(v,)] for v in junctions],
        [list(ch) for ch in chains],
        [[tris[t] for t in members] for members in regions],
    ]
    return build_mesh(P, cells)


def _is_disk(tris) -> bool:
    edges = {}
    verts = set()
    for tri in tris:
        verts.update(tri)
        for e in combinations(sorted(tri), 2):
            edges[e] = edges.get(e, 0) + 1
    if len(verts) - len(edges) + len(tris) != 1:
        return False
    deg = {}
    for e, c in edges.items():
        if c == 1:
            for v in e:
                deg[v] = deg.get(v, 0) + 1
    return all(c == 2 for c in deg.values())


def scaled_mesh(mesh: PolytopalMesh, factor: float) -> PolytopalMesh:
    data = mesh.to_dict()
    data["vertices"] = (np.asarray(data["vertices"]) * factor).tolist()
    for lst in data["cells"].values():
        for e in lst:
            if "star_point" in e:
                e["star_point"] = [factor * x for x in e["star_point"]]
    return mesh_from_dict(data)


def family_mesh(family: str, level: int, seed: int = 0) -> PolytopalMesh:
    if family == "square":
        return square_mesh(level)
    if family == "cube":
        return cube_mesh(level)
    if family == "lshape":
        return lshape_mesh(level)
    if family == "annulus":
        return annulus_mesh(level)
    if family == "polygon":
        return polygon_mesh(level, seed=seed)
    if family == "pyramid":
        return pyramid_mesh()
    raise ValueError(f"unsupported mesh family {family!r}; choose from {FAMILIES}")


def shape_mesh(shape: str) -> PolytopalMesh:
    """Single-cell meshes used for local scaling measurements."""
    if shape == "triangle":
        return simplex_mesh([[0, 0], [1, 0], [0, 1]])
    if shape == "tetrahedron":
        return simplex_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    if shape == "square":
        return square_mesh(1)
    if shape == "pyramid":
        return pyramid_mesh()
    raise ValueError(f"unsupported shape {shape!r}")
