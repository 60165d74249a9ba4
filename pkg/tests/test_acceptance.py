"""Acceptance criteria 1-10, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL`` line with the measured
quantities.  Run directly with ``python3 tests/test_acceptance.py`` to get
only those lines.
"""

from __future__ import annotations

import os
import sys
from functools import lru_cache
from math import factorial

import numpy as np
import pytest

from formdeck.cli import EXPECTED_EXPONENTS, appendix_scalings
from formdeck.ddr import DDRComplex
from formdeck.generators import (
    annulus_mesh,
    cube_mesh,
    family_mesh,
    polygon_mesh,
    pyramid_mesh,
    scaled_mesh,
    square_mesh,
)
from formdeck.geometry import ambient_geometry
from formdeck.lift import LiftContext, cochain_poincare, weighted_poincare_constant
from formdeck.mesh import build_mesh
from formdeck.poincare import spectral_constant, sweep
from formdeck.polyform import exterior_derivative, koszul, random_polyform
from formdeck.topology import (
    construct_spanning_set,
    polytopal_complex,
    simplicial_complex,
)
from formdeck.whitney import WhitneyComplex, de_rham_integrals

SEED = 20240607
WORKERS = os.cpu_count() or 1

# refinement levels per family: three consecutive levels each
LEVELS = {"square": (2, 3, 4), "lshape": (1, 2, 3), "annulus": (1, 2, 3),
          "polygon": (2, 3, 4), "cube": (1, 2, 3)}
DEGREES = {"square": (0, 1, 2), "lshape": (0, 1, 2), "annulus": (0, 1, 2),
           "polygon": (0, 1, 2), "cube": (0, 1)}


def hand_square():
    return build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]],
                      [[[(i,)] for i in range(4)],
                       [[(0, 1)], [(1, 2)], [(2, 3)], [(0, 3)]],
                       [[(0, 1, 2), (0, 2, 3)]]])


@lru_cache(maxsize=None)
def fixtures():
    return {"square": square_mesh(3), "pyramid": pyramid_mesh(),
            "polygon": polygon_mesh(2, seed=0), "annulus": annulus_mesh(1),
            "cube": cube_mesh(2)}


# lines collected here are echoed in the pytest terminal summary (see conftest)
REPORT_LINES: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT_LINES.append(line)
    print(line, flush=True)


class Checks:
    """Collects named measurements against bounds."""

    def __init__(self):
        self.items: list[tuple[str, float, float]] = []

    def le(self, name: str, value: float, bound: float) -> None:
        self.items.append((name, float(value), bound))

    @property
    def ok(self) -> bool:
        return all(v <= b for _, v, b in self.items)

    def summary(self, keys=None) -> str:
        worst: dict[str, tuple[float, float]] = {}
        for name, v, b in self.items:
            key = name.split("[")[0]
            if key not in worst or v - b > worst[key][0] - worst[key][1]:
                worst[key] = (v, b)
        bad = [n for n, v, b in self.items if v > b]
        text = ", ".join(f"{k}={v:.3g} (<= {b:g})" for k, (v, b) in worst.items())
        return text + (f"; failing: {bad[:6]}" if bad else "")


# ------------------------------------------------------------ criteria

def check_1():
    rng = np.random.default_rng(SEED)
    c = Checks()
    for name, m in fixtures().items():
        for cx in (simplicial_complex(m), polytopal_complex(m)):
            for k in range(2, m.n + 1):
                BB = cx.boundary_matrix(k - 1) @ cx.boundary_matrix(k)
                c.le(f"boundary_of_boundary[{name}]", abs(BB).sum(), 0)
    for d in (1, 2, 3):
        for _ in range(100):
            r = int(rng.integers(0, 5))
            k = int(rng.integers(0, d + 1))
            w = random_polyform(rng, d, k, r)
            if k + 2 <= d:
                c.le("d_of_d_polyform", np.abs(exterior_derivative(exterior_derivative(w)).coeffs)
                     .max() / np.abs(w.coeffs).max(), 1e-10)
            if k >= 2:
                c.le("koszul_of_koszul", np.abs(koszul(koszul(w)).coeffs).max()
                     / np.abs(w.coeffs).max(), 1e-10)
    for name, m in fixtures().items():
        for r in range(3 if m.n == 2 else 2):
            X = DDRComplex(m, r)
            for k in range(m.n - 1):
                W = rng.standard_normal((X.dims[k], 100))
                DD = X.d_matrix(k + 1) @ (X.d_matrix(k) @ W)
                rel = np.abs(DD).max(initial=0) / np.abs(W).max()
                c.le(f"ddr_d_of_d[{name},k={k},r={r}]", rel, 1e-10)
    for name, m in fixtures().items():
        ctx = LiftContext(m)
        for k in range(m.n - 1):
            cell = ctx.cell_coboundary(k + 1) @ ctx.cell_coboundary(k)
            simp = ctx.simplex_coboundary(k + 1) @ ctx.simplex_coboundary(k)
            c.le(f"coboundary_of_coboundary[{name}]", abs(cell).sum() + abs(simp).sum(), 0)
    return c.ok, c.summary()


def check_2():
    rng = np.random.default_rng(SEED + 2)
    c = Checks()
    for name in ("square", "pyramid", "polygon", "annulus"):
        m = fixtures()[name]
        ctx = LiftContext(m)
        for k in range(m.n):
            for _ in range(20):
                lam = rng.standard_normal(m.num_cells(k))
                c.le(f"cochain_map[{name},k={k}]", ctx.cochain_map_defect(k, lam), 1e-9)
    return c.ok, c.summary()


def check_3():
    rng = np.random.default_rng(SEED + 3)
    c = Checks()
    for name, m in fixtures().items():
        ctx = LiftContext(m)
        for k in range(m.n + 1):
            lam = rng.standard_normal((m.num_cells(k), 100))
            back = ctx.projection_matrices[k] @ (ctx.lift_matrices[k] @ lam)
            c.le(f"left_inverse[{name},k={k}]", np.abs(back - lam).max(), 1e-12)
            if k < m.n:
                for _ in range(20):
                    lt = rng.standard_normal(m.num_simplices(k))
                    c.le(f"J_cochain_map[{name},k={k}]", ctx.projection_cochain_defect(k, lt),
                         1e-10)
    return c.ok, c.summary()


def check_4():
    c = Checks()
    for name, m in fixtures().items():
        for cell in m.all_cells(1):
            for k in range(cell.dim):
                s = construct_spanning_set(m, cell, k)
                D = s.duality_matrix()
                c.le(f"duality[{name}]", np.abs(D - np.eye(len(s.cycles))).max(initial=0), 1e-10)
                c.le(f"dimension_identity[{name}]",
                     abs(s.cycle_dim - s.boundary_cycle_dim - len(s.cycles)), 0)
    m = hand_square()
    s = construct_spanning_set(m, m.cells[2][0], 1)
    (z,) = s.cycles
    diag = m.lookup[1][(0, 2)]
    loc = s.complex.local_index(1)
    expect = np.full(5, 0.5)
    expect[loc[diag]] = 1.0
    c.le("square_cycle", np.abs(np.abs(z.coeffs) - expect).max(), 1e-12)
    c.le("square_accepted", abs(s.simplices[0] - diag) + abs(len(s.simplices) - 1), 0)
    return c.ok, c.summary()


def check_5():
    rng = np.random.default_rng(SEED + 5)
    c = Checks()
    consts = {}
    for family, levels in LEVELS.items():
        n = 3 if family == "cube" else 2
        for k in range(n):
            vals = []
            for L in levels:
                m = family_mesh(family, L)
                ctx = LiftContext(m)
                D = ctx.cell_coboundary(k)
                for _ in range(20):
                    xi = D @ rng.standard_normal(m.num_cells(k))
                    res = cochain_poincare(ctx, xi, k)
                    c.le(f"delta_lambda[{family}]", res.residual, 1e-9)
                vals.append(weighted_poincare_constant(ctx, k))
            consts[(family, k)] = vals
            c.le(f"constant_ratio[{family},k={k}]", max(vals) / min(vals), 2.0)
    worst = max(consts, key=lambda key: max(consts[key]) / min(consts[key]))
    return c.ok, c.summary() + f"; worst spread {worst}: {np.round(consts[worst], 4).tolist()}"


def check_6():
    c = Checks()
    rng = np.random.default_rng(SEED + 6)
    simplices = [np.array([[0.0, 0], [1, 0], [0, 1]]),
                 np.array([[0.3, -0.2], [2.0, 0.1], [0.7, 1.4]]),
                 np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
                 np.array([[0.1, 0, 0.2], [1.3, 0.2, 0], [0.2, 0.9, 0.1], [0.3, 0.4, 1.7]])]
    for pts in simplices:
        for k in range(pts.shape[1] + 1):
            M = de_rham_integrals(pts, k)
            c.le("off_diagonal", np.abs(M - np.diag(np.diag(M))).max(initial=0), 1e-12)
            c.le("diagonal_consistency", np.abs(np.diag(M) - 1 / factorial(k)).max(), 1e-10)
    for base in (square_mesh(2), cube_mesh(1)):
        n = base.n
        W0 = WhitneyComplex(base)
        for s in (0.5, 0.125, 4.0):
            W = WhitneyComplex(scaled_mesh(base, s))
            for k in range(n + 1):
                G0 = W0.gram(k).toarray()
                G1 = W.gram(k).toarray() * s ** (2 * k - n)
                c.le("norm_scaling", np.abs(G1 - G0).max() / np.abs(G0).max(), 1e-8)
    for m in (square_mesh(3), pyramid_mesh(), polygon_mesh(2), cube_mesh(2)):
        W = WhitneyComplex(m)
        for k in range(m.n + 1):
            zeta = rng.standard_normal(m.num_simplices(k))
            back = W.de_rham_map(W.whitney_map(zeta, k), k)
            c.le("de_rham_after_whitney", np.abs(back - zeta).max(), 1e-10)
            field = W.whitney_map(W.de_rham_map(W.whitney_map(zeta, k), k), k)
            orig = W.whitney_map(zeta, k)
            c.le("whitney_after_de_rham",
                 max(np.abs(a.coeffs - b.coeffs).max() for a, b in zip(field, orig)), 1e-10)
    return c.ok, c.summary()


def check_7():
    rng = np.random.default_rng(SEED + 7)
    c = Checks()
    for name, m in fixtures().items():
        g = ambient_geometry(m.n)
        for r in range(3 if m.n == 2 else 2):
            X = DDRComplex(m, r)
            for k in range(m.n + 1):
                w = X.random(k, rng)
                c.le("projection", X.projection_residual(w), 1e-10)
                for d in range(k + 1, m.n + 1):
                    for cell in m.cells[d]:
                        c.le(f"stokes[{name}]", X.stokes_residual(w, d, cell.id), 1e-10)
                if k < m.n:
                    eta = random_polyform(rng, m.n, k, r)
                    lhs = X.global_d(X.interpolate(eta, k, g)).values
                    rhs = X.interpolate(exterior_derivative(eta), k + 1, g).values
                    c.le(f"commutation[{name}]",
                         np.abs(lhs - rhs).max() / max(1, np.abs(rhs).max()), 1e-9)
    return c.ok, c.summary()


@lru_cache(maxsize=None)
def family_sweep(family: str):
    n = 3 if family == "cube" else 2
    return sweep(family, LEVELS[family], tuple(range(n)), DEGREES[family], samples=20,
                 seed=SEED, workers=WORKERS)


def check_8():
    c = Checks()
    spreads = []
    for family in LEVELS:
        records, summary = family_sweep(family)
        for rec in records:
            c.le(f"lifting_residual[{family}]", rec.residuals["lifting"], 1e-9)
        for key, s in summary.items():
            c.le(f"lifting_spread[{family},{key}]", s["lifting_ratio"], 2.0)
            spreads.append((s["lifting_ratio"], family, key))
    worst = max(spreads)
    return c.ok, c.summary() + f"; worst spread {worst[1]} {worst[2]}: {worst[0]:.3f}"


def cube_spectral_levels():
    """Cube constants: r = 0 on levels 2-4, r = 1 on levels 1-3."""
    out = {}
    for r, levels in ((0, (2, 3, 4)), (1, (1, 2, 3))):
        for L in levels:
            X = DDRComplex(cube_mesh(L), r)
            for k in range(3):
                res = spectral_constant(X, k)
                out.setdefault((k, r), []).append((res.constant, res.harmonic_dim))
    return out


def check_9():
    c = Checks()
    spreads = []
    for family in ("square", "lshape", "annulus", "polygon"):
        records, summary = family_sweep(family)
        for key, s in summary.items():
            c.le(f"spectral_spread[{family},{key}]", s["poincare_ratio"], 1.5)
            spreads.append((s["poincare_ratio"], family, key))
        for rec in records:
            expect = 1 if (rec.k == 0 or (family == "annulus" and rec.k == 1)) else 0
            c.le(f"harmonic_dim[{family}]", abs(rec.harmonic_dim - expect), 0)
    for (k, r), vals in cube_spectral_levels().items():
        cp = [v for v, _ in vals]
        c.le(f"spectral_spread[cube,k={k},r={r}]", max(cp) / min(cp), 1.5)
        spreads.append((max(cp) / min(cp), "cube", f"k={k},r={r}"))
        for _, h in vals:
            c.le("harmonic_dim[cube]", abs(h - (1 if k == 0 else 0)), 0)
    X = DDRComplex(square_mesh(1), 0)
    res = spectral_constant(X, 0)
    D = X.d_matrix(0).toarray()
    L0 = np.linalg.cholesky(X.gram(0).toarray())
    L1 = np.linalg.cholesky(X.gram(1).toarray())
    s = np.linalg.svd(L1.T @ D @ np.linalg.inv(L0).T, compute_uv=False)
    oracle = 1 / min(v for v in s if v > 1e-9 * s[0])
    c.le("single_cell_oracle", abs(res.constant - oracle) / oracle, 1e-8)
    worst = max(spreads)
    return c.ok, c.summary() + f"; worst spread {worst[1]} {worst[2]}: {worst[0]:.3f}"


def check_10():
    c = Checks()
    for shape in ("triangle", "square", "tetrahedron", "pyramid"):
        res = appendix_scalings(shape, 3)
        for name, expected in EXPECTED_EXPONENTS.items():
            c.le(f"exponent_{name}", abs(res["exponents"][name] - expected), 1e-6)
        c.le("decomposition_spread", res["decomposition_spread"], 0.01)
    return c.ok, c.summary()


CRITERIA = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9,
            check_10]


def _run(n: int):
    ok, detail = CRITERIA[n - 1]()
    report(n, ok, detail)
    assert ok, detail


def test_criterion_01_exactness():
    _run(1)


def test_criterion_02_cochain_map():
    _run(2)


def test_criterion_03_left_inverse():
    _run(3)


def test_criterion_04_spanning_sets():
    _run(4)


@pytest.mark.slow
def test_criterion_05_cochain_poincare():
    _run(5)


def test_criterion_06_whitney():
    _run(6)


def test_criterion_07_ddr_consistency():
    _run(7)


@pytest.mark.slow
def test_criterion_08_lifting():
    _run(8)


@pytest.mark.slow
def test_criterion_09_spectral():
    _run(9)


def test_criterion_10_scalings():
    _run(10)


if __name__ == "__main__":
    failed = 0
    for i, check in enumerate(CRITERIA, 1):
        ok, detail = check()
        report(i, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
