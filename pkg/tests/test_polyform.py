from math import comb

import numpy as np
import pytest

from formdeck.errors import InvalidDegreeError
from formdeck.generators import scaled_mesh, shape_mesh
from formdeck.geometry import simplex_geometry
from formdeck.polyform import (
    PolyForm,
    build_trimmed_basis,
    exterior_derivative,
    hodge_star,
    inner_product,
    koszul,
    measure_local_constants,
    random_polyform,
    trace,
    trimmed_project,
    wedge,
)
from formdeck.quadrature import simplex_rule
from formdeck.whitney import barycentric_forms

REF_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def close(a, b, tol=1e-12):
    return np.allclose(a.coeffs, b.raise_degree(a.poly_degree).coeffs, atol=tol, rtol=0) \
        if a.poly_degree >= b.poly_degree else close(b, a, tol)


def test_derivative_of_linear_one_form():
    w = PolyForm.from_terms(2, 1, {((1, 0), (2,)): 1.0})
    vol = PolyForm.from_terms(2, 2, {((0, 0), (1, 2)): 1.0})
    assert close(exterior_derivative(w), vol)


def test_derivative_of_constant_vanishes():
    dw = exterior_derivative(PolyForm.from_terms(3, 0, {((0, 0, 0), ()): 4.0}))
    assert np.all(dw.coeffs == 0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_d_of_d_is_zero(d, rng):
    for _ in range(100):
        k = int(rng.integers(0, max(d - 1, 1)))
        if k + 2 > d:
            continue
        r = int(rng.integers(0, 5))
        w = random_polyform(rng, d, k, r, scale=float(rng.uniform(0.5, 2)))
        dd = exterior_derivative(exterior_derivative(w))
        assert np.abs(dd.coeffs).max(initial=0) <= 1e-10 * max(1, np.abs(w.coeffs).max())


def test_koszul_of_coordinate_forms():
    dy1 = PolyForm.from_terms(2, 1, {((0, 0), (1,)): 1.0})
    y1 = PolyForm.from_terms(2, 0, {((1, 0), ()): 1.0})
    assert close(koszul(dy1), y1)
    vol = PolyForm.from_terms(2, 2, {((0, 0), (1, 2)): 1.0})
    expect = PolyForm.from_terms(2, 1, {((1, 0), (2,)): 1.0, ((0, 1), (1,)): -1.0})
    assert close(koszul(vol), expect)


@pytest.mark.parametrize("d", [2, 3])
def test_koszul_of_koszul_is_zero(d, rng):
    for _ in range(100):
        k = int(rng.integers(2, d + 1))
        w = random_polyform(rng, d, k, int(rng.integers(0, 4)))
        assert np.abs(koszul(koszul(w)).coeffs).max() <= 1e-10


def test_homotopy_formula(rng):
    # (d kappa + kappa d) w = (r + k) w on homogeneous forms
    from formdeck._poly import monomials

    d, k, r = 3, 1, 2
    w = random_polyform(rng, d, k, r)
    mons = monomials(d, r)
    w.coeffs[[i for i, m in enumerate(mons) if sum(m) != r]] = 0
    lhs = exterior_derivative(koszul(w)) + koszul(exterior_derivative(w))
    assert close(lhs, (r + k) * w, 1e-10)


def test_trace_of_constant_and_volume(square):
    g = square.geometry(2, 0)
    for j, _ in square.cell(2, 0).boundary:
        sub = square.geometry(1, j)
        c = trace(PolyForm.from_terms(2, 0, {((0, 0), ()): 3.0}, g.scale), g, sub)
        assert np.allclose(c.coeffs[0], 3.0) and np.allclose(c.coeffs[1:], 0)
        # no 2-forms live on an edge: the volume form has no trace to return
        with pytest.raises(InvalidDegreeError):
            trace(PolyForm.from_terms(2, 2, {((0, 0), (1, 2)): 1.0}, g.scale), g, sub)


@pytest.mark.parametrize("r", [1, 2])
def test_trace_of_trimmed_form_is_trimmed(square, rng, r):
    g = square.geometry(2, 0)
    B = build_trimmed_basis(g, r, 1)
    w = B.form(rng.standard_normal(B.dim))
    for j, _ in square.cell(2, 0).boundary:
        sub = square.geometry(1, j)
        t = trace(w, g, sub)
        Bs = build_trimmed_basis(sub, r, 1)
        back = Bs.form(trimmed_project(t, Bs))
        assert np.abs(back.coeffs - t.coeffs).max() <= 1e-10


def test_inner_products_on_reference_triangle():
    g = simplex_geometry(REF_TRIANGLE, scale=1.0)
    vol = PolyForm.from_terms(2, 2, {((0, 0), (1, 2)): 1.0})
    assert inner_product(vol, vol, g) == pytest.approx(0.5, abs=1e-14)
    lam0 = barycentric_forms(g, REF_TRIANGLE)[0]
    one = PolyForm.from_terms(2, 0, {((0, 0), ()): 1.0})
    assert inner_product(lam0, one, g) == pytest.approx(0.5 / 3, abs=1e-14)


def test_inner_product_positive_definite(rng):
    g = simplex_geometry(REF_TRIANGLE)
    for _ in range(20):
        w = random_polyform(rng, 2, 1, 3)
        assert inner_product(w, w, g) > 0
    assert inner_product(PolyForm.zeros(2, 1, 3), PolyForm.zeros(2, 1, 3), g) == 0


def test_wedge_with_star_gives_inner_product(rng):
    from formdeck.polyform import integrate

    g = simplex_geometry(REF_TRIANGLE)
    w, u = random_polyform(rng, 2, 1, 2), random_polyform(rng, 2, 1, 1)
    assert integrate(wedge(w, hodge_star(u)), g) == pytest.approx(inner_product(w, u, g),
                                                                  rel=1e-12)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_trimmed_dimensions(square, r):
    g = square.geometry(2, 0)
    assert build_trimmed_basis(g, r, 0).dim == comb(r + 2, 2)
    # top degree: dimension of P_{r-1} Lambda^2
    assert build_trimmed_basis(g, r, 2).dim == (comb(r + 1, 2) if r >= 1 else 0)


def test_lowest_order_edge_space_on_a_cell(square):
    B = build_trimmed_basis(square.geometry(2, 0), 1, 1)
    assert B.dim == 3
    assert np.linalg.matrix_rank(B.matrix) == 3


def test_trimmed_dims_three_dimensional(pyramid):
    g = pyramid.geometry(3, 0)
    # Nedelec / Raviart-Thomas first kind counts for r = 1
    assert [build_trimmed_basis(g, 1, k).dim for k in range(4)] == [4, 6, 4, 1]


def test_projection_round_trip_and_orthogonal_complement(square, rng):
    g = square.geometry(2, 0)
    B = build_trimmed_basis(g, 2, 1)
    c = rng.standard_normal(B.dim)
    assert np.allclose(trimmed_project(B.form(c), B), c, atol=1e-10)
    G = g.form_gram(1, 2)
    v = rng.standard_normal(G.shape[0])
    M = B.matrix
    perp = v - M @ np.linalg.solve(M.T @ G @ M, M.T @ G @ v)
    assert np.abs(trimmed_project(perp, B)).max() <= 1e-10


def test_projection_matches_quadrature_least_squares(square, rng):
    g = square.geometry(2, 0)
    r = 1
    B = build_trimmed_basis(g, r, 1)
    w = random_polyform(rng, 2, 1, r + 1, g.scale)
    rows_basis, rows_w = [], []
    for pts in g.simplices:
        x, wts = simplex_rule(pts, 2 * (r + 1))
        y = g.to_local(x)
        sw = np.sqrt(wts)[:, None]
        rows_basis.append(np.stack([(f.evaluate(y) * sw).ravel() for f in B.basis_forms], 1))
        rows_w.append((w.evaluate(y) * sw).ravel())
    oracle, *_ = np.linalg.lstsq(np.vstack(rows_basis), np.concatenate(rows_w), rcond=None)
    assert np.allclose(trimmed_project(w, B), oracle, atol=1e-10)


@pytest.mark.parametrize("shape", ["triangle", "square", "tetrahedron"])
def test_local_constants_scale_exactly(shape):
    base = shape_mesh(shape)
    n = base.n

    def consts(s):
        m = scaled_mesh(base, s)
        c = m.cells[n][0]
        bd = [m.cell(n - 1, j).geometry for j, _ in c.boundary]
        return measure_local_constants(c.geometry, bd, 1, 1)

    a, b = consts(1.0), consts(0.3)
    assert b.nd * 0.3 == pytest.approx(a.nd, rel=1e-10)
    assert b.nk / 0.3 == pytest.approx(a.nk, rel=1e-10)
    assert b.nd_inv / 0.3 == pytest.approx(a.nd_inv, rel=1e-10)
    assert b.trace_const * 0.3 ** 0.5 == pytest.approx(a.trace_const, rel=1e-10)
