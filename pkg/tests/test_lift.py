import numpy as np
import pytest

from formdeck.errors import NotACoboundaryError
from formdeck.generators import square_mesh
from formdeck.lift import (
    LiftContext,
    cochain_poincare,
    lift,
    poincare_operator,
    project_back,
    weighted_poincare_constant,
)

FIXTURES = ["square", "square3", "pyramid", "polygon", "annulus", "cube"]


@pytest.fixture(scope="module")
def contexts():
    return {}


def ctx_for(name, request, contexts):
    if name not in contexts:
        contexts[name] = LiftContext(request.getfixturevalue(name))
    return contexts[name]


def test_top_degree_weights(hand_square):
    ctx = LiftContext(hand_square)
    assert lift(ctx, [1.0], 2) == pytest.approx([0.5, 0.5], abs=1e-15)


def test_diagonal_value_matches_dense_solve(hand_square, rng):
    ctx = LiftContext(hand_square)
    lam = rng.standard_normal(4)
    lt = lift(ctx, lam, 1)
    assert np.allclose(lt[:4], lam)
    # unknown: the diagonal value x; constraints: delta(I lam) = I(delta lam) on t1, t2
    dlam = ctx.cell_coboundary(1) @ lam
    half = lift(ctx, dlam, 2)
    A = np.array([[-1.0], [1.0]])
    b = np.array([half[0] - lam[0] - lam[1], half[1] - lam[2] + lam[3]])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    assert np.linalg.norm(A @ x - b) <= 1e-14
    assert lt[4] == pytest.approx(x[0], abs=1e-14)


def test_lift_is_local(square3, rng):
    ctx = LiftContext(square3)
    e = 5
    lam = np.zeros(square3.num_cells(1))
    lam[e] = 1.0
    lt = lift(ctx, lam, 1)
    for c in square3.cells[2]:
        if e not in c.subcells[1]:
            assert not np.any(lt[c.interior[1]])


@pytest.mark.parametrize("name", FIXTURES)
def test_cochain_map_and_left_inverse(name, request, contexts, rng):
    ctx = ctx_for(name, request, contexts)
    m = ctx.mesh
    for k in range(m.n + 1):
        for _ in range(20):
            lam = rng.standard_normal(m.num_cells(k))
            assert ctx.left_inverse_defect(k, lam) <= 1e-12
            if k < m.n:
                assert ctx.cochain_map_defect(k, lam) <= 1e-9
                lt = rng.standard_normal(m.num_simplices(k))
                assert ctx.projection_cochain_defect(k, lt) <= 1e-10
        assert not np.any(project_back(ctx, np.zeros(m.num_simplices(k)), k))


def test_left_inverse_hundred_samples(polygon, rng):
    ctx = LiftContext(polygon)
    for k in range(3):
        lam = rng.standard_normal((polygon.num_cells(k), 100))
        back = ctx.projection_matrices[k] @ (ctx.lift_matrices[k] @ lam)
        assert np.abs(back - lam).max() <= 1e-12


def test_local_constants_are_finite(polygon):
    ctx = LiftContext(polygon)
    for k in range(3):
        assert 0 < ctx.local_lift_constant(k) < np.inf
        assert ctx.local_projection_constant(k) >= 1


def test_cochain_poincare_zero_and_random(square3, rng):
    ctx = LiftContext(square3)
    res = cochain_poincare(ctx, np.zeros(square3.num_cells(1)), 0)
    assert not np.any(res.cochain)
    for k in range(2):
        D = ctx.cell_coboundary(k)
        for _ in range(5):
            xi = D @ rng.standard_normal(square3.num_cells(k))
            res = cochain_poincare(ctx, xi, k)
            assert np.abs(D @ res.cochain - xi).max() <= 1e-9
            assert np.isfinite(res.weighted_ratio) and res.weighted_ratio > 0


def test_non_coboundary_rejected(annulus):
    ctx = LiftContext(annulus)
    D0, D1 = ctx.cell_coboundary(0), ctx.cell_coboundary(1)
    _, s, Vt = np.linalg.svd(D1)
    closed = Vt[int(np.sum(s > 1e-9 * s[0])):].T
    coexact = closed - D0 @ np.linalg.lstsq(D0, closed, rcond=None)[0]
    h = coexact[:, np.argmax(np.linalg.norm(coexact, axis=0))]
    with pytest.raises(NotACoboundaryError):
        cochain_poincare(ctx, h, 0)


def test_operator_reproduces_cochain_poincare(polygon, rng):
    ctx = LiftContext(polygon)
    D = ctx.cell_coboundary(1)
    xi = D @ rng.standard_normal(polygon.num_cells(1))
    assert np.allclose(poincare_operator(ctx, 1) @ xi, cochain_poincare(ctx, xi, 1).cochain,
                       atol=1e-10)


def test_weighted_constant_bounds_samples(square3, rng):
    ctx = LiftContext(square3)
    C = weighted_poincare_constant(ctx, 0)
    D = ctx.cell_coboundary(0)
    for _ in range(20):
        xi = D @ rng.standard_normal(square3.num_cells(0))
        assert cochain_poincare(ctx, xi, 0).weighted_ratio <= C * (1 + 1e-9)


def test_weighted_constant_bounded_on_refinement():
    vals = [weighted_poincare_constant(LiftContext(square_mesh(L)), k)
            for k in (0, 1) for L in (1, 2, 3)]
    for k in range(2):
        v = vals[3 * k: 3 * k + 3]
        assert max(v) / min(v) < 2
