import csv
import json

import numpy as np
import pytest
import scipy.linalg as sla

from formdeck.ddr import DDRComplex
from formdeck.geometry import ambient_geometry
from formdeck.lift import LiftContext
from formdeck.poincare import (
    SweepRecord,
    construct_lifting,
    koszul_block_norm,
    measure,
    smooth_random_form,
    spectral_constant,
    summarize,
    sweep,
    write_report,
)
from formdeck.polyform import exterior_derivative, random_polyform


@pytest.mark.parametrize("name,r", [("polygon", 0), ("polygon", 1), ("polygon", 2),
                                    ("annulus", 1), ("pyramid", 1), ("cube", 0)])
def test_lifting_reproduces_derivative(name, r, request, rng):
    m = request.getfixturevalue(name)
    X = DDRComplex(m, r)
    ctx = LiftContext(m)
    for k in range(m.n):
        for _ in range(3):
            w = X.random(k, rng)
            res = construct_lifting(X, w, ctx)
            assert np.abs(X.global_d(res.tau).values - X.global_d(w).values).max() <= 1e-9
            assert res.residual <= 1e-9
            assert koszul_block_norm(X, res.tau) == 0


def test_closed_form_lifts_to_zero(polygon, rng):
    X = DDRComplex(polygon, 1)
    g = ambient_geometry(2)
    w = X.interpolate(exterior_derivative(random_polyform(rng, 2, 0, 2)), 1, g)
    res = construct_lifting(X, w)
    assert np.abs(res.tau.values).max() <= 1e-9
    zero = construct_lifting(X, X.zero(1))
    assert not np.any(zero.tau.values) and zero.ratio == 0


def test_exact_plus_closed_part(polygon, rng):
    X = DDRComplex(polygon, 1)
    g = ambient_geometry(2)
    closed = exterior_derivative(random_polyform(rng, 2, 0, 2))
    w = X.interpolate(random_polyform(rng, 2, 1, 1) + closed, 1, g)
    res = construct_lifting(X, w)
    for c in polygon.cells[2]:
        a = X.global_d(res.tau).component(2, c.id)
        b = X.global_d(w).component(2, c.id)
        assert np.allclose(a, b, atol=1e-10)


def test_spectral_constant_single_square_matches_dense_oracle(square):
    X = DDRComplex(square, 0)
    res = spectral_constant(X, 0)
    D = X.d_matrix(0).toarray()
    L0 = np.linalg.cholesky(X.gram(0).toarray())
    L1 = np.linalg.cholesky(X.gram(1).toarray())
    B = L1.T @ D @ np.linalg.inv(L0).T
    s = np.linalg.svd(B, compute_uv=False)
    smallest = min(v for v in s if v > 1e-9 * s[0])
    assert res.constant == pytest.approx(1 / smallest, rel=1e-8)
    assert res.constant == pytest.approx(2 ** -0.25, rel=1e-8)
    assert res.harmonic_dim == 1 and res.kernel_dim == 1


def test_harmonic_dimensions(square3, annulus, pyramid):
    for m in (square3, pyramid):
        X = DDRComplex(m, 1)
        dims = [spectral_constant(X, k).harmonic_dim for k in range(m.n)]
        assert dims == [1] + [0] * (m.n - 1)
    X = DDRComplex(annulus, 1)
    assert [spectral_constant(X, k).harmonic_dim for k in range(2)] == [1, 1]


def test_lifting_within_spectral_bound(polygon, rng):
    # the part of tau orthogonal to ker d obeys the best constant
    X = DDRComplex(polygon, 1)
    ctx = LiftContext(polygon)
    for k in range(2):
        C = spectral_constant(X, k, "explicit").constant
        D = X.d_matrix(k).toarray()
        M0 = X.gram(k, "explicit").toarray()
        M1 = X.gram(k + 1, "explicit").toarray()
        N = sla.null_space(D, rcond=1e-10)
        for _ in range(5):
            tau = construct_lifting(X, X.random(k, rng), ctx, variant="explicit").tau.values
            perp = tau - N @ np.linalg.solve(N.T @ M0 @ N, N.T @ M0 @ tau)
            lhs = np.sqrt(perp @ M0 @ perp)
            rhs = C * np.sqrt((D @ tau) @ M1 @ (D @ tau))
            assert lhs <= rhs * (1 + 1e-9)


def test_spectral_constant_rejects_top_degree(square):
    with pytest.raises(ValueError):
        spectral_constant(DDRComplex(square, 0), 2)


def test_measure_record(square3):
    rec = measure(square3, "square-L3", 3, 1, 1, samples=4, seed=1)
    assert rec.max_residual <= 1e-9
    assert rec.poincare_const > 0 and rec.lifting_const > 0 and rec.cochain_const > 0
    assert rec.harmonic_dim == 0


def test_smooth_random_form_is_seeded():
    a = smooth_random_form(np.random.default_rng(3), 2, 1)
    b = smooth_random_form(np.random.default_rng(3), 2, 1)
    assert np.array_equal(a.coeffs, b.coeffs) and a.poly_degree == 3


def test_sweep_deterministic_and_parallel_consistent(tmp_path):
    kw = dict(family="square", levels=[1, 2], ks=[0, 1], rs=[0], samples=3, seed=5)
    r1, s1 = sweep(workers=1, **kw)
    r2, s2 = sweep(workers=2, **kw)
    fields = [f for f in SweepRecord.CSV_FIELDS if f != "wall_time"]
    assert [[repr(getattr(x, f)) for f in fields] for x in r1] == \
        [[repr(getattr(x, f)) for f in fields] for x in r2]
    assert json.dumps(s1) == json.dumps(s2)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_report(r1, s1, p1, tmp_path / "a.json")
    write_report(r2, s2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    rows = list(csv.reader(p1.open()))
    assert rows[0] == fields and len(rows) == 5
    data = json.loads((tmp_path / "a.json").read_text())
    assert {"records", "summary"} <= set(data)
    assert "residuals" in data["records"][0]
    write_report(r1, s1, tmp_path / "t.csv", timings=True)
    assert "wall_time" in (tmp_path / "t.csv").read_text().splitlines()[0]


def test_summary_flags_growth():
    recs = [SweepRecord("m", L, 1.0, 0, 0, c, 1.0, 1.0, 1.0, 0, 0.0, 0.0, 0)
            for L, c in enumerate([1.0, 1.5, 2.5], 1)]
    assert summarize(recs)["k=0,r=0"]["growth_flag"]
    recs[2].poincare_const = 1.2
    assert not summarize(recs)["k=0,r=0"]["growth_flag"]
