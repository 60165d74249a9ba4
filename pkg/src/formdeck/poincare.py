"""Uniform Poincare inequalities for the discrete de Rham complex.

:func:`construct_lifting` builds, for a discrete form ``omega``, a form
``tau`` with the same discrete differential whose norm is controlled by
that differential: a topological step on ``k``-cells (through
:func:`formdeck.lift.cochain_poincare`) followed by local solves on cells of
increasing dimension.  :func:`spectral_constant` computes the best constant
on the orthogonal complement of the kernel, and :func:`sweep` runs both over
refinement families.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .ddr import DDRComplex, DiscreteKForm
from .errors import SolveResidualError
from .geometry import ambient_geometry
from .lift import LiftContext, cochain_poincare, weighted_poincare_constant
from .polyform import _pad, d_matrix, koszul_range, orthonormal_span, random_polyform

log = logging.getLogger(__name__)

RANK_TOL = 1e-9
LIFT_TOL = 1e-9


@dataclass
class LiftingResult:
    tau: DiscreteKForm
    sigma: DiscreteKForm
    cochain: np.ndarray
    ratio: float
    residual: float
    cochain_ratio: float


def _cell_integral_of_zero_form(X: DDRComplex, w: DiscreteKForm, d: int, i: int) -> float:
    g = X.geometry(d, i)
    coeffs = X.basis(d, i, 0).matrix @ w.component(d, i)
    return float(g.moments(X.r) @ coeffs)


def construct_lifting(X: DDRComplex, omega: DiscreteKForm, ctx: LiftContext | None = None,
                      variant: str = "recursive") -> LiftingResult:
    """``tau`` with ``d tau = d omega`` and ``|||tau||| <~ |||d omega|||``."""
    k, n, r, mesh = omega.degree, X.n, X.r, X.mesh
    if not 0 <= k < n:
        raise ValueError(f"form degree {k} must lie in [0, {n - 1}]")
    ctx = LiftContext(mesh) if ctx is None else ctx
    sigma = X.global_d(omega)
    xi = np.array([_cell_integral_of_zero_form(X, sigma, k + 1, c.id) for c in mesh.cells[k + 1]])
    pres = cochain_poincare(ctx, xi, k)
    lam = pres.cochain
    tau = np.zeros(X.dims[k])
    for c in mesh.cells[k]:
        basis = X.basis(k, c.id, 0)
        tau[X.offsets[k][(k, c.id)]] = basis.projector(0) @ np.array([lam[c.id] / c.measure])
    pots, _ = X.local_operators(k)
    sign = (-1) ** (k + 1)
    for d in range(k + 1, n + 1):
        l = d - k
        for c in mesh.cells[d]:
            g = c.geometry
            basis = X.basis(d, c.id, l)
            Td = basis.matrix[:, basis.split[0]]
            if Td.shape[1] == 0:
                continue
            G_l = g.form_gram(l, r)
            G_lm = g.form_gram(l - 1, r)
            Qm = orthonormal_span(_pad(koszul_range(g, l - 1, r - 1), d, l - 1, r), G_lm)
            Dm = d_matrix(d, l - 1, r) / g.scale
            A = sign * (Dm @ Qm).T @ G_l @ Td
            s_f = X.basis(d, c.id, l - 1).matrix @ sigma.component(d, c.id)
            rhs = Qm.T @ G_lm @ s_f
            for j, eps in c.boundary:
                fp = mesh.cell(d - 1, j)
                idx, P = pots[(d - 1, j)]
                Tr = g.pullback(fp.geometry, l - 1, r)
                rhs -= eps * (Tr @ Qm).T @ fp.geometry.form_gram(l - 1, r) @ (P @ tau[idx])
            if A.shape[0] != A.shape[1]:
                raise SolveResidualError(f"cell {c.key}: lifting system is {A.shape}")
            x = np.linalg.solve(A, rhs)
            res = np.linalg.norm(A @ x - rhs) / max(1.0, np.linalg.norm(rhs))
            if res > LIFT_TOL:
                raise SolveResidualError(f"cell {c.key}: lifting residual {res:.3e}", residual=res)
            coeffs = np.zeros(basis.dim)
            coeffs[basis.split[0]] = x
            tau[X.offsets[k][(d, c.id)]] = coeffs
    tau_form = DiscreteKForm(X, k, tau)
    diff = X.global_d(tau_form).values - sigma.values
    scale = max(1.0, float(np.abs(sigma.values).max(initial=0.0)))
    residual = float(np.abs(diff).max(initial=0.0)) / scale
    if residual > LIFT_TOL:
        raise SolveResidualError(f"d tau differs from d omega by {residual:.3e}", residual=residual)
    sn = X.norm(sigma, variant)
    ratio = X.norm(tau_form, variant) / sn if sn > 0 else 0.0
    return LiftingResult(tau_form, sigma, lam, ratio, residual, pres.weighted_ratio)


def koszul_block_norm(X: DDRComplex, tau: DiscreteKForm) -> float:
    """Largest coordinate of ``tau`` in the Koszul blocks of cells of dimension ``> k``."""
    k = tau.degree
    worst = 0.0
    for d in range(k + 1, X.n + 1):
        for c in X.mesh.cells[d]:
            b = X.basis(d, c.id, d - k)
            worst = max(worst, float(np.abs(tau.component(d, c.id)[b.split[1]]).max(initial=0.0)))
    return worst


@dataclass
class SpectralResult:
    constant: float
    harmonic_dim: int
    kernel_dim: int
    gap: float
    eigenvalues: np.ndarray = field(repr=False)


def _rank(A: np.ndarray) -> int:
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0


def spectral_constant(X: DDRComplex, k: int, variant: str = "explicit") -> SpectralResult:
    """Best ``C`` with ``|w| <= C |d w|`` on the orthogonal complement of ``ker d``."""
    if not 0 <= k < X.n:
        raise ValueError(f"form degree {k} must lie in [0, {X.n - 1}]")
    D = X.d_matrix(k).toarray()
    M0 = X.gram(k, variant).toarray()
    M1 = X.gram(k + 1, variant).toarray()
    rank = _rank(D)
    kernel = D.shape[1] - rank
    prev = _rank(X.d_matrix(k - 1).toarray()) if k > 0 else 0
    if rank == 0:
        return SpectralResult(float("inf"), kernel - prev, kernel, float("nan"), np.zeros(0))
    ev = sla.eigh(D.T @ M1 @ D, M0, eigvals_only=True)
    ev = np.sort(np.clip(ev, 0.0, None))
    smallest = ev[kernel]
    gap = float(ev[kernel + 1] / smallest) if kernel + 1 < ev.size else float("nan")
    return SpectralResult(float(1.0 / np.sqrt(smallest)), kernel - prev, kernel, gap, ev)


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepRecord:
    mesh_id: str
    level: int
    h: float
    k: int
    r: int
    poincare_const: float
    spectral_gap: float
    lifting_const: float
    cochain_const: float
    harmonic_dim: int
    max_residual: float
    wall_time: float
    seed: int
    residuals: dict = field(default_factory=dict)

    CSV_FIELDS = ("mesh_id", "level", "h", "k", "r", "poincare_const", "spectral_gap",
                  "lifting_const", "cochain_const", "harmonic_dim", "max_residual",
                  "wall_time", "seed")


def smooth_random_form(rng, n: int, k: int, degree: int = 3):
    """Random polynomial ``k``-form on the ambient space (chart centred at the origin)."""
    return random_polyform(rng, n, k, degree)


def measure(mesh, mesh_id: str, level: int, k: int, r: int, samples: int = 20,
            seed: int = 42, ctx: LiftContext | None = None,
            X: DDRComplex | None = None) -> SweepRecord:
    """One sweep entry: spectral constant, worst lifting ratio and residuals."""
    t0 = time.perf_counter()
    X = DDRComplex(mesh, r) if X is None else X
    ctx = LiftContext(mesh) if ctx is None else ctx
    eig = spectral_constant(X, k)
    rng = np.random.default_rng([seed, level, k, r])
    geom = ambient_geometry(mesh.n)
    ratios, cochain_ratios, lift_res = [], [], []
    for _ in range(samples):
        w = X.interpolate(smooth_random_form(rng, mesh.n, k), k, geom)
        res = construct_lifting(X, w, ctx, variant="recursive")
        ratios.append(res.ratio)
        cochain_ratios.append(res.cochain_ratio)
        lift_res.append(res.residual)
    dd = 0.0
    if k + 1 < mesh.n:
        w = X.random(k, rng)
        dd = float(np.abs(X.global_d(X.global_d(w)).values).max(initial=0.0))
    residuals = {"lifting": max(lift_res, default=0.0), "d_of_d": dd}
    rec = SweepRecord(
        mesh_id=mesh_id, level=level, h=float(mesh.h), k=k, r=r,
        poincare_const=eig.constant, spectral_gap=eig.gap,
        lifting_const=max(ratios, default=0.0),
        cochain_const=weighted_poincare_constant(ctx, k),
        harmonic_dim=eig.harmonic_dim, max_residual=max(residuals.values()),
        wall_time=time.perf_counter() - t0, seed=seed, residuals=residuals)
    log.info("%s k=%d r=%d: C_P=%.4g lift=%.4g harmonic=%d", mesh_id, k, r,
             rec.poincare_const, rec.lifting_const, rec.harmonic_dim)
    return rec


def _level_records(family: str, level: int, ks, rs, samples: int, seed: int,
                   mesh_seed: int = 0) -> list[SweepRecord]:
    from .generators import family_mesh

    mesh = family_mesh(family, level, seed=mesh_seed)
    ctx = LiftContext(mesh)
    out = []
    for r in rs:
        X = DDRComplex(mesh, r)
        for k in ks:
            if k >= mesh.n:
                continue
            out.append(measure(mesh, f"{family}-L{level}", level, k, r, samples, seed, ctx, X))
    return out


def sweep(family: str, levels, ks, rs, samples: int = 20, seed: int = 42,
          workers: int | None = 1, growth_factor: float = 1.5) -> tuple[list[SweepRecord], dict]:
    """Records for every ``(level, r, k)`` plus a summary of constant growth."""
    levels = list(levels)
    workers = (os.cpu_count() or 1) if workers is None else workers
    if workers > 1 and len(levels) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(levels))) as pool:
            futures = [pool.submit(_level_records, family, L, ks, rs, samples, seed)
                       for L in levels]
            batches = [f.result() for f in futures]
    else:
        batches = [_level_records(family, L, ks, rs, samples, seed) for L in levels]
    records = [rec for batch in batches for rec in batch]
    return records, summarize(records, growth_factor)


def summarize(records: list[SweepRecord], growth_factor: float = 1.5) -> dict:
    """Per ``(k, r)``: max/min ratios of the constants and a monotone-growth flag."""
    groups: dict[tuple[int, int], list[SweepRecord]] = {}
    for rec in records:
        groups.setdefault((rec.k, rec.r), []).append(rec)
    out = {}
    for (k, r), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda x: x.level)
        cp = np.array([x.poincare_const for x in recs])
        lc = np.array([x.lifting_const for x in recs])
        cc = np.array([x.cochain_const for x in recs])
        growing = bool(len(cp) > 1 and np.all(np.diff(cp) > 0) and cp[-1] / cp[0] > growth_factor)
        out[f"k={k},r={r}"] = {
            "poincare_ratio": float(cp.max() / cp.min()),
            "lifting_ratio": float(lc.max() / lc.min()) if lc.min() > 0 else float("inf"),
            "cochain_ratio": float(cc.max() / cc.min()) if cc.min() > 0 else float("inf"),
            "harmonic_dims": sorted({x.harmonic_dim for x in recs}),
            "growth_flag": growing,
        }
    return out


def write_report(records: list[SweepRecord], summary: dict, csv_path, json_path=None,
                 timings: bool = False) -> None:
    """CSV with one row per record; wall times only when ``timings`` (keeps bytes stable)."""
    fields = [f for f in SweepRecord.CSV_FIELDS if timings or f != "wall_time"]
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(fields)
        for rec in records:
            row = []
            for name in fields:
                v = getattr(rec, name)
                row.append(f"{v:.10g}" if isinstance(v, float) else v)
            wr.writerow(row)
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump({"records": [asdict(x) for x in records], "summary": summary}, fh,
                      indent=2, sort_keys=True)
