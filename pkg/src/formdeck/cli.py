"""Command line entry point: ``formdeck <command> ...``.

Exit codes: 0 success, 2 unreadable mesh file, 3 invariant or check
failure, 64 usage error.  The random seed comes from ``--seed``, else the
``FORMDECK_SEED`` environment variable, else 42.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import FormdeckError, MeshInvariantError, MeshParseError

EXIT_OK, EXIT_PARSE, EXIT_CHECK, EXIT_USAGE = 0, 2, 3, 64
CHECK_TOL = 1e-10
SCALING_TOL = 1e-6
EXPECTED_EXPONENTS = {"d": -1.0, "koszul": 1.0, "d_inverse": 1.0, "koszul_inverse": -1.0,
                      "trace": -0.5}

SWEEP_EPILOG = """\
CSV columns (one row per level, k, r):
  mesh_id, level, h, k, r, poincare_const, spectral_gap, lifting_const,
  cochain_const, harmonic_dim, max_residual, seed
  (wall_time is appended only with --timings so reports stay byte-identical).
The JSON mirror next to the CSV holds every record with per-check residuals
and a per-(k, r) summary of max/min constant ratios and a growth flag.
"""

log = logging.getLogger("formdeck")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def default_seed() -> int:
    raw = os.environ.get("FORMDECK_SEED")
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"FORMDECK_SEED must be an integer, got {raw!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers: {text!r}") from exc


def _levels(text: str) -> list[int]:
    vals = _int_list(text)
    if len(vals) == 1 and "," not in text:
        vals = list(range(1, vals[0] + 1))
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("levels must be >= 1")
    return vals


def _write_csv(rows, header, out=None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([f"{v:.6e}" if isinstance(v, float) else v for v in row])
    finally:
        if out:
            fh.close()


# ------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    from .generators import family_mesh
    from .topology import betti_numbers, polytopal_complex

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    levels = [1] if args.family == "pyramid" else args.levels
    for L in levels:
        mesh = family_mesh(args.family, L, seed=args.seed)
        if args.family == "annulus":
            b = betti_numbers(polytopal_complex(mesh))
            if b[1] != 1:
                log.error("annulus level %d has b1 = %d", L, b[1])
                return EXIT_CHECK
        path = out / f"{args.family}-L{L}.json"
        mesh.save(path)
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .mesh import load_mesh

    mesh = load_mesh(args.mesh)
    rep = mesh.regularity_report()
    counts = ",".join(str(mesh.num_cells(d)) for d in range(mesh.n + 1))
    print(f"valid n={mesh.n} cells={counts} h={mesh.h:.6g} rho={rep['rho']:.4g}"
          + (" sliver" if rep["sliver"] else ""))
    return EXIT_OK


def cmd_betti(args) -> int:
    from .mesh import load_mesh
    from .topology import betti_numbers, polytopal_complex, simplicial_complex

    mesh = load_mesh(args.mesh)
    bp = betti_numbers(polytopal_complex(mesh))
    bs = betti_numbers(simplicial_complex(mesh))
    _write_csv([(k, bp[k], bs[k]) for k in range(mesh.n + 1)],
               ("degree", "polytopal", "simplicial"))
    return EXIT_OK if bp == bs else EXIT_CHECK


def cmd_lift_check(args) -> int:
    from .lift import LiftContext
    from .mesh import load_mesh

    mesh = load_mesh(args.mesh)
    ctx = LiftContext(mesh)
    rng = np.random.default_rng(args.seed)
    rows, worst = [], 0.0
    for k in range(mesh.n + 1):
        cmap = left = jmap = 0.0
        for _ in range(args.samples):
            lam = rng.standard_normal(mesh.num_cells(k))
            left = max(left, ctx.left_inverse_defect(k, lam))
            if k < mesh.n:
                cmap = max(cmap, ctx.cochain_map_defect(k, lam))
                lt = rng.standard_normal(mesh.num_simplices(k))
                jmap = max(jmap, ctx.projection_cochain_defect(k, lt))
        rows.append((k, cmap, left, jmap))
        worst = max(worst, cmap, left, jmap)
    _write_csv(rows, ("k", "cochain_map", "left_inverse", "projection_cochain_map"), args.out)
    return EXIT_OK if worst <= CHECK_TOL else EXIT_CHECK


def ddr_check_rows(mesh, r: int, seed: int, samples: int = 3):
    """Rows ``(check, k, cell_dim, residual)`` for the complex, projection and Stokes checks."""
    from .ddr import DDRComplex

    X = DDRComplex(mesh, r)
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(mesh.n + 1):
        ws = [X.random(k, rng) for _ in range(samples)]
        if k + 2 <= mesh.n:
            dd = max(float(np.abs(X.global_d(X.global_d(w)).values).max(initial=0.0))
                     for w in ws)
            rows.append(("d_of_d", k, "all", dd))
        rows.append(("projection", k, "all", max(X.projection_residual(w) for w in ws)))
        for d in range(k + 1, mesh.n + 1):
            st = max(X.stokes_residual(w, d, i) for w in ws[:1] for i in range(mesh.num_cells(d)))
            rows.append(("stokes", k, d, st))
    return rows


def cmd_ddr_check(args) -> int:
    from .mesh import load_mesh

    mesh = load_mesh(args.mesh)
    rows = ddr_check_rows(mesh, args.r, args.seed)
    _write_csv(rows, ("check", "k", "cell_dim", "residual"), args.out)
    worst = max((row[3] for row in rows), default=0.0)
    return EXIT_OK if worst <= CHECK_TOL else EXIT_CHECK


def cmd_sweep(args) -> int:
    from .poincare import sweep, write_report

    records, summary = sweep(args.family, args.levels, args.k, args.r, samples=args.samples,
                             seed=args.seed, workers=args.workers)
    out = Path(args.out)
    write_report(records, summary, out, out.with_suffix(".json"), timings=args.timings)
    for key, s in summary.items():
        print(f"{key}: poincare_ratio={s['poincare_ratio']:.4g} "
              f"lifting_ratio={s['lifting_ratio']:.4g} harmonic={s['harmonic_dims']}"
              + (" GROWING" if s["growth_flag"] else ""))
    bad = max((rec.max_residual for rec in records), default=0.0)
    return EXIT_OK if bad <= 1e-9 else EXIT_CHECK


def appendix_scalings(shape: str, levels: int, r: int = 1, k: int = 1) -> dict:
    """Log-log slopes of the local constants of one cell over scales ``2^-i``."""
    from .generators import scaled_mesh, shape_mesh
    from .polyform import decomposition_constant, measure_local_constants

    base = shape_mesh(shape)
    n = base.n
    scales = [2.0 ** -i for i in range(levels)]
    vals, dec = [], []
    for s in scales:
        mesh = scaled_mesh(base, s)
        cell = mesh.cells[n][0]
        bd = [mesh.cell(n - 1, j).geometry for j, _ in cell.boundary]
        c = measure_local_constants(cell.geometry, bd, r, k)
        vals.append([c.nd, c.nk, c.nd_inv, c.nk_inv, c.trace_const])
        dec.append(decomposition_constant(cell.geometry, r, k))
    vals = np.array(vals)
    logs = np.log(scales)
    slopes = {name: float(np.polyfit(logs, np.log(vals[:, j]), 1)[0])
              for j, name in enumerate(EXPECTED_EXPONENTS)}
    return {"scales": scales, "values": vals, "exponents": slopes,
            "decomposition": dec,
            "decomposition_spread": float(max(dec) / min(dec) - 1.0)}


def cmd_scalings(args) -> int:
    if args.levels < 2:
        raise UsageError("appendix-scalings needs at least two levels for a fit")
    res = appendix_scalings(args.shape, args.levels, args.r, args.k)
    rows, ok = [], True
    for name, expected in EXPECTED_EXPONENTS.items():
        got = res["exponents"][name]
        err = abs(got - expected)
        ok &= err <= SCALING_TOL
        rows.append((name, got, expected, err))
    spread = res["decomposition_spread"]
    ok &= spread <= 0.01
    rows.append(("decomposition_spread", spread, 0.0, spread))
    _write_csv(rows, ("quantity", "measured", "expected", "error"), args.out)
    return EXIT_OK if ok else EXIT_CHECK


# --------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    from .generators import FAMILIES

    p = _Parser(prog="formdeck", description="Discrete de Rham and Poincare toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $FORMDECK_SEED or 42)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write mesh JSON files for a family")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--levels", type=_levels, default=[1])
    g.add_argument("--out", default="meshes")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", help="check a mesh file")
    v.add_argument("mesh")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("topology", help="topology commands")
    tsub = t.add_subparsers(dest="action", required=True, parser_class=_Parser)
    tb = tsub.add_parser("betti", help="Betti numbers per degree as CSV")
    tb.add_argument("mesh")
    tb.set_defaults(func=cmd_betti)

    lf = sub.add_parser("lift", help="cochain lift commands")
    lsub = lf.add_subparsers(dest="action", required=True, parser_class=_Parser)
    lc = lsub.add_parser("check", help="cochain-map and left-inverse residuals as CSV",
                         description="CSV columns: k, cochain_map, left_inverse, "
                                     "projection_cochain_map (max residuals).")
    lc.add_argument("mesh")
    lc.add_argument("--samples", type=int, default=5)
    lc.add_argument("--out")
    lc.set_defaults(func=cmd_lift_check)

    dd = sub.add_parser("ddr", help="discrete de Rham commands")
    dsub = dd.add_subparsers(dest="action", required=True, parser_class=_Parser)
    dc = dsub.add_parser("check", help="complex, projection and Stokes residuals as CSV",
                         description="CSV columns: check, k, cell_dim, residual.")
    dc.add_argument("mesh")
    dc.add_argument("--r", type=int, default=1)
    dc.add_argument("--out")
    dc.set_defaults(func=cmd_ddr_check)

    pc = sub.add_parser("poincare", help="Poincare laboratory")
    psub = pc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ps = psub.add_parser("sweep", help="constants across refinement levels",
                         epilog=SWEEP_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ps.add_argument("--family", choices=[f for f in FAMILIES if f != "pyramid"], required=True)
    ps.add_argument("--levels", type=_levels, default=[1, 2, 3],
                    help="an integer L (levels 1..L) or a comma list")
    ps.add_argument("--k", type=_int_list, default=[0, 1])
    ps.add_argument("--r", type=_int_list, default=[0])
    ps.add_argument("--samples", type=int, default=20)
    ps.add_argument("--workers", type=int, default=None,
                    help="parallel processes (default: available cores)")
    ps.add_argument("--out", default="report.csv")
    ps.add_argument("--timings", action="store_true", help="add a wall_time column")
    ps.set_defaults(func=cmd_sweep)

    sc = sub.add_parser("appendix-scalings", help="exponents of local constants under rescaling",
                        description="CSV columns: quantity, measured, expected, error.")
    sc.add_argument("--shape", choices=["triangle", "square", "tetrahedron", "pyramid"],
                    default="triangle")
    sc.add_argument("--levels", type=int, default=3)
    sc.add_argument("--r", type=int, default=1)
    sc.add_argument("--k", type=int, default=1)
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_scalings)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None:
            args.seed = default_seed()
    except UsageError as exc:
        print(f"formdeck: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"formdeck: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MeshParseError as exc:
        print(f"formdeck: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (MeshInvariantError, FormdeckError) as exc:
        print(f"formdeck: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"formdeck: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
