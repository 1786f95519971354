"""Command line interface: run, convergence, mesh check, basis info, operator stats."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import THREADS_ENV

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_CONFIG = 3


def _apply_threads(n):
    """Propagate the thread count to the BLAS/OpenMP runtimes (before numpy loads)."""
    n = n or os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ[var] = str(n)


def _parser():
    p = argparse.ArgumentParser(prog="gndg", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--threads", type=int, default=None, help=f"thread count (default ${THREADS_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario configuration")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--no-snapshots", action="store_true")

    c = sub.add_parser("convergence", help="mesh convergence study for a scenario")
    c.add_argument("config")
    c.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    c.add_argument("--levels", default="8,16,32,64", help="cells per side of the regular meshes")
    c.add_argument("--degrees", default="1,2")
    c.add_argument("--reference", default="64,4", help="cells per side and degree of the reference")

    m = sub.add_parser("mesh", help="mesh utilities")
    msub = m.add_subparsers(dest="mesh_command", required=True)
    mc = msub.add_parser("check", help="validate a mesh file")
    mc.add_argument("file")
    mc.add_argument("--periodic", default="", help="axes to pair, e.g. x or xy")

    b = sub.add_parser("basis", help="reference element utilities")
    bsub = b.add_subparsers(dest="basis_command", required=True)
    bi = bsub.add_parser("info", help="nodes and quadrature summary")
    bi.add_argument("-k", type=int, required=True)

    o = sub.add_parser("operator", help="elliptic operator utilities")
    osub = o.add_subparsers(dest="operator_command", required=True)
    os_ = osub.add_parser("stats", help="assemble and factorize the elliptic operator")
    os_.add_argument("config")
    os_.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    os_.add_argument("--dump", default=None, help="write the matrix in Matrix Market format")
    return p


def _cmd_run(args):
    from .driver import run_scenario
    from .output import format_summary
    from .scenarios import load_scenario

    sc = load_scenario(args.config, args.set)
    sim, summary = run_scenario(sc, out_dir=args.out, write_snapshots=not args.no_snapshots)
    sys.stdout.write(format_summary(summary))
    return EXIT_OK


def _cmd_convergence(args):
    import copy

    from .driver import convergence_study
    from .scenarios import load_scenario

    base = load_scenario(args.config, args.set)
    m = base.mesh
    try:
        x0, x1 = float(m["x0"]), float(m["x1"])
        y0, y1 = float(m["y0"]), float(m["y1"])
    except KeyError as exc:
        from .scenarios import ConfigError
        raise ConfigError(f"convergence needs a rectangle mesh section ({exc})") from None
    levels = [int(v) for v in args.levels.split(",")]
    degrees = [int(v) for v in args.degrees.split(",")]
    n_ref, k_ref = (int(v) for v in args.reference.split(","))

    def make(n, k):
        sc = copy.deepcopy(base)
        sc.mesh = {**sc.mesh, "type": "rectangle", "nx": str(n),
                   "ny": str(max(1, round(n * (y1 - y0) / (x1 - x0)))), "diagonal": "right"}
        sc.k = k
        return sc

    def progress(kind, key, sim):
        print(f"# {kind} n={key[0]} k={key[1]} steps={sim.n_steps}", flush=True)

    table, rates = convergence_study(make, [(n, (x1 - x0) / n) for n in levels], degrees, (n_ref, k_ref),
                                     base.t_max, callback=progress)
    print("k,dx,err_eta,err_q")
    for k, rows in table.items():
        for dx, e1, e2 in zip(rows["dx"], rows["eta"], rows["q"]):
            print(f"{k},{dx:.6g},{e1:.6e},{e2:.6e}")
    for (var, k), fit in rates.items():
        print(f"# rate {var} k={k}: {fit}")
    return EXIT_OK


def _cmd_mesh_check(args):
    from .mesh import load_mesh, report

    mesh = load_mesh(args.file, periodic=list(args.periodic))
    text, ok = report(mesh)
    print(text)
    return EXIT_OK if ok else 1


def _cmd_basis_info(args):
    from .basis import MAX_ORDER, info, reference_element
    from .scenarios import ConfigError

    if not 1 <= args.k <= MAX_ORDER:
        raise ConfigError(f"polynomial degree k={args.k} outside 1..{MAX_ORDER}")
    for key, val in info(args.k).items():
        print(f"{key}: {val}")
    print("node_coordinates:")
    for r, s in reference_element(args.k).nodes:
        print(f"  {r: .15f} {s: .15f}")
    return EXIT_OK


def _cmd_operator_stats(args):
    import numpy as np

    from .elliptic import assemble_diff_matrices, assemble_elliptic_operator
    from .scenarios import load_scenario, make_bathymetry_function
    from .space import DGSpace
    from .sparse import dump_matrix_market
    from .swe import make_bathymetry

    sc = load_scenario(args.config, args.set)
    mesh = sc.build_mesh()
    space = DGSpace(mesh, sc.k)
    bathy = make_bathymetry(space, make_bathymetry_function(sc.bathymetry, sc.bathymetry_params),
                            h0=sc.h0, eps0=sc.eps0)
    t0 = time.perf_counter()
    diff = assemble_diff_matrices(space)
    t_diff = time.perf_counter() - t0
    system = assemble_elliptic_operator(space, bathy.Hb, bathy.gradHb, sc.alpha, diff=diff)
    f = np.random.default_rng(0).standard_normal((2, space.K, space.Np))
    t0 = time.perf_counter()
    for _ in range(5):
        system.solve(f)
    t_solve = (time.perf_counter() - t0) / 5
    st = system.stats
    print(f"elements: {space.K}")
    print(f"degree: {sc.k}")
    print(f"unknowns: {st.n}")
    print(f"nnz_A: {st.nnz}")
    print(f"nnz_factors: {st.nnz_factors}")
    print(f"fill_ratio: {st.fill_ratio:.3f}")
    print(f"min_pivot_ratio: {st.min_pivot_ratio:.3e}")
    print(f"diff_assembly_seconds: {t_diff:.3f}")
    print(f"operator_assembly_and_factor_seconds: {system.assembly_seconds:.3f}")
    print(f"factor_seconds: {st.seconds:.3f}")
    print(f"solve_two_rhs_seconds: {t_solve:.4f}")
    if args.dump:
        dump_matrix_market(system.A, args.dump, comment="1 + alpha T[h_b] (nodal form)")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    _apply_threads(args.threads)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(message)s")
    from .mesh import MeshError
    from .scenarios import ConfigError
    from .swe import NumericalAbort

    handlers = {
        "run": _cmd_run,
        "convergence": _cmd_convergence,
        "mesh": _cmd_mesh_check,
        "basis": _cmd_basis_info,
        "operator": _cmd_operator_stats,
    }
    try:
        return handlers[args.command](args)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ConfigError, MeshError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
