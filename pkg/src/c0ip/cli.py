"""Command-line interface: ``c0ip {run, sweep-a, export-sigma, export-mesh, check}``.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .afem import NumericalFailure, RunConfig, records_to_csv, run
from .analysis import condition_estimate_1norm, principal_eigenvalue
from .assembly import assemble, factorize
from .benchmarks import BENCHMARKS, get_benchmark
from .mesh import build_topology, compute_geometry, read_mesh, refine_uniform, write_mesh
from .penalty import (
    PenaltyConfig,
    UnjustifiedPenaltyWarning,
    guaranteed_kappa,
    sigma_rectangle,
    sigma_triangle,
    sigma_variable_degree,
)

log = logging.getLogger("c0ip")

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DEFAULT_A_GRID = [float(2**p) for p in range(18)]

# JSON config keys accepted by ``run`` (flags override them)
_RUN_KEYS = {
    "benchmark": str,
    "mode": str,
    "theta": float,
    "a": float,
    "max_ndof": int,
    "compute_lambda1": bool,
    "compute_cond": bool,
    "sigma_variant": str,
    "solver": str,
    "g_variant": str,
    "max_levels": int,
}


class UsageError(Exception):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _open_output(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows):
    stream, close = _open_output(path)
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if close:
            stream.close()


def _check_a(a):
    if not a >= 1.0 or not math.isfinite(a):
        raise UsageError(f"--a {a} rejected: the penalty prefactor needs a > 1 for guaranteed "
                         "stability (a = 1 is accepted for parameter studies)")
    if a == 1.0:
        log.warning("a = 1: stability is not guaranteed (a > 1 required)")


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(data) - set(_RUN_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, value in data.items():
        typ = _RUN_KEYS[key]
        if typ is bool and not isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be true or false")
        out[key] = typ(value) if value is not None else None
    return out


def _mesh_from_args(args):
    if getattr(args, "mesh", None):
        try:
            mesh = read_mesh(args.mesh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read mesh: {exc}") from exc
    else:
        mesh = get_benchmark(args.benchmark).initial_mesh()
    return refine_uniform(mesh, args.rounds)


# --- subcommands --------------------------------------------------------------------


def cmd_run(args):
    cfg = _load_config(args.config)
    for key in _RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    try:
        config = RunConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    _check_a(config.a)
    if config.benchmark not in BENCHMARKS:
        raise UsageError(f"unknown benchmark {config.benchmark!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnjustifiedPenaltyWarning)
        records = run(config)
    stream, close = _open_output(args.output)
    try:
        records_to_csv(records, stream)
    finally:
        if close:
            stream.close()
    return 0


def sweep_a(mesh, a_values, method="lanczos"):
    """Rows ``(a, ndof, lambda1, cond1)`` on a fixed mesh with ``f = 1``."""
    topo = build_topology(mesh)
    geom = compute_geometry(mesh, topo)
    rows = []
    for a in a_values:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnjustifiedPenaltyWarning)
            sigma = sigma_triangle(PenaltyConfig(a, 2), geom, topo)
        system, dofmap = assemble(mesh, topo, geom, sigma, 1.0)
        dofs = dofmap.interior_dofs
        factor = factorize(system.B[dofs][:, dofs])
        lam = principal_eigenvalue(system.B, system.N, dofs, method=method, factor=factor).value
        cond = condition_estimate_1norm(system.B, dofs, factor=factor)
        log.info("a=%g lambda1=%.6f cond1=%.3e", a, lam, cond)
        rows.append((a, dofmap.n_interior, lam, cond))
    return rows


def cmd_sweep_a(args):
    a_values = DEFAULT_A_GRID if args.a_values is None else args.a_values
    for a in a_values:
        _check_a(a)
    mesh = _mesh_from_args(args)
    rows = sweep_a(mesh, a_values)
    _write_rows(args.output, ["a", "ndof", "lambda1", "cond1"], rows)
    return 0


def _read_ints(path):
    try:
        return np.array(Path(path).read_text().split(), dtype=np.int64)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read degrees from {path}: {exc}") from exc


def cmd_export_sigma(args):
    if args.k < 2:
        raise UsageError(f"--k {args.k} rejected: polynomial degree k >= 2 required")
    _check_a(args.a)
    if args.variant == "rectangle":
        return _export_sigma_rectangle(args)
    mesh = _mesh_from_args(args)
    topo = build_topology(mesh)
    geom = compute_geometry(mesh, topo)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnjustifiedPenaltyWarning)
        if args.variant == "variable":
            if args.degrees is None:
                raise UsageError("--variant variable needs --degrees FILE (one k per triangle)")
            degrees = _read_ints(args.degrees)
            if degrees.shape != (mesh.n_triangles,):
                raise UsageError(f"need {mesh.n_triangles} degrees, got {degrees.size}")
            if degrees.min() < 2:
                raise UsageError("polynomial degree k >= 2 required on every triangle")
            sigma = sigma_variable_degree(args.a, degrees, geom, topo)
        else:
            sigma = sigma_triangle(PenaltyConfig(args.a, args.k), geom, topo)
    rows = [
        (e, int(v[0]), int(v[1]), bool(interior), s)
        for e, (v, interior, s) in enumerate(zip(topo.edge_vertices, topo.is_interior, sigma.sigma))
    ]
    _write_rows(args.output, ["edge", "v0", "v1", "interior", "sigma"], rows)
    return 0


def _export_sigma_rectangle(args):
    """Rectangle data: CSV with columns v0,v1,length,area_plus,area_minus (empty on the boundary)."""
    if args.rectangles is None:
        raise UsageError("--variant rectangle needs --rectangles FILE")
    try:
        with open(args.rectangles, newline="") as fh:
            table = list(csv.DictReader(fh))
        v = np.array([[int(r["v0"]), int(r["v1"])] for r in table], dtype=np.int64).reshape(-1, 2)
        length = np.array([float(r["length"]) for r in table])
        plus = np.array([float(r["area_plus"]) for r in table])
        minus = np.array([float(r["area_minus"]) if r["area_minus"] else np.nan for r in table])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"malformed rectangle data: {exc}") from exc
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnjustifiedPenaltyWarning)
            sigma = sigma_rectangle(args.a, args.k, length, plus, minus)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [(e, v[e, 0], v[e, 1], not np.isnan(minus[e]), sigma.sigma[e]) for e in range(len(length))]
    _write_rows(args.output, ["edge", "v0", "v1", "interior", "sigma"], rows)
    return 0


def cmd_export_mesh(args):
    mesh = _mesh_from_args(args)
    if args.output is None or args.output == "-":
        lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.coords]
        lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        write_mesh(mesh, args.output)
    return 0


def cmd_check(args):
    """Quick self-test on the initial mesh of every benchmark plus one refinement."""
    ok = True
    a = args.a
    for name, bench in BENCHMARKS.items():
        mesh = refine_uniform(bench.initial_mesh(), 1)
        topo = build_topology(mesh)
        geom = compute_geometry(mesh, topo)
        sigma = sigma_triangle(PenaltyConfig(a, 2), geom, topo)
        system, dofmap = assemble(mesh, topo, geom, sigma, bench.f)
        B = system.B
        sym = abs(B - B.T).max() / abs(B).max()
        const = np.abs(B @ np.ones(B.shape[0])).max() / abs(B).max()
        lam = principal_eigenvalue(B, system.N, dofmap.interior_dofs).value
        kappa = guaranteed_kappa(a)
        passed = sym < 1e-12 and const < 1e-10 and lam >= kappa - 1e-9
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: symmetry {sym:.1e}, "
              f"B*1 {const:.1e}, lambda1 {lam:.6f} >= {kappa:.6f}")
    return 0 if ok else EXIT_NUMERICAL


# --- parser -------------------------------------------------------------------------


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="c0ip", description="C0 interior penalty solver for the biharmonic equation."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="adaptive or uniform convergence run, CSV per level")
    p.add_argument("--config", help="JSON file with run settings (flags override it)")
    p.add_argument("--benchmark", choices=sorted(BENCHMARKS))
    p.add_argument("--mode", choices=["adaptive", "uniform"])
    p.add_argument("--theta", type=float, help="bulk parameter in (0, 1] (default 0.5)")
    p.add_argument("--a", type=_positive_float, help="penalty prefactor a > 1 (default 2)")
    p.add_argument("--max-ndof", dest="max_ndof", type=int, help="stop once ndof exceeds this")
    p.add_argument("--max-levels", dest="max_levels", type=int)
    p.add_argument("--lambda1", dest="compute_lambda1", action="store_const", const=True,
                   help="compute the stability eigenvalue on every level")
    p.add_argument("--cond", dest="compute_cond", action="store_const", const=True,
                   help="estimate the 1-norm condition number on every level")
    p.add_argument("--sigma-variant", dest="sigma_variant", choices=["triangle", "variable"])
    p.add_argument("--solver", choices=["direct", "cg"])
    p.add_argument("--g-variant", dest="g_variant", choices=["symmetric", "verbatim"],
                   help="angular function of the singular solutions (default symmetric)")
    p.add_argument("-o", "--output", help="CSV file (default standard output)")
    p.set_defaults(func=cmd_run)

    def mesh_source(q, default_rounds):
        q.add_argument("--benchmark", choices=sorted(BENCHMARKS), default="lshape")
        q.add_argument("--mesh", help="mesh file (overrides --benchmark)")
        q.add_argument("--rounds", type=int, default=default_rounds,
                       help="uniform refinement rounds applied to the mesh")

    p = sub.add_parser("sweep-a", help="lambda1 and cond1 over a grid of penalty prefactors")
    mesh_source(p, 5)
    p.add_argument("--a-values", dest="a_values", type=_positive_float, nargs="+",
                   help="prefactors (default 1, 2, 4, ..., 2^17)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep_a)

    p = sub.add_parser("export-sigma", help="penalty parameter per edge as CSV")
    mesh_source(p, 0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--a", type=_positive_float, default=2.0)
    p.add_argument("--variant", choices=["triangle", "variable", "rectangle"], default="triangle")
    p.add_argument("--degrees", help="file with one polynomial degree per triangle (variable)")
    p.add_argument("--rectangles",
                   help="CSV v0,v1,length,area_plus,area_minus per edge (rectangle)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_sigma)

    p = sub.add_parser("export-mesh", help="write a benchmark mesh in the text format")
    mesh_source(p, 0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_mesh)

    p = sub.add_parser("check", help="quick consistency checks on all benchmarks")
    p.add_argument("--a", type=_positive_float, default=2.0)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "rounds", 0) is not None and getattr(args, "rounds", 0) < 0:
        parser.print_usage(sys.stderr)
        print("c0ip: error: --rounds must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"c0ip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"c0ip: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
