"""Adaptive (solve, estimate, mark, refine) and uniform refinement loops."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .analysis import stability_report
from .assembly import SolverError, assemble, factorize, restrict_and_solve
from .basis import element_data
from .benchmarks import energy_error, get_benchmark
from .estimator import dorfler_mark, estimate
from .mesh import build_topology, compute_geometry, refine_nvb
from .penalty import PenaltyConfig, UnjustifiedPenaltyWarning, sigma_triangle, sigma_variable_degree

__all__ = [
    "RunConfig",
    "RunRecord",
    "LevelState",
    "NumericalFailure",
    "run",
    "iterate_levels",
    "empirical_rate",
    "records_to_csv",
    "records_from_csv",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "ndof", "triangles", "eta", "error", "lambda1", "cond1"]


class NumericalFailure(RuntimeError):
    """A solve or eigenvalue computation failed on some level."""

    def __init__(self, level, cause):
        super().__init__(f"level {level}: {cause}")
        self.level = level


@dataclass(frozen=True)
class RunConfig:
    benchmark: str = "lshape"
    mode: str = "adaptive"
    theta: float = 0.5
    a: float = 2.0
    max_ndof: int = 20000
    compute_lambda1: bool = False
    compute_cond: bool = False
    sigma_variant: str = "triangle"
    solver: str = "direct"
    g_variant: str = "symmetric"
    max_levels: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("adaptive", "uniform"):
            raise ValueError(f"mode must be 'adaptive' or 'uniform', got {self.mode!r}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"bulk parameter theta must lie in (0, 1], got {self.theta}")
        if not self.a > 0:
            raise ValueError(f"penalty prefactor must satisfy a > 1, got {self.a}")
        if self.sigma_variant not in ("triangle", "variable"):
            raise ValueError(
                f"sigma variant {self.sigma_variant!r} cannot drive a run "
                "(the rectangle formula is export-only)"
            )
        if self.max_ndof < 0:
            raise ValueError("max_ndof must be nonnegative")

    def with_updates(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class RunRecord:
    level: int
    ndof: int
    triangles: int
    eta: float
    error: Optional[float] = None
    lambda1: Optional[float] = None
    cond1: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LevelState:
    """Everything computed on one level (for callers that need more than the record)."""

    record: RunRecord
    mesh: object
    topo: object
    geom: object
    sigma: object
    system: object
    dofmap: object
    solution: object
    estimator: object


def _sigma(cfg, geom, topo):
    with warnings.catch_warnings():
        # the driver reports a <= 1 once, not on every level
        warnings.simplefilter("ignore", UnjustifiedPenaltyWarning)
        if cfg.sigma_variant == "variable":
            return sigma_variable_degree(cfg.a, np.full(len(geom.area), 2), geom, topo)
        return sigma_triangle(PenaltyConfig(cfg.a, 2), geom, topo)


def iterate_levels(cfg, mesh=None):
    """Yield a :class:`LevelState` per level until ``ndof > max_ndof``.

    The first level is always computed, even if it already exceeds
    ``max_ndof``.
    """
    bench = get_benchmark(cfg.benchmark, cfg.g_variant)
    if cfg.a <= 1.0:
        warnings.warn(f"a = {cfg.a} <= 1: stability is not guaranteed",
                      UnjustifiedPenaltyWarning, stacklevel=2)
    mesh = bench.initial_mesh() if mesh is None else mesh
    level = 0
    while True:
        topo = build_topology(mesh)
        geom = compute_geometry(mesh, topo)
        elem = element_data(mesh)
        sigma = _sigma(cfg, geom, topo)
        system, dofmap = assemble(mesh, topo, geom, sigma, bench.f, elem)
        try:
            factor = None
            if cfg.solver == "direct" or cfg.compute_lambda1 or cfg.compute_cond:
                factor = factorize(system.B[dofmap.interior_dofs][:, dofmap.interior_dofs])
            solution = restrict_and_solve(system, dofmap, method=cfg.solver, factor=factor)
            report = None
            if cfg.compute_lambda1 or cfg.compute_cond:
                report = stability_report(system, dofmap, cfg.a, cfg.compute_lambda1,
                                          cfg.compute_cond, factor=factor)
        except (SolverError, FloatingPointError, RuntimeError, ValueError) as exc:
            raise NumericalFailure(level, exc) from exc
        est = estimate(mesh, topo, geom, sigma, solution.coefficients, dofmap, bench.f, elem)
        err = None
        if bench.has_exact:
            err = energy_error(solution.coefficients, bench.exact, mesh, geom, system, dofmap, elem)
        record = RunRecord(
            level=level,
            ndof=dofmap.n_interior,
            triangles=mesh.n_triangles,
            eta=est.eta_total,
            error=err,
            lambda1=None if report is None else report.lambda1,
            cond1=None if report is None else report.cond1,
        )
        log.info("level %d: ndof=%d eta=%.3e", level, record.ndof, record.eta)
        yield LevelState(record, mesh, topo, geom, sigma, system, dofmap, solution, est)
        if record.ndof > cfg.max_ndof:
            return
        if cfg.max_levels is not None and level + 1 >= cfg.max_levels:
            return
        if cfg.mode == "uniform":
            marked = np.arange(mesh.n_triangles)
        else:
            marked = dorfler_mark(est.eta2_per_triangle, cfg.theta)
            if marked.size == 0:  # exact discrete solution, nothing to refine
                return
        mesh = refine_nvb(mesh, marked, topo)
        level += 1


def run(cfg):
    """Run the configured loop and return the list of :class:`RunRecord`."""
    return [state.record for state in iterate_levels(cfg)]


def empirical_rate(records, field):
    """Least-squares slope of ``log(field)`` against ``log(ndof)``.

    Fitted over the last ``max(3, len(records) // 2)`` records.
    """
    pairs = [(r.ndof, getattr(r, field)) for r in records]
    if len(pairs) < 3:
        raise ValueError("need at least three records to fit a rate")
    tail = pairs[-max(3, len(pairs) // 2):]
    ndof = np.array([p[0] for p in tail], dtype=float)
    vals = np.array([np.nan if p[1] is None else p[1] for p in tail], dtype=float)
    if not (np.all(np.isfinite(vals)) and np.all(vals > 0)):
        raise ValueError(f"field {field!r} must be positive on the fitted records")
    slope, _ = np.polyfit(np.log(ndof), np.log(vals), 1)
    return float(slope)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def records_to_csv(records, stream=None):
    """Write records with 17 significant digits; returns the text if no stream is given."""
    out = io.StringIO() if stream is None else stream
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    if stream is None:
        return out.getvalue()
    return None


def records_from_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    types = {f.name: f.type for f in fields(RunRecord)}
    records = []
    for row in reader:
        kw = {}
        for name in CSV_HEADER:
            cell = row[name]
            if cell == "":
                kw[name] = None
            elif types[name] in ("int", int):
                kw[name] = int(cell)
            else:
                kw[name] = float(cell)
        records.append(RunRecord(**kw))
    return records
