"""Residual error estimator for the quadratic C0IP method and bulk marking.

For piecewise quadratics the Hessian is constant on each triangle, so the
volume residual reduces to ``f`` and the third-derivative jumps vanish.
Per triangle

    eta^2(T) = |T|^2 (|T|/3) sum_{E in E(T)} f(mid E)^2
             + sum_{E in E(T)} sigma_E^2 / h_E ||[grad u . nu]||^2_{L^2(E)}
             + sum_{interior E in E(T)} h_E ||[(D^2 u nu) . nu]||^2_{L^2(E)}
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import SIMPSON_WEIGHTS, edge_data, _evaluate
from .basis import element_data

__all__ = ["EstimatorField", "estimate", "dorfler_mark"]


@dataclass(frozen=True, eq=False)
class EstimatorField:
    eta2_per_triangle: np.ndarray
    volume: np.ndarray  # per triangle
    gradient_jump: np.ndarray  # per edge
    hessian_jump: np.ndarray  # per edge (zero on boundary edges)

    @property
    def eta_total(self):
        return math.sqrt(float(self.eta2_per_triangle.sum()))


def estimate(mesh, topo, geom, sigma, coefficients, dofmap, f, elem=None):
    """Evaluate the estimator contributions of a discrete solution.

    Parameters
    ----------
    sigma : PenaltyField or array, one value per edge.
    coefficients : global coefficient vector of ``u_IP``.
    f : callable or float, sampled at the edge midpoints.
    """
    sigma = np.asarray(getattr(sigma, "sigma", sigma), dtype=float)
    if elem is None:
        elem = element_data(mesh)
    x = np.asarray(coefficients, dtype=float)
    area, length = geom.area, geom.length
    interior = topo.is_interior

    f_mid = _evaluate(f, geom.midpoint)[topo.edges_of_triangle]  # (nt, 3)
    volume = area**2 * area / 3.0 * (f_mid**2).sum(axis=1)

    data = edge_data(topo, geom, elem)
    u4s = x[dofmap.global4s]  # dummy slots carry zero shape data on boundary edges
    jump_at_nodes = np.einsum("ea,eal->el", u4s, data.jump_normal)
    # sigma^2/h_E * ||jump||^2_{L2(E)}, Simpson is exact for the quadratic integrand
    grad_jump = sigma**2 * (jump_at_nodes**2 @ SIMPSON_WEIGHTS)

    tp = topo.triangles_of_edge[:, 0]
    tm = np.where(interior, topo.triangles_of_edge[:, 1], tp)
    hess = np.einsum("ta,taij->tij", x[dofmap.global4e], elem.hessians)
    nu = geom.normal
    hjump = np.einsum("ei,eij,ej->e", nu, hess[tp] - hess[tm], nu)
    hess_jump = np.where(interior, length**2 * hjump**2, 0.0)

    per_edge = grad_jump + hess_jump
    eta2 = volume + per_edge[topo.edges_of_triangle].sum(axis=1)
    for arr in (eta2, volume, grad_jump, hess_jump):
        arr.setflags(write=False)
    return EstimatorField(eta2, volume, grad_jump, hess_jump)


def dorfler_mark(eta2, theta):
    """Minimal set of triangles carrying a ``theta`` fraction of ``sum eta2``.

    Sorted by decreasing indicator, ties by increasing index; returns the
    marked indices in increasing order.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"bulk parameter theta must lie in (0, 1], got {theta}")
    eta2 = np.asarray(eta2, dtype=float)
    if eta2.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(eta2.size), -eta2))
    total = eta2.sum()
    if total <= 0.0:
        return np.zeros(0, dtype=np.int64)
    cumulative = np.cumsum(eta2[order])
    # tolerance guards against round-off in the cumulative sum for theta = 1
    target = theta * total * (1.0 - 4 * np.finfo(float).eps * eta2.size)
    count = min(int(np.searchsorted(cumulative, target, side="left")) + 1, eta2.size)
    return np.sort(order[:count])
