"""Edge-local penalty parameters with a guaranteed discrete stability constant.

For a prefactor ``a > 1`` and degree ``k >= 2`` the triangle formula reads

    interior edge:  sigma_E = 3 a k (k - 1) h_E^2 / 8 * (1/|T+| + 1/|T-|)
    boundary edge:  sigma_E = 3 a k (k - 1) h_E^2 / (2 |T+|)

and the symmetric interior penalty form is then coercive with constant
``1 - 1/sqrt(a)`` in the mesh-dependent norm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_A",
    "PenaltyConfig",
    "PenaltyField",
    "guaranteed_kappa",
    "sigma_triangle",
    "sigma_variable_degree",
    "sigma_rectangle",
]

DEFAULT_A = 2.0


class UnjustifiedPenaltyWarning(UserWarning):
    """Raised for ``a <= 1``, where no stability constant is guaranteed."""


@dataclass(frozen=True)
class PenaltyConfig:
    a: float = DEFAULT_A
    k: int = 2

    def __post_init__(self):
        _check(self.a, [self.k])

    @property
    def unjustified(self):
        return self.a <= 1.0


@dataclass(frozen=True, eq=False)
class PenaltyField:
    sigma: np.ndarray
    kappa: float


def guaranteed_kappa(a):
    """Stability constant ``1 - 1/sqrt(a)`` (zero or negative for ``a <= 1``)."""
    return 1.0 - 1.0 / math.sqrt(a)


def _check(a, degrees):
    if not a > 0:
        raise ValueError(f"penalty prefactor a must be positive (a > 1 guarantees stability), got {a}")
    degrees = np.asarray(degrees)
    if degrees.size and degrees.min() < 2:
        raise ValueError(f"polynomial degree k must be at least 2, got {int(degrees.min())}")
    if a <= 1.0:
        warnings.warn(
            f"a = {a} <= 1: stability is not guaranteed (a > 1 required)",
            UnjustifiedPenaltyWarning,
            stacklevel=3,
        )


def _field(values, a):
    values = np.asarray(values, dtype=float)
    values.setflags(write=False)
    return PenaltyField(sigma=values, kappa=guaranteed_kappa(a))


def sigma_triangle(cfg, geom, topo):
    """Penalty parameter per edge for uniform polynomial degree ``cfg.k``."""
    degrees = np.full(len(geom.area), cfg.k)
    return _sigma_per_triangle_degree(cfg.a, degrees, geom, topo)


def sigma_variable_degree(a, degrees, geom, topo):
    """Penalty parameter per edge for a degree ``k_T`` on every triangle."""
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.shape != geom.area.shape:
        raise ValueError("need one polynomial degree per triangle")
    _check(a, degrees)
    return _sigma_per_triangle_degree(a, degrees, geom, topo)


def _sigma_per_triangle_degree(a, degrees, geom, topo):
    tp = topo.triangles_of_edge[:, 0]
    tm = topo.triangles_of_edge[:, 1]
    interior = topo.is_interior
    h2 = geom.length**2
    kk = degrees * (degrees - 1.0)
    # one contribution per adjacent triangle; boundary edges carry 4x the weight
    sigma = 3.0 * a * h2 * kk[tp] / (2.0 * geom.area[tp])
    ie = np.flatnonzero(interior)
    sigma[ie] = sigma[ie] / 4.0 + 3.0 * a * h2[ie] * kk[tm[ie]] / (8.0 * geom.area[tm[ie]])
    return _field(sigma, a)


def sigma_rectangle(a, k, length, area_plus, area_minus=None):
    """Penalty parameter for rectangular elements of partial degree ``k``.

    ``area_minus`` holds ``nan`` (or is ``None``) for boundary edges.
    """
    _check(a, [k])
    length = np.asarray(length, dtype=float)
    area_plus = np.asarray(area_plus, dtype=float)
    if area_minus is None:
        area_minus = np.full_like(length, np.nan)
    area_minus = np.asarray(area_minus, dtype=float)
    if (area_plus <= 0).any() or (area_minus[~np.isnan(area_minus)] <= 0).any():
        raise ValueError("rectangle areas must be positive")
    c = a * (k - 1.0) ** 2 * length**2
    boundary = np.isnan(area_minus)
    sigma = np.where(
        boundary,
        4.0 * c / area_plus,
        c * (1.0 / area_plus + 1.0 / np.where(boundary, 1.0, area_minus)),
    )
    return _field(sigma, a)
