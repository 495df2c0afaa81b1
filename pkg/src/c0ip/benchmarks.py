"""Benchmark problems: initial meshes, exact solutions and the energy error.

Singular benchmarks use

    u(r, phi) = (1 - x^2)^2 (1 - y^2)^2 r^(1 + alpha) g(phi - phi0)

with the angular function ``g`` of the corner singularity of the clamped
plate.  Derivatives up to fourth order (and hence ``f = bilaplacian u``)
come from truncated Taylor jets, so no derivative is coded by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import jets
from .basis import element_data
from .mesh import Mesh, fix_local_enumeration

__all__ = [
    "LSHAPE_ALPHA",
    "CUSP_ALPHA",
    "Benchmark",
    "ExactSolution",
    "BENCHMARKS",
    "get_benchmark",
    "g_alpha_omega",
    "noncharacteristic_residual",
    "singular_solution",
    "smooth_manufactured",
    "triangle_quadrature",
    "energy_error",
    "lshape_mesh",
    "cusp_mesh",
    "square_mesh",
    "fourslit_mesh",
    "dumbbell_mesh",
]

LSHAPE_ALPHA = 0.5444837
LSHAPE_OMEGA = 3 * math.pi / 2
CUSP_ALPHA = 0.50500969
CUSP_OMEGA = 7 * math.pi / 4


def _is_jet(v):
    return isinstance(v, jets.Jet)


def _sin(v):
    return jets.sin(v) if _is_jet(v) else np.sin(v)


def _cos(v):
    return jets.cos(v) if _is_jet(v) else np.cos(v)


def g_alpha_omega(phi, alpha, omega, variant="symmetric"):
    """Angular part of the corner singularity.

    ``variant="symmetric"`` uses ``alpha + 1`` in the denominator of the
    second ``sin((alpha + 1) phi)`` term, so that ``g`` and ``g'`` vanish at
    ``phi = 0`` and ``phi = omega``.  ``variant="verbatim"`` uses
    ``alpha - 1`` in both denominators of that bracket; it does not satisfy
    the clamped boundary conditions and only serves sensitivity checks.
    """
    if abs(alpha - 1.0) < 1e-8 or abs(alpha + 1.0) < 1e-8:
        raise ValueError(f"alpha = {alpha} makes the angular function singular")
    if variant not in ("symmetric", "verbatim"):
        raise ValueError(f"unknown variant {variant!r}")
    am, ap = alpha - 1.0, alpha + 1.0
    const_1 = math.sin(am * omega) / am - math.sin(ap * omega) / ap
    const_2 = math.cos(am * omega) - math.cos(ap * omega)
    second_den = ap if variant == "symmetric" else am
    return const_1 * (_cos(am * phi) - _cos(ap * phi)) - (
        _sin(am * phi) / am - _sin(ap * phi) / second_den
    ) * const_2


def noncharacteristic_residual(alpha, omega):
    """``sin^2(alpha omega) - alpha^2 sin^2(omega)``."""
    return math.sin(alpha * omega) ** 2 - alpha**2 * math.sin(omega) ** 2


class ExactSolution:
    """Point evaluator built on a jet-valued function ``u(x, y)``.

    ``func`` receives two jets (or plain arrays) and returns the same type.
    """

    def __init__(self, func, name=""):
        self.func = func
        self.name = name

    def jet(self, points, order=4):
        points = np.asarray(points, dtype=float)
        x, y = jets.variables(points[..., 0], points[..., 1], order)
        return self.func(x, y)

    def value(self, points):
        points = np.asarray(points, dtype=float)
        return np.asarray(self.func(points[..., 0], points[..., 1]), dtype=float)

    def gradient(self, points):
        u = self.jet(points, order=1)
        return np.stack([u.derivative(1, 0), u.derivative(0, 1)], axis=-1)

    def hessian(self, points):
        u = self.jet(points, order=2)
        uxy = u.derivative(1, 1)
        return np.stack(
            [np.stack([u.derivative(2, 0), uxy], -1), np.stack([uxy, u.derivative(0, 2)], -1)],
            axis=-2,
        )

    def bilaplacian(self, points):
        u = self.jet(points, order=4)
        return u.derivative(4, 0) + 2.0 * u.derivative(2, 2) + u.derivative(0, 4)

    __call__ = value


def _polar(x, y, phi_start):
    """Radius and angle in ``[phi_start, phi_start + 2 pi)`` (jets or arrays)."""
    if not _is_jet(x):
        r = np.hypot(x, y)
        phi = np.mod(np.arctan2(y, x) - phi_start + 1e-12, 2 * np.pi) + phi_start - 1e-12
        return r, phi
    x0, y0 = x.value, y.value
    r2 = x * x + y * y
    if np.any(r2.value == 0.0):
        raise ValueError("the singular solution cannot be evaluated at the corner r = 0")
    phi0 = np.mod(np.arctan2(y0, x0) - phi_start + 1e-12, 2 * np.pi) + phi_start - 1e-12
    # angle increment relative to the base direction, exact as a jet
    t = (x * y0 - y * x0) * -1.0 / (x * x0 + y * y0)
    phi = jets.atan(t) + phi0
    return r2, phi


def singular_solution(alpha, omega, phi_start, variant="symmetric"):
    """Cut-off corner singularity with the reentrant corner at the origin.

    The domain occupies the angles ``[phi_start, phi_start + omega]``.
    """

    def u(x, y):
        cutoff = (1.0 - x * x) ** 2 * (1.0 - y * y) ** 2
        if _is_jet(x):
            r2, phi = _polar(x, y, phi_start)
            radial = jets.power(r2, (1.0 + alpha) / 2.0)
        else:
            r, phi = _polar(x, y, phi_start)
            radial = r ** (1.0 + alpha)
        return cutoff * radial * g_alpha_omega(phi - phi_start, alpha, omega, variant)

    return ExactSolution(u, name=f"singular(alpha={alpha}, omega={omega:.6f})")


def _smooth(x, y):
    p = x * (1.0 - x) * y * (1.0 - y)
    return p * p


def smooth_manufactured():
    """``u = (x (1 - x) y (1 - y))^2`` on the unit square."""
    return ExactSolution(_smooth, name="smooth")


def smooth_bilaplacian(points):
    """Closed-form ``bilaplacian u`` of :func:`smooth_manufactured`."""
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0], points[..., 1]
    p = x**2 * (1 - x) ** 2
    q = y**2 * (1 - y) ** 2
    p2 = 2 - 12 * x + 12 * x**2
    q2 = 2 - 12 * y + 12 * y**2
    return 24.0 * q + 2.0 * p2 * q2 + 24.0 * p


# --- initial triangulations ----------------------------------------------------------


def _from_lists(vertices, triangles):
    return fix_local_enumeration(Mesh(np.array(vertices, dtype=float), np.array(triangles)))


def square_mesh():
    return _from_lists([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)])


def lshape_mesh():
    """(-1, 1)^2 minus [0, 1)^2: six right isosceles triangles around the corner."""
    v = [(0, 0), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1)]
    t = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 6), (0, 6, 7)]
    return _from_lists(v, t)


def cusp_mesh():
    """(-1, 1)^2 minus the triangle (0,0), (1,0), (1,1)."""
    v = [(0, 0), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]
    t = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 6), (0, 6, 7), (0, 7, 8)]
    return _from_lists(v, t)


class _VertexPool:
    def __init__(self):
        self.coords = []
        self.index = {}

    def __call__(self, x, y, tag=0):
        key = (round(x * 8), round(y * 8), tag)
        if key not in self.index:
            self.index[key] = len(self.coords)
            self.coords.append((x, y))
        return self.index[key]


def fourslit_mesh():
    """(-1, 1)^2 with a slit of length 1/2 entering from the middle of each side.

    A 4 x 4 grid of squares of side 1/2, each cut by one diagonal in a
    checkerboard pattern.  Vertices where a slit meets the outer boundary are
    duplicated so the two slit faces are distinct boundary edges.
    """
    pool = _VertexPool()
    twins = {  # square lower-left corner -> vertex that needs the twin copy
        (0.0, -1.0): (0.0, -1.0),
        (0.0, 0.5): (0.0, 1.0),
        (-1.0, 0.0): (-1.0, 0.0),
        (0.5, 0.0): (1.0, 0.0),
    }
    triangles = []
    h = 0.5
    for i in range(4):
        for j in range(4):
            x0, y0 = -1.0 + i * h, -1.0 + j * h

            def vid(x, y):
                tag = 1 if twins.get((x0, y0)) == (x, y) else 0
                return pool(x, y, tag)

            a, b = vid(x0, y0), vid(x0 + h, y0)
            c, d = vid(x0 + h, y0 + h), vid(x0, y0 + h)
            if (i + j) % 2:
                triangles += [(a, b, c), (a, c, d)]
            else:
                triangles += [(a, b, d), (b, c, d)]
    return _from_lists(pool.coords, triangles)


_DUMBBELL_LEFT = [
    # fan around the slit tip (0, 0); tag 1 marks the lower copy of (-1, 0)
    [(-1, 0, 1), (-1, -1), (0, 0)],
    [(-1, -1), (0, -1), (0, 0)],
    [(0, 0), (0, -1), (0.5, -0.5)],
    [(0, 0), (0.5, -0.5), (1, 0)],
    [(0, 0), (1, 0), (1, 1)],
    [(0, 0), (1, 1), (0, 1)],
    [(0, 0), (0, 1), (-1, 1)],
    [(0, 0), (-1, 1), (-1, 0)],
    # graded corner towards the bridge
    [(0, -1), (0.5, -1), (0.5, -0.5)],
    [(0.5, -1), (0.75, -0.75), (0.5, -0.5)],
    [(0.5, -1), (0.75, -1), (0.75, -0.75)],
    [(0.75, -1), (1, -1), (0.75, -0.75)],
    [(1, -1), (1, -0.75), (0.75, -0.75)],
    [(0.75, -0.75), (1, -0.75), (1, -0.5)],
    [(0.5, -0.5), (0.75, -0.75), (1, -0.5)],
    [(0.5, -0.5), (1, -0.5), (1, 0)],
]


def dumbbell_mesh():
    """Two squares joined by a thin bridge, with a slit into the left square.

    ((-1, 5) x (-1, 1) minus [1, 3] x [-0.75, 1)) minus (-1, 0] x {0}; 48
    triangles reconstructed from the sketch of the initial mesh.
    """
    pool = _VertexPool()
    triangles = []
    for tri in _DUMBBELL_LEFT:
        ids = []
        for p in tri:
            tag = p[2] if len(p) == 3 else 0
            ids.append(pool(float(p[0]), float(p[1]), tag))
        triangles.append(tuple(ids))
    # right square: mirror image about x = 2, slit closed
    for tri in _DUMBBELL_LEFT:
        triangles.append(tuple(pool(4.0 - float(p[0]), float(p[1])) for p in tri))
    h = 0.25
    for i in range(8):
        x0 = 1.0 + i * h
        a, b = pool(x0, -1.0), pool(x0 + h, -1.0)
        c, d = pool(x0 + h, -0.75), pool(x0, -0.75)
        if x0 < 2.0:
            triangles += [(a, b, d), (b, c, d)]
        else:
            triangles += [(a, b, c), (a, c, d)]
    return _from_lists(pool.coords, triangles)


# --- benchmark registry --------------------------------------------------------------


@dataclass(frozen=True)
class Benchmark:
    name: str
    initial_mesh: Callable[[], Mesh]
    f: Callable
    exact: Optional[ExactSolution] = None
    alpha: Optional[float] = None
    omega: Optional[float] = None
    corner: tuple = (0.0, 0.0)

    @property
    def has_exact(self):
        return self.exact is not None


def _constant_load(points):
    return np.ones(np.shape(points)[:-1])


def _make_registry(variant="symmetric"):
    lshape_u = singular_solution(LSHAPE_ALPHA, LSHAPE_OMEGA, math.pi / 2, variant)
    cusp_u = singular_solution(CUSP_ALPHA, CUSP_OMEGA, math.pi / 4, variant)
    smooth_u = smooth_manufactured()
    return {
        "lshape": Benchmark("lshape", lshape_mesh, lshape_u.bilaplacian, lshape_u,
                            LSHAPE_ALPHA, LSHAPE_OMEGA),
        "cusp": Benchmark("cusp", cusp_mesh, cusp_u.bilaplacian, cusp_u, CUSP_ALPHA, CUSP_OMEGA),
        "dumbbell": Benchmark("dumbbell", dumbbell_mesh, _constant_load),
        "fourslit": Benchmark("fourslit", fourslit_mesh, _constant_load),
        "square_smooth": Benchmark("square_smooth", square_mesh, smooth_bilaplacian, smooth_u,
                                   corner=(0.5, 0.5)),
    }


BENCHMARKS = _make_registry()


def get_benchmark(name, variant="symmetric"):
    registry = BENCHMARKS if variant == "symmetric" else _make_registry(variant)
    try:
        return registry[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(registry)}") from None


# --- energy error --------------------------------------------------------------------

_A1 = (6.0 - math.sqrt(15.0)) / 21.0
_A2 = (6.0 + math.sqrt(15.0)) / 21.0
_W1 = (155.0 - math.sqrt(15.0)) / 1200.0
_W2 = (155.0 + math.sqrt(15.0)) / 1200.0


def triangle_quadrature():
    """Seven-point rule exact for degree 5: barycentric points and weights summing to 1."""
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [_A1, _A1, 1 - 2 * _A1],
            [_A1, 1 - 2 * _A1, _A1],
            [1 - 2 * _A1, _A1, _A1],
            [_A2, _A2, 1 - 2 * _A2],
            [_A2, 1 - 2 * _A2, _A2],
            [1 - 2 * _A2, _A2, _A2],
        ]
    )
    weights = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])
    return bary, weights


def discrete_hessians(mesh, coefficients, dofmap, elem=None):
    """Piecewise constant Hessian of the discrete function, shape ``(nt, 2, 2)``."""
    if elem is None:
        elem = element_data(mesh)
    u4e = np.asarray(coefficients)[dofmap.global4e]
    return np.einsum("ta,taij->tij", u4e, elem.hessians)


def energy_error(coefficients, exact, mesh, geom, system, dofmap, elem=None):
    """Discrete energy norm ``||u - u_h||_h`` of the error.

    The piecewise Hessian part uses the seven-point rule; the exact solution
    has no gradient jumps, so the penalty part is ``c_IP(u_h, u_h)``.
    """
    x = np.asarray(coefficients, dtype=float)
    hess_h = discrete_hessians(mesh, x, dofmap, elem)
    bary, weights = triangle_quadrature()
    corners = mesh.coords[mesh.triangles]  # (nt, 3, 2)
    points = np.einsum("qk,tkx->tqx", bary, corners)
    diff = exact.hessian(points) - hess_h[:, None]
    volume = np.einsum("t,q,tqij,tqij->", geom.area, weights, diff, diff)
    penalty = float(x @ (system.C @ x))
    return math.sqrt(volume + max(penalty, 0.0))
