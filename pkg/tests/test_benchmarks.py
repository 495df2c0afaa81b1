import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from c0ip import benchmarks as bm
from c0ip import jets
from c0ip.afem import RunConfig, run
from c0ip.mesh import refine_uniform

from conftest import assembled

SINGULAR = [
    ("lshape", bm.LSHAPE_ALPHA, bm.LSHAPE_OMEGA, math.pi / 2),
    ("cusp", bm.CUSP_ALPHA, bm.CUSP_OMEGA, math.pi / 4),
]


def test_exponents_and_angles():
    assert bm.BENCHMARKS["lshape"].alpha == 0.5444837
    assert bm.BENCHMARKS["cusp"].alpha == 0.50500969
    assert bm.LSHAPE_OMEGA == pytest.approx(3 * math.pi / 2)
    assert bm.CUSP_OMEGA == pytest.approx(7 * math.pi / 4)


@pytest.mark.parametrize("name, alpha, omega, _", SINGULAR)
def test_noncharacteristic_residual(name, alpha, omega, _):
    assert abs(bm.noncharacteristic_residual(alpha, omega)) <= 1e-6


@pytest.mark.parametrize("variant", ["symmetric", "verbatim"])
def test_g_vanishes_at_zero(variant):
    for _, alpha, omega, _ in SINGULAR:
        assert bm.g_alpha_omega(0.0, alpha, omega, variant) == 0.0


def test_g_frozen_midpoint_values():
    a, w = bm.LSHAPE_ALPHA, bm.LSHAPE_OMEGA
    assert bm.g_alpha_omega(w / 2, a, w) == pytest.approx(4.1977981747609814, rel=1e-14)
    assert bm.g_alpha_omega(w / 2, a, w, "verbatim") == pytest.approx(2.7204099113949596, rel=1e-14)


@pytest.mark.parametrize("name, alpha, omega, _", SINGULAR)
def test_symmetric_g_is_clamped_at_both_ends(name, alpha, omega, _):
    phi, _unused = jets.variables(np.array([0.0, omega]), np.zeros(2), 1)
    g = bm.g_alpha_omega(phi, alpha, omega)
    # at phi = omega both vanish up to the precision of alpha (7-8 digits)
    assert np.abs(g.value).max() < 1e-5
    assert np.abs(g.derivative(1, 0)).max() < 1e-5
    assert g.value[0] == 0.0 and g.derivative(1, 0)[0] == 0.0


def test_verbatim_g_is_not_clamped():
    alpha, omega = bm.LSHAPE_ALPHA, bm.LSHAPE_OMEGA
    phi, _ = jets.variables(np.array([0.0]), np.zeros(1), 1)
    g = bm.g_alpha_omega(phi, alpha, omega, "verbatim")
    assert abs(g.derivative(1, 0)[0]) > 0.1


def test_g_rejects_alpha_one():
    with pytest.raises(ValueError):
        bm.g_alpha_omega(0.3, 1.0, math.pi)
    with pytest.raises(ValueError):
        bm.g_alpha_omega(0.3, -1.0, math.pi)
    with pytest.raises(ValueError):
        bm.g_alpha_omega(0.3, 0.5, math.pi, variant="other")


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 4.6), st.sampled_from(["symmetric", "verbatim"]))
def test_g_fourth_derivative_cauchy_integral(phi0, variant):
    alpha, omega = bm.LSHAPE_ALPHA, bm.LSHAPE_OMEGA
    phi, _ = jets.variables(np.array([phi0]), np.zeros(1))
    d4 = bm.g_alpha_omega(phi, alpha, omega, variant).derivative(4, 0)[0]
    # g is entire: trapezoidal rule on a circle converges exponentially,
    # unlike finite differences whose round-off is ~eps/h^4
    n, radius = 64, 0.5
    theta = 2 * np.pi * np.arange(n) / n
    vals = bm.g_alpha_omega(phi0 + radius * np.exp(1j * theta), alpha, omega, variant)
    ref = (24 / radius**4 * np.mean(vals * np.exp(-4j * theta))).real
    assert d4 == pytest.approx(ref, rel=1e-9, abs=1e-9)


def _interior_points(name, n, seed):
    """Random points of the domain with r >= 0.15 from the corner (rejection sampling)."""
    rng = np.random.default_rng(seed)
    alpha, omega, start = {k: (a, w, s) for k, a, w, s in SINGULAR}[name]
    out = []
    while len(out) < n:
        p = rng.uniform(-0.95, 0.95, 2)
        r = math.hypot(*p)
        phi = (math.atan2(p[1], p[0]) - start) % (2 * math.pi)
        if r >= 0.15 and 0.05 < phi < omega - 0.05:
            out.append(p)
    return np.array(out)


@pytest.mark.parametrize("name", ["lshape", "cusp"])
def test_gradient_and_hessian_finite_differences(name):
    u = bm.BENCHMARKS[name].exact
    pts = _interior_points(name, 50, 1)
    grad = u.gradient(pts)
    hess = u.hessian(pts)
    h = 1e-5
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    fd = np.stack([(u(pts + ex) - u(pts - ex)) / (2 * h), (u(pts + ey) - u(pts - ey)) / (2 * h)], -1)
    assert np.abs(grad - fd).max() <= 1e-8 * np.abs(grad).max()
    # Hessian from central differences of the (jet) gradient
    fdh = np.stack([(u.gradient(pts + ex) - u.gradient(pts - ex)) / (2 * h),
                    (u.gradient(pts + ey) - u.gradient(pts - ey)) / (2 * h)], -1)
    assert np.abs(hess - fdh).max() <= 1e-7 * np.abs(hess).max()


def _bilaplacian_fd(u, pts, h):
    def lap(q):
        return (u(q + [h, 0]) + u(q - [h, 0]) + u(q + [0, h]) + u(q - [0, h]) - 4 * u(q)) / h**2

    return (lap(pts + [h, 0]) + lap(pts - [h, 0]) + lap(pts + [0, h]) + lap(pts - [0, h])
            - 4 * lap(pts)) / h**2


@pytest.mark.parametrize("name", ["lshape", "cusp"])
def test_bilaplacian_nested_finite_differences(name):
    u = bm.BENCHMARKS[name].exact
    pts = _interior_points(name, 10, 2)
    exact = u.bilaplacian(pts)
    fd = _bilaplacian_fd(u, pts, 1e-3)
    np.testing.assert_allclose(exact, fd, rtol=1e-3, atol=1e-3 * np.abs(exact).max())
    np.testing.assert_array_equal(bm.BENCHMARKS[name].f(pts), exact)


def _outer_segments():
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    for i in range(4):
        p0, p1 = np.array(corners[i], float), np.array(corners[(i + 1) % 4], float)
        t = (np.arange(100) + 0.5) / 100
        pts = p0 + t[:, None] * (p1 - p0)
        d = p1 - p0
        nu = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        yield pts, nu


@pytest.mark.parametrize("name", ["lshape", "cusp"])
def test_outer_boundary_traces_vanish(name):
    bench = bm.BENCHMARKS[name]
    u = bench.exact
    checked = 0
    for pts, nu in _outer_segments():
        # keep the part of the square boundary that belongs to the domain
        phi = (np.arctan2(pts[:, 1], pts[:, 0]) - {"lshape": math.pi / 2, "cusp": math.pi / 4}[name]) % (2 * math.pi)
        inside = phi <= bench.omega
        pts = pts[inside]
        if len(pts) == 0:
            continue
        checked += len(pts)
        assert np.abs(u(pts)).max() <= 1e-10
        assert np.abs(u.gradient(pts) @ nu).max() <= 1e-10
    assert checked >= 200


@pytest.mark.parametrize("name, alpha, omega, start", SINGULAR)
def test_reentrant_edge_traces_small(name, alpha, omega, start):
    u = bm.BENCHMARKS[name].exact
    r = np.linspace(0.05, 0.95, 100)
    for angle in (start, start + omega):
        direction = np.array([math.cos(angle), math.sin(angle)])
        pts = r[:, None] * direction
        nu = np.array([-direction[1], direction[0]])
        # exact zero for exact alpha; the 7-8 digit alpha leaves a residual near 1e-6
        assert np.abs(u(pts)).max() <= 1e-5
        assert np.abs(u.gradient(pts) @ nu).max() <= 1e-5


def test_lshape_outer_point_example():
    u = bm.BENCHMARKS["lshape"].exact
    assert u(np.array([1.0, 0.5])) == 0.0
    np.testing.assert_allclose(u.gradient(np.array([[1.0, 0.5]])), 0.0, atol=1e-15)


@pytest.mark.parametrize("name", ["lshape", "cusp"])
def test_corner_evaluation_rejected(name):
    with pytest.raises(ValueError, match="corner"):
        bm.BENCHMARKS[name].exact.hessian(np.array([[0.0, 0.0]]))


def test_smooth_values():
    u = bm.smooth_manufactured()
    assert u(np.array([0.5, 0.5])) == pytest.approx(1 / 256, rel=1e-15)
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert not u.gradient(corners).any()
    t = np.linspace(0, 1, 21)
    for pts, k in ((np.c_[t, 0 * t], 1), (np.c_[t, 1 + 0 * t], 1), (np.c_[0 * t, t], 0),
                   (np.c_[1 + 0 * t, t], 0)):
        assert np.abs(u.gradient(pts)[:, k]).max() == 0.0


def test_smooth_bilaplacian_closed_form_matches_jets():
    u = bm.smooth_manufactured()
    rng = np.random.default_rng(3)
    pts = np.vstack([[0.5, 0.5], rng.uniform(0, 1, (20, 2))])
    np.testing.assert_allclose(bm.smooth_bilaplacian(pts), u.bilaplacian(pts), rtol=1e-12, atol=1e-12)
    # at the centre: p = q = 1/16, p'' = q'' = -1, p'''' = q'''' = 24
    assert bm.smooth_bilaplacian(np.array([0.5, 0.5])) == pytest.approx(24 / 16 * 2 + 2 * 1)


def test_uniform_loads():
    pts = np.random.default_rng(0).uniform(size=(5, 2))
    for name in ("dumbbell", "fourslit"):
        bench = bm.BENCHMARKS[name]
        assert not bench.has_exact
        np.testing.assert_array_equal(bench.f(pts), 1.0)


def test_unknown_benchmark():
    with pytest.raises(ValueError, match="unknown benchmark"):
        bm.get_benchmark("annulus")


def test_verbatim_registry_differs():
    pts = np.array([[-0.3, 0.4]])
    sym = bm.get_benchmark("lshape").exact(pts)
    verb = bm.get_benchmark("lshape", "verbatim").exact(pts)
    assert not np.allclose(sym, verb)


def test_triangle_quadrature_degree_five():
    bary, w = bm.triangle_quadrature()
    assert w.sum() == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(bary.sum(axis=1), 1.0, rtol=1e-15)
    # on the reference triangle: int x^a y^b = a! b! / (a + b + 2)!
    x, y = bary[:, 1], bary[:, 2]
    for a in range(6):
        for b in range(6 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert 0.5 * np.sum(w * x**a * y**b) == pytest.approx(exact, rel=1e-13)


def test_energy_error_zero():
    mesh = refine_uniform(bm.square_mesh(), 1)
    topo, geom, sigma, system, dofmap = assembled(mesh)
    zero = bm.ExactSolution(lambda x, y: 0.0 * x * y)
    assert bm.energy_error(np.zeros(dofmap.n_dofs), zero, mesh, geom, system, dofmap) == 0.0


def _smooth_h2_seminorm():
    """|u|_{H^2} of the smooth solution from exact 1D polynomial integrals."""
    p = P.polymul([0, 0, 1], P.polypow([1, -1], 2))  # x^2 (1 - x)^2
    d1, d2 = P.polyder(p), P.polyder(p, 2)

    def integral(c):
        anti = P.polyint(c)
        return P.polyval(1.0, anti) - P.polyval(0.0, anti)

    i0, i1, i2 = integral(P.polymul(p, p)), integral(P.polymul(d1, d1)), integral(P.polymul(d2, d2))
    return math.sqrt(2 * i2 * i0 + 2 * i1 * i1)


def test_energy_norm_of_smooth_solution():
    mesh = refine_uniform(bm.square_mesh(), 4)
    topo, geom, sigma, system, dofmap = assembled(mesh)
    u = bm.smooth_manufactured()
    got = bm.energy_error(np.zeros(dofmap.n_dofs), u, mesh, geom, system, dofmap)
    assert got == pytest.approx(_smooth_h2_seminorm(), rel=1e-4)


def test_smooth_error_decreases_monotonically():
    records = run(RunConfig(benchmark="square_smooth", mode="uniform", max_ndof=1000))
    errors = [r.error for r in records]
    assert len(errors) >= 5
    assert all(b < a for a, b in zip(errors, errors[1:]))
