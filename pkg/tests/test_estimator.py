import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c0ip import benchmarks as bm
from c0ip.afem import RunConfig, run
from c0ip.assembly import restrict_and_solve
from c0ip.estimator import dorfler_mark, estimate
from c0ip.mesh import build_topology, refine_uniform

from conftest import assembled, small_mesh
from oracles import P2Triangle, brute_force_min_marking, gauss_legendre_segment


def _nodes(mesh, topo):
    mids = 0.5 * (mesh.coords[topo.edge_vertices[:, 0]] + mesh.coords[topo.edge_vertices[:, 1]])
    return np.vstack([mesh.coords, mids])


def _estimate(mesh, coeffs, f, a=2.0):
    topo, geom, sigma, system, dofmap = assembled(mesh, a=a, f=f)
    return topo, geom, estimate(mesh, topo, geom, sigma, coeffs, dofmap, f)


def test_zero_solution_zero_load():
    mesh = refine_uniform(bm.lshape_mesh(), 1)
    topo = build_topology(mesh)
    n = mesh.n_vertices + topo.n_edges
    _, _, est = _estimate(mesh, np.zeros(n), 0.0)
    assert est.eta_total == 0.0
    assert not est.eta2_per_triangle.any()


def test_affine_interpolant_has_no_interior_jumps():
    mesh = refine_uniform(bm.cusp_mesh(), 1)
    topo = build_topology(mesh)
    pts = _nodes(mesh, topo)
    coeffs = 0.4 - 1.2 * pts[:, 0] + 0.7 * pts[:, 1]
    _, _, est = _estimate(mesh, coeffs, 0.0)
    assert np.abs(est.gradient_jump[topo.is_interior]).max() < 1e-20
    assert np.abs(est.hessian_jump).max() < 1e-20
    assert not est.volume.any()


def test_affine_function_with_zero_boundary_trace():
    # constant is affine and has zero normal derivative everywhere
    mesh = refine_uniform(bm.fourslit_mesh(), 1)
    topo = build_topology(mesh)
    _, _, est = _estimate(mesh, np.full(mesh.n_vertices + topo.n_edges, 3.0), 0.0)
    assert est.eta_total < 1e-10  # round-off in the nodal gradients, amplified by sigma


def test_constant_hessian_jump_across_diagonal():
    mesh = small_mesh("square")  # diagonal (0,0)-(1,1)
    topo = build_topology(mesh)
    pts = _nodes(mesh, topo)
    d = (pts[:, 0] - pts[:, 1]) / math.sqrt(2)
    # squared distance to the diagonal on the lower triangle, zero above: C1 across the diagonal
    coeffs = np.where(d > 0, d * d, 0.0)
    _, geom, est = _estimate(mesh, coeffs, 0.0)
    e = np.flatnonzero(topo.is_interior)[0]
    jump = 2.0  # nu^T (H+ - H-) nu with H = 2 nu nu^T on one side
    assert est.hessian_jump[e] == pytest.approx(geom.length[e] ** 2 * jump**2, rel=1e-12)
    assert est.gradient_jump[e] < 1e-24
    assert not est.hessian_jump[~topo.is_interior].any()


def test_volume_term_constant_load():
    mesh = small_mesh("square")
    topo = build_topology(mesh)
    _, geom, est = _estimate(mesh, np.zeros(mesh.n_vertices + topo.n_edges), 2.0)
    # |T|^2 * |T|/3 * (3 * 4)
    np.testing.assert_allclose(est.volume, geom.area**3 / 3 * 12, rtol=1e-14)


def test_contributions_nonnegative_and_total():
    mesh = refine_uniform(bm.lshape_mesh(), 2)
    bench = bm.BENCHMARKS["lshape"]
    topo, geom, sigma, system, dofmap = assembled(mesh, f=bench.f)
    x = restrict_and_solve(system, dofmap).coefficients
    est = estimate(mesh, topo, geom, sigma, x, dofmap, bench.f)
    for arr in (est.eta2_per_triangle, est.volume, est.gradient_jump, est.hessian_jump):
        assert (arr >= 0).all()
    per_edge = est.gradient_jump + est.hessian_jump
    expected = est.volume + per_edge[topo.edges_of_triangle].sum(axis=1)
    np.testing.assert_allclose(est.eta2_per_triangle, expected, rtol=1e-14)
    assert est.eta_total == pytest.approx(math.sqrt(expected.sum()))


def test_gradient_jump_simpson_against_gauss():
    mesh = refine_uniform(small_mesh("skewed"), 1)
    topo, geom, sigma, system, dofmap = assembled(mesh)
    rng = np.random.default_rng(8)
    x = rng.standard_normal(dofmap.n_dofs)
    est = estimate(mesh, topo, geom, sigma, x, dofmap, 0.0)
    # independent P2 gradients from a monomial fit, Gauss quadrature on each edge
    tri_fit = {}
    for t, tri in enumerate(mesh.triangles):
        ref = P2Triangle(*mesh.coords[tri])
        tri_fit[t] = (ref, x[dofmap.global4e[t]])
    for e in range(topo.n_edges):
        p0, p1 = mesh.coords[topo.edge_vertices[e]]
        pts, wts = gauss_legendre_segment(p0, p1, n=4)
        nu = geom.normal[e]
        total = 0.0
        for p, w in zip(pts, wts):
            tp, tm = topo.triangles_of_edge[e]
            ref, c = tri_fit[tp]
            jump = c @ ref.gradients(p) @ nu
            if tm >= 0:
                ref, c = tri_fit[tm]
                jump -= c @ ref.gradients(p) @ nu
            total += w * jump * jump
        expected = sigma.sigma[e] ** 2 / geom.length[e] * total
        assert est.gradient_jump[e] == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_dorfler_examples():
    np.testing.assert_array_equal(dorfler_mark([4, 3, 2, 1], 0.5), [0, 1])
    np.testing.assert_array_equal(dorfler_mark([1, 2, 3, 4], 0.5), [2, 3])
    np.testing.assert_array_equal(dorfler_mark([0.5, 0.0, 2.0, 1.0], 1.0), [0, 2, 3])
    for n in (1, 7, 10, 33):
        assert len(dorfler_mark(np.ones(n), 0.3)) == math.ceil(0.3 * n)


def test_dorfler_ties_by_smaller_index():
    np.testing.assert_array_equal(dorfler_mark([1, 2, 2, 2], 0.4), [1, 2])


def test_dorfler_rejects_theta():
    for theta in (0.0, -0.1, 1.5, float("nan")):
        with pytest.raises(ValueError):
            dorfler_mark([1.0, 2.0], theta)


def test_dorfler_zero_vector():
    assert dorfler_mark(np.zeros(5), 0.5).size == 0


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(0.0, 100.0, allow_subnormal=False), min_size=1, max_size=12),
    st.floats(0.01, 1.0),
)
def test_dorfler_minimal_against_brute_force(eta2, theta):
    marked = dorfler_mark(eta2, theta)
    total = sum(eta2)
    if total == 0:
        assert marked.size == 0
        return
    assert sum(eta2[i] for i in marked) >= theta * total * (1 - 1e-12)
    assert len(marked) == brute_force_min_marking(eta2, theta)


# eta / error on the smooth square problem, levels 3..6 of uniform refinement
FROZEN_EFFICIENCY = [3.8823671, 4.3183929, 4.5314160, 4.6337201]


def test_efficiency_ratio_smooth_problem():
    records = run(RunConfig(benchmark="square_smooth", mode="uniform", max_ndof=5000))
    ratios = [r.eta / r.error for r in records[3:7]]
    assert len(ratios) == 4
    for got, frozen in zip(ratios, FROZEN_EFFICIENCY):
        assert abs(got / frozen - 1) <= 0.25
    assert max(ratios) / min(ratios) < 1.25
