"""Local matrices, global dof numbering and assembly of the C0IP system.

Global dofs: vertices first (``0 .. nv-1``), then edge midpoints
(``nv + edge``).  Each edge carries a patch of nine basis functions
``Q0..Q8``: ``Q0, Q1, Q2`` lie on the edge (start vertex, midpoint, end
vertex as seen from T+), ``Q3, Q4, Q5`` belong exclusively to T+ and
``Q6, Q7, Q8`` exclusively to T-.  On boundary edges the T- functions
vanish identically; their dof slots point at dof 0 and carry zeros.

The system matrix is ``B = A - J - J^T + C`` with the piecewise Hessian
stiffness ``A``, the consistency term ``J`` and the penalty term ``C``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import element_data

__all__ = [
    "SIMPSON_WEIGHTS",
    "DofMap",
    "EdgeData",
    "AssembledSystem",
    "DiscreteSolution",
    "SolverError",
    "build_dofmap",
    "ind_array",
    "local_stiffness",
    "local_rhs",
    "edge_data",
    "local_jump_matrix",
    "local_penalty_matrix",
    "assemble",
    "factorize",
    "restrict_and_solve",
]

log = logging.getLogger(__name__)

SIMPSON_WEIGHTS = np.array([1.0, 4.0, 1.0]) / 6.0


class SolverError(RuntimeError):
    """The restricted system could not be solved."""


@dataclass(frozen=True, eq=False)
class DofMap:
    n_dofs: int
    global4e: np.ndarray  # (nt, 6)
    global4s: np.ndarray  # (ne, 9)
    interior_dofs: np.ndarray
    ind: np.ndarray  # (ne, 6, 2)

    @property
    def n_interior(self):
        return len(self.interior_dofs)


@dataclass(frozen=True, eq=False)
class EdgeData:
    jump_normal: np.ndarray  # (ne, 9, 3): [grad phi_alpha(Q_l) . nu]
    mean_hess_binormal: np.ndarray  # (ne, 9): <(D^2 phi_alpha nu) . nu>


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    A: sp.csr_matrix
    J: sp.csr_matrix
    C: sp.csr_matrix
    B: sp.csr_matrix
    N: sp.csr_matrix
    b: np.ndarray

    def restricted(self, dofs):
        return (
            self.B[dofs][:, dofs].tocsc(),
            self.N[dofs][:, dofs].tocsc(),
            self.b[dofs],
        )


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    coefficients: np.ndarray
    interior_dofs: np.ndarray
    residual: float
    factor: object = None  # factorisation of the restricted matrix, if direct


def ind_array(topo):
    """Permutation table mapping patch nodes to local shape indices.

    Column 0 (T+) lists the local indices of ``P_{q+1}, M_q, P_{q+2},
    M_{q+1}, P_q, M_{q+2}``; column 1 the same pattern with ``r`` on T-.
    Boundary edges use ``r = 0`` as a placeholder.
    """
    q = topo.local_pos[:, 0]
    r = np.where(topo.is_interior, topo.local_pos[:, 1], 0)
    offsets = np.array([0, 3, 0, 3, 0, 3])
    shifts = np.array([1, 0, 2, 1, 0, 2])
    ind = np.empty((len(q), 6, 2), dtype=np.int64)
    ind[:, :, 0] = offsets + (q[:, None] + shifts) % 3
    ind[:, :, 1] = offsets + (r[:, None] + shifts) % 3
    return ind


def build_dofmap(mesh, topo):
    nv = mesh.n_vertices
    ne = topo.n_edges
    global4e = np.hstack([mesh.triangles, nv + topo.edges_of_triangle])
    ind = ind_array(topo)
    tp = topo.triangles_of_edge[:, 0]
    tm = np.where(topo.is_interior, topo.triangles_of_edge[:, 1], tp)
    plus = np.take_along_axis(global4e[tp], ind[:, :, 0], axis=1)
    minus = np.take_along_axis(global4e[tm], ind[:, 3:, 1], axis=1)
    minus[~topo.is_interior] = 0
    global4s = np.hstack([plus, minus])
    boundary_vertex = topo.boundary_vertices(nv)
    interior = np.concatenate(
        [np.flatnonzero(~boundary_vertex), nv + np.flatnonzero(topo.is_interior)]
    )
    for arr in (global4e, global4s, interior, ind):
        arr.setflags(write=False)
    return DofMap(nv + ne, global4e, global4s, interior, ind)


def local_stiffness(hessians, area):
    """``A(T)[alpha, beta] = |T| D^2 phi_alpha : D^2 phi_beta``, shape (nt, 6, 6)."""
    return np.asarray(area)[:, None, None] * np.einsum("taij,tbij->tab", hessians, hessians)


def local_rhs(f_mid, area):
    """Edge-midpoint quadrature of ``f phi_alpha``; vertex entries vanish."""
    f_mid = np.atleast_2d(np.asarray(f_mid, dtype=float))
    out = np.zeros(f_mid.shape[:-1] + (6,))
    out[..., 3:] = np.asarray(area)[..., None] / 3.0 * f_mid
    return out


def edge_data(topo, geom, elem):
    """Normal-derivative jumps at Q0..Q2 and averaged normal-normal Hessians."""
    ind = ind_array(topo)
    interior = topo.is_interior
    tp = topo.triangles_of_edge[:, 0]
    tm = np.where(interior, topo.triangles_of_edge[:, 1], tp)
    nu = geom.normal

    # [e, shape, node] normal derivatives on both sides
    gn_p = np.einsum("eanx,ex->ean", elem.grad_at_nodes[tp], nu)
    gn_m = np.einsum("eanx,ex->ean", elem.grad_at_nodes[tm], nu)
    gn_m[~interior] = 0.0
    hb_p = np.einsum("eaxy,ex,ey->ea", elem.hessians[tp], nu, nu)
    hb_m = np.einsum("eaxy,ex,ey->ea", elem.hessians[tm], nu, nu)
    hb_m[~interior] = 0.0

    ip = ind[:, :, 0]
    im = ind[:, :, 1]
    edge_p = ip[:, 0:3]
    edge_m = im[:, 2::-1]
    rows = np.arange(len(ind))[:, None, None]

    def pick(values, shapes, nodes):
        return values[rows, shapes[:, :, None], nodes[:, None, :]]

    jump = np.empty((len(ind), 9, 3))
    jump[:, 0:3] = pick(gn_p, edge_p, edge_p) - pick(gn_m, edge_m, edge_m)
    jump[:, 3:6] = pick(gn_p, ip[:, 3:6], edge_p)
    jump[:, 6:9] = -pick(gn_m, im[:, 3:6], edge_m)

    r1 = np.arange(len(ind))[:, None]
    mean = np.empty((len(ind), 9))
    mean[:, 0:3] = hb_p[r1, edge_p] + hb_m[r1, edge_m]
    mean[:, 3:6] = hb_p[r1, ip[:, 3:6]]
    mean[:, 6:9] = hb_m[r1, im[:, 3:6]]
    mean[interior] *= 0.5
    return EdgeData(jump_normal=jump, mean_hess_binormal=mean)


def local_jump_matrix(length, data):
    """``J(E)[alpha, beta] = |E| <D^2 phi_alpha nu . nu> [grad phi_beta(Q1) . nu]``.

    The average is constant and the jump affine along E, so the midpoint
    value integrates exactly.
    """
    return (
        np.asarray(length)[:, None, None]
        * data.mean_hess_binormal[:, :, None]
        * data.jump_normal[:, None, :, 1]
    )


def local_penalty_matrix(sigma, data):
    """Simpson rule for ``sigma/h_E int_E [grad phi_a . nu][grad phi_b . nu] ds``."""
    jn = data.jump_normal
    return np.asarray(sigma)[:, None, None] * np.einsum("eal,ebl,l->eab", jn, jn, SIMPSON_WEIGHTS)


def _scatter(local, dofs, n):
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh, topo, geom, sigma, f, elem=None):
    """Assemble ``A, J, C, B = A - J - J^T + C, N = A + C`` and the load ``b``.

    Parameters
    ----------
    sigma : PenaltyField or array_like
        Penalty parameter per edge.
    f : callable or float
        Right-hand side, evaluated at edge midpoints as ``f(points)`` with
        ``points`` of shape ``(n, 2)``.

    Returns
    -------
    system : AssembledSystem
    dofmap : DofMap
    """
    sigma = np.asarray(getattr(sigma, "sigma", sigma), dtype=float)
    if sigma.shape != (topo.n_edges,):
        raise ValueError("need one penalty parameter per edge")
    if elem is None:
        elem = element_data(mesh)
    dofmap = build_dofmap(mesh, topo)
    n = dofmap.n_dofs

    A = _scatter(local_stiffness(elem.hessians, geom.area), dofmap.global4e, n)
    data = edge_data(topo, geom, elem)
    J = _scatter(local_jump_matrix(geom.length, data), dofmap.global4s, n)
    C = _scatter(local_penalty_matrix(sigma, data), dofmap.global4s, n)
    B = (A - J - J.T + C).tocsr()
    N = (A + C).tocsr()

    f_mid = _evaluate(f, geom.midpoint)[topo.edges_of_triangle]
    b = np.bincount(
        dofmap.global4e.ravel(), weights=local_rhs(f_mid, geom.area).ravel(), minlength=n
    )
    return AssembledSystem(A=A, J=J, C=C, B=B, N=N, b=b), dofmap


def _evaluate(f, points):
    if callable(f):
        values = np.asarray(f(points), dtype=float)
        return np.broadcast_to(values, points.shape[:1]).astype(float)
    return np.full(len(points), float(f))


class _Factor:
    """Sparse LU factorisation of a symmetric matrix with a solve method.

    Diagonal pivots only: the restricted C0IP matrix is SPD for ``a > 1``,
    and threshold pivoting destroys the fill-reducing ordering (about ten
    times more fill for large ``a``).
    """

    def __init__(self, matrix):
        self.matrix = matrix
        self._lu = spla.splu(
            matrix,
            permc_spec="COLAMD",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )

    def solve(self, rhs, trans="N"):
        return self._lu.solve(np.asarray(rhs, dtype=float), trans=trans)

    def solve_refined(self, rhs):
        """Solve with one step of iterative refinement."""
        x = self.solve(rhs)
        return x + self.solve(rhs - self.matrix @ x)

    @property
    def shape(self):
        return self.matrix.shape


def factorize(matrix):
    """Sparse direct factorisation; an exactly singular matrix gets a tiny shift."""
    matrix = sp.csc_matrix(matrix)
    try:
        return _Factor(matrix)
    except RuntimeError:
        scale = np.abs(matrix.diagonal()).sum()
        shift = 1e-12 * (scale if scale > 0 else 1.0)
        warnings.warn(
            f"singular system matrix, shifted by {shift:.3e} (choose a > 1)",
            RuntimeWarning,
            stacklevel=2,
        )
        return _Factor((matrix + shift * sp.identity(matrix.shape[0], format="csc")).tocsc())


def restrict_and_solve(system, dofmap, method="direct", rtol=1e-10, factor=None):
    """Solve the system restricted to the interior dofs; boundary values are zero.

    ``method`` is ``"direct"`` (sparse LU, default) or ``"cg"`` (conjugate
    gradients with Jacobi preconditioning, relative residual ``rtol``, at
    most ``10 * n`` iterations).
    """
    dofs = dofmap.interior_dofs
    B_II, _, b_I = system.restricted(dofs)
    x = np.zeros(dofmap.n_dofs)
    if len(dofs) == 0:
        return DiscreteSolution(x, dofs, 0.0, factor)
    if method == "direct":
        if factor is None:
            factor = factorize(B_II)
        x_I = factor.solve_refined(b_I) if hasattr(factor, "solve_refined") else factor.solve(b_I)
    elif method == "cg":
        diag = B_II.diagonal()
        if (diag <= 0).any():
            raise SolverError("non-positive diagonal in the restricted system; use a > 1")
        precond = spla.LinearOperator(B_II.shape, matvec=lambda v: v / diag)
        x_I, info = spla.cg(B_II, b_I, rtol=rtol, atol=0.0, maxiter=10 * len(dofs), M=precond)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info}); use a > 1")
    else:
        raise ValueError(f"unknown solver method {method!r}")
    if not np.all(np.isfinite(x_I)):
        raise SolverError("solution is not finite; the restricted system is singular (use a > 1)")
    norm_b = np.linalg.norm(b_I)
    residual = np.linalg.norm(B_II @ x_I - b_I) / (norm_b if norm_b > 0 else 1.0)
    x[dofs] = x_I
    x.setflags(write=False)
    return DiscreteSolution(x, dofs, float(residual), factor)
