"""Quadratic Lagrange shape functions on triangles via barycentric coordinates.

Local enumeration: shape functions 0, 1, 2 belong to the vertices P0, P1, P2
(``lambda_j (2 lambda_j - 1)``), shape function ``3 + j`` to the midpoint of
the edge opposite P_j (``4 lambda_k lambda_l``).  The six interpolation nodes
use the same enumeration.

All functions are vectorised over a leading triangle axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NODE_BARYCENTRIC",
    "P2ElementData",
    "barycentric_gradients",
    "p2_gradients",
    "p2_gradients_at_nodes",
    "p2_hessians",
    "p2_values",
    "element_data",
]

# barycentric coordinates of P0, P1, P2, M0, M1, M2
NODE_BARYCENTRIC = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ]
)

_OTHERS = ((1, 2), (2, 0), (0, 1))


def barycentric_gradients(vertices):
    """Constant gradients of the three barycentric coordinates.

    Solves ``[[1, 1, 1], [P0, P1, P2]] G = [[0, 0], [1, 0], [0, 1]]`` for
    ``G`` whose rows are the gradients.

    Parameters
    ----------
    vertices : array_like, shape (..., 3, 2)

    Returns
    -------
    ndarray, shape (..., 3, 2)
    """
    vertices = np.asarray(vertices, dtype=float)
    lhs = np.ones(vertices.shape[:-2] + (3, 3))
    lhs[..., 1:, :] = np.swapaxes(vertices, -1, -2)
    rhs = np.zeros(vertices.shape[:-2] + (3, 2))
    rhs[..., 1, 0] = 1.0
    rhs[..., 2, 1] = 1.0
    det = np.linalg.det(lhs)
    span = vertices - vertices[..., :1, :]
    scale = np.abs(span).max(axis=(-1, -2))
    bad = np.abs(det) <= 1e-14 * np.maximum(scale, np.finfo(float).tiny) ** 2
    if np.any(bad):
        raise ValueError("degenerate triangle: barycentric system is singular")
    return np.linalg.solve(lhs, rhs)


def p2_values(bary):
    """Shape function values at points given in barycentric coordinates (..., 3)."""
    lam = np.asarray(bary, dtype=float)
    out = np.empty(lam.shape[:-1] + (6,))
    for j, (k, l) in enumerate(_OTHERS):
        out[..., j] = lam[..., j] * (2.0 * lam[..., j] - 1.0)
        out[..., 3 + j] = 4.0 * lam[..., k] * lam[..., l]
    return out


def p2_gradients(grad_lambda, bary):
    """Gradients of the six shape functions at barycentric points.

    Parameters
    ----------
    grad_lambda : (nt, 3, 2)
    bary : (npts, 3)

    Returns
    -------
    ndarray, shape (nt, 6, npts, 2)
        Entry ``[t, alpha, n]`` is the gradient of shape ``alpha`` at point ``n``.
    """
    g = np.asarray(grad_lambda, dtype=float)
    lam = np.asarray(bary, dtype=float)
    nt, npts = g.shape[0], lam.shape[0]
    out = np.empty((nt, 6, npts, 2))
    for j, (k, l) in enumerate(_OTHERS):
        out[:, j] = (4.0 * lam[:, j] - 1.0)[None, :, None] * g[:, None, j, :]
        out[:, 3 + j] = 4.0 * (
            lam[:, k][None, :, None] * g[:, None, l, :]
            + lam[:, l][None, :, None] * g[:, None, k, :]
        )
    return out


def p2_gradients_at_nodes(grad_lambda):
    """Gradients of the six shape functions at the six local nodes.

    Returns an array of shape ``(nt, 6, 6, 2)`` indexed ``[t, shape, node]``.
    """
    return p2_gradients(grad_lambda, NODE_BARYCENTRIC)


def p2_hessians(grad_lambda):
    """Constant Hessians of the six shape functions, shape ``(nt, 6, 2, 2)``."""
    g = np.asarray(grad_lambda, dtype=float)
    outer = g[:, :, None, :, None] * g[:, None, :, None, :]  # (nt, 3, 3, 2, 2)
    hess = np.empty(g.shape[:1] + (6, 2, 2))
    for j, (k, l) in enumerate(_OTHERS):
        hess[:, j] = 4.0 * outer[:, j, j]
        hess[:, 3 + j] = 4.0 * (outer[:, k, l] + outer[:, l, k])
    return hess


@dataclass(frozen=True, eq=False)
class P2ElementData:
    grad_lambda: np.ndarray  # (nt, 3, 2)
    grad_at_nodes: np.ndarray  # (nt, 6, 6, 2): [t, shape, node]
    hessians: np.ndarray  # (nt, 6, 2, 2)


def element_data(mesh):
    """Barycentric gradients, nodal shape gradients and Hessians for all triangles."""
    grad_lambda = barycentric_gradients(mesh.coords[mesh.triangles])
    return P2ElementData(
        grad_lambda=grad_lambda,
        grad_at_nodes=p2_gradients_at_nodes(grad_lambda),
        hessians=p2_hessians(grad_lambda),
    )
