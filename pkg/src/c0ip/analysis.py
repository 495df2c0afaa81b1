"""Discrete stability constant and 1-norm condition estimate of the C0IP matrix.

The principal eigenvalue of ``B x = lambda N x`` on the interior dofs is the
actual coercivity constant of the discrete bilinear form with respect to the
mesh-dependent norm; the penalty choice guarantees ``lambda_1 >= 1 - 1/sqrt(a)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import factorize

__all__ = [
    "EigenResult",
    "StabilityReport",
    "principal_eigenvalue",
    "condition_estimate_1norm",
    "inverse_norm1_estimate",
    "stability_report",
]

log = logging.getLogger(__name__)


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EigenResult:
    value: float
    iterations: int
    converged: bool
    residual: float  # eigen-residual norm (Lanczos) or last relative Rayleigh quotient change


@dataclass(frozen=True)
class StabilityReport:
    lambda1: Optional[float]
    kappa: float
    cond1: Optional[float]


def _restrict(matrix, dofs):
    matrix = sp.csr_matrix(matrix)
    if dofs is None:
        return matrix.tocsc()
    dofs = np.asarray(dofs)
    return matrix[dofs][:, dofs].tocsc()


def principal_eigenvalue(B, N, interior_dofs=None, method="lanczos", tol=1e-8, maxiter=500,
                         factor=None):
    """Smallest eigenvalue of the pencil ``(B, N)`` restricted to the interior dofs.

    Both methods apply ``B^{-1} N`` through one sparse factorisation of ``B``.

    ``method="lanczos"`` (default) runs ARPACK in shift-invert mode about 0,
    i.e. Krylov-accelerated inverse iteration.  ``method="inverse"`` is
    plain inverse iteration: solve ``B y = N x``, normalise in the ``N``
    norm, stop when the Rayleigh quotient ``x^T B x / x^T N x`` changes by
    less than ``tol`` (relative); start vector all ones.  Plain inverse
    iteration converges with the ratio of the two smallest eigenvalues,
    which is close to 1 on fine symmetric meshes, so it is only practical
    on small problems.

    Parameters
    ----------
    B, N : sparse matrices on all dofs (or already restricted when
        ``interior_dofs`` is None).
    factor : optional factorisation of the restricted ``B`` to reuse.

    Returns
    -------
    EigenResult
    """
    B_II = _restrict(B, interior_dofs)
    N_II = _restrict(N, interior_dofs)
    n = B_II.shape[0]
    if n == 0:
        raise ValueError("no interior degrees of freedom")
    if factor is None:
        factor = factorize(B_II)
    if method == "lanczos" and n > 2:
        return _lanczos(B_II, N_II, factor, tol, maxiter)
    if method not in ("lanczos", "inverse"):
        raise ValueError(f"unknown eigenvalue method {method!r}")
    return _inverse_iteration(B_II, N_II, factor, tol, maxiter)


def _lanczos(B_II, N_II, factor, tol, maxiter):
    n = B_II.shape[0]
    op = spla.LinearOperator(B_II.shape, matvec=factor.solve, dtype=float)
    v0 = np.ones(n)
    try:
        vals, vecs = spla.eigsh(
            B_II, k=1, M=N_II, sigma=0.0, which="LM", OPinv=op, v0=v0,
            tol=min(tol, 1e-10), maxiter=max(maxiter, 10 * n),
        )
    except spla.ArpackNoConvergence as exc:
        warnings.warn(f"ARPACK did not converge: {exc}", ConvergenceWarning, stacklevel=3)
        return _inverse_iteration(B_II, N_II, factor, tol, maxiter)
    x = vecs[:, 0]
    lam = float(vals[0])
    residual = np.linalg.norm(B_II @ x - lam * (N_II @ x)) / max(np.linalg.norm(N_II @ x), 1e-300)
    return EigenResult(lam, 0, True, float(residual))


def _inverse_iteration(B_II, N_II, factor, tol, maxiter):
    x = np.ones(B_II.shape[0])
    x /= math.sqrt(x @ (N_II @ x))
    rq = x @ (B_II @ x)
    change = math.inf
    for it in range(1, maxiter + 1):
        y = factor.solve(N_II @ x)
        norm = math.sqrt(y @ (N_II @ y))
        if not np.isfinite(norm) or norm == 0.0:
            raise FloatingPointError("inverse iteration broke down; the pencil is singular")
        x = y / norm
        new = x @ (B_II @ x)
        change = abs(new - rq) / max(abs(new), np.finfo(float).tiny)
        rq = new
        if change < tol:
            return EigenResult(float(rq), it, True, float(change))
    warnings.warn(
        f"inverse iteration stopped after {maxiter} steps, relative change {change:.2e}",
        ConvergenceWarning,
        stacklevel=3,
    )
    return EigenResult(float(rq), maxiter, False, float(change))


def inverse_norm1_estimate(solve, solve_transpose, n, maxiter=5):
    """Hager-Higham lower bound for ``||M^{-1}||_1`` from solves only.

    ``solve(v)`` returns ``M^{-1} v`` and ``solve_transpose(v)`` returns
    ``M^{-T} v``.  Deterministic: no random start vectors.
    """
    if n == 1:
        return float(abs(solve(np.ones(1))[0]))
    x = np.full(n, 1.0 / n)
    est = 0.0
    sign_old = None
    j_old = -1
    for it in range(maxiter):
        y = solve(x)
        est_new = float(np.abs(y).sum())
        sign = np.where(y >= 0, 1.0, -1.0)
        if it > 0 and (est_new <= est or (sign_old is not None and np.array_equal(sign, sign_old))):
            est = max(est, est_new)
            break
        est = est_new
        sign_old = sign
        z = solve_transpose(sign)
        j = int(np.argmax(np.abs(z)))
        if it > 0 and (np.abs(z).max() <= z @ x or j == j_old):
            break
        j_old = j
        x = np.zeros(n)
        x[j] = 1.0
    # alternating-sign safeguard
    alt = (-1.0) ** np.arange(n) * (1.0 + np.arange(n) / (n - 1))
    est_alt = 2.0 * np.abs(solve(alt)).sum() / (3.0 * n)
    return float(max(est, est_alt))


def condition_estimate_1norm(B, interior_dofs=None, factor=None):
    """Lower bound ``||B||_1 * est(||B^{-1}||_1)`` of the 1-norm condition number."""
    B_II = _restrict(B, interior_dofs)
    n = B_II.shape[0]
    if n == 0:
        raise ValueError("no interior degrees of freedom")
    if factor is None:
        factor = factorize(B_II)
    norm_b = float(abs(B_II).sum(axis=0).max())
    try:
        factor.solve(np.zeros(n), trans="T")
        solve_t = lambda v: factor.solve(v, trans="T")  # noqa: E731
    except TypeError:
        solve_t = factor.solve  # symmetric matrix
    return norm_b * inverse_norm1_estimate(factor.solve, solve_t, n)


def stability_report(system, dofmap, a, compute_lambda1=True, compute_cond=True, factor=None,
                     method="lanczos"):
    """Eigenvalue and condition estimate for an assembled system on its interior dofs."""
    dofs = dofmap.interior_dofs
    if factor is None and (compute_lambda1 or compute_cond):
        factor = factorize(system.B[dofs][:, dofs])
    lam = cond = None
    if compute_lambda1:
        lam = principal_eigenvalue(system.B, system.N, dofs, method=method, factor=factor).value
    if compute_cond:
        cond = condition_estimate_1norm(system.B, dofs, factor=factor)
    return StabilityReport(lambda1=lam, kappa=1.0 - 1.0 / math.sqrt(a), cond1=cond)
