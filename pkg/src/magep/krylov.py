"""Flexible restarted GMRES and the preconditioners used with it."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class LinearSolverError(RuntimeError):
    """Raised when the Krylov iteration fails to reach the requested tolerance."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class SolveInfo:
    iterations: int = 0
    restarts: int = 0
    residual: float = 0.0
    rhs_norm: float = 0.0
    history: list = field(default_factory=list)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.rhs_norm if self.rhs_norm > 0 else 0.0


def fgmres(matvec, b, precond=None, x0=None, tol=1e-12, restart=50, maxiter=1000):
    """Solve A x = b to ||b - A x|| <= tol ||b|| with flexible GMRES(restart).

    Parameters
    ----------
    matvec : callable
        x -> A x.
    precond : callable, optional
        Approximate inverse r -> M^{-1} r; may change between iterations.
    maxiter : int
        Total number of inner iterations allowed.

    Returns
    -------
    x, SolveInfo

    Raises
    ------
    LinearSolverError
        If the true residual is above tolerance after ``maxiter`` iterations.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    precond = precond or (lambda r: r)
    bnorm = float(np.linalg.norm(b))
    info = SolveInfo(rhs_norm=bnorm)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        x[:] = 0.0
        return x, info
    target = tol * bnorm

    r = b - matvec(x)
    beta = float(np.linalg.norm(r))
    info.history.append(beta / bnorm)
    while beta > target:
        if info.iterations >= maxiter:
            break
        m = min(restart, maxiter - info.iterations)
        V = [r / beta]
        Z = []
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        k = 0
        for k in range(m):
            Z.append(precond(V[k]))
            w = matvec(Z[k])
            for j in range(k + 1):  # modified Gram-Schmidt, two passes
                H[j, k] = V[j] @ w
                w -= H[j, k] * V[j]
            for j in range(k + 1):
                h = V[j] @ w
                H[j, k] += h
                w -= h * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            V.append(w / H[k + 1, k] if H[k + 1, k] > 0.0 else np.zeros(n))
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            den = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = H[k, k] / den, H[k + 1, k] / den
            H[k, k] = den
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            info.iterations += 1
            info.history.append(abs(g[k + 1]) / bnorm)
            if abs(g[k + 1]) <= 0.5 * target or H[k, k] == 0.0:
                break
        kk = k + 1
        y = sla.solve_triangular(H[:kk, :kk], g[:kk])
        x += y @ np.asarray(Z[:kk])
        r = b - matvec(x)
        beta = float(np.linalg.norm(r))
        info.restarts += 1
    info.residual = beta
    if beta > target:
        raise LinearSolverError(
            f"FGMRES did not converge: relative residual {beta / bnorm:.3e} > {tol:.1e} "
            f"after {info.iterations} iterations ({info.restarts} cycles)",
            info.history,
        )
    return x, info


# ------------------------------------------------------------ preconditioners
def jacobi_preconditioner(A: sp.spmatrix):
    dinv = 1.0 / A.diagonal()
    return lambda r: dinv * r


def sgs_preconditioner(A: sp.spmatrix):
    """Symmetric Gauss-Seidel sweep (D + L) D^{-1} (D + U)."""
    A = sp.csr_matrix(A)
    lower = sp.tril(A, format="csr")
    upper = sp.triu(A, format="csr")
    d = A.diagonal()

    def apply(r):
        y = spla.spsolve_triangular(lower, r, lower=True)
        return spla.spsolve_triangular(upper, d * y, lower=False)

    return apply


def amg_preconditioner(A: sp.spmatrix):
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
    return lambda r: ml.solve(r, tol=1e-30, maxiter=1, cycle="V")


def lu_preconditioner(A: sp.spmatrix):
    """Sparse LU; minimum-degree ordering on A + A^T suits the structurally symmetric FE matrices."""
    A = sp.csc_matrix(A)
    asym = abs(A - A.T)
    symmetric = asym.nnz == 0 or asym.max() <= 1e-14 * abs(A).max()
    options = {"SymmetricMode": True} if symmetric else {}
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options=options)
    return lu.solve


PRECONDITIONERS = {
    "jacobi": jacobi_preconditioner,
    "sgs": sgs_preconditioner,
    "amg": amg_preconditioner,
    "lu": lu_preconditioner,
}


def make_preconditioner(kind: str, A: sp.spmatrix):
    try:
        factory = PRECONDITIONERS[kind]
    except KeyError:
        raise ValueError(f"unknown preconditioner {kind!r}; choose from {sorted(PRECONDITIONERS)}")
    return factory(A)
