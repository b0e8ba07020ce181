"""Implicit theta-scheme for the potential / momentum / Lorentz-force subsystem.

The velocity is eliminated through the rotation-dilation operator
``B v = v - theta tau (v2, -v1) Omega``, which leaves one non-symmetric
elliptic problem for the potential::

    (grad phi, grad psi) + theta^2 tau^2 alpha <rho B^-1 grad phi, grad psi>_h
        = (grad phi^n, grad psi) + theta tau alpha <rho B^-1 v^n, grad psi>_h

followed by a nodewise velocity update and extrapolation to t^{n+1}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretization import Discretization
from .krylov import SolveInfo, fgmres, make_preconditioner

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThetaParams:
    theta: float
    tau: float
    alpha: float
    omega: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.tau < 0.0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def rotation(self) -> float:
        """theta * tau * Omega."""
        return self.theta * self.tau * self.omega


def _rot(v):
    """v -> (v2, -v1)."""
    out = np.empty_like(v)
    out[..., 0] = v[..., 1]
    out[..., 1] = -v[..., 0]
    return out


def rotation_dilation(v, c):
    """v - c (v2, -v1); ``c`` broadcasts against the leading axes of ``v``."""
    v = np.asarray(v, dtype=float)
    return v - np.asarray(c)[..., None] * _rot(v)


def rotation_dilation_inverse(v, c):
    """(v + c (v2, -v1)) / (1 + c^2), the exact inverse of ``rotation_dilation``."""
    v = np.asarray(v, dtype=float)
    c = np.asarray(c)[..., None]
    return (v + c * _rot(v)) / (1.0 + c * c)


def b_apply(v, params: ThetaParams):
    return rotation_dilation(v, params.rotation)


def b_inverse_apply(v, params: ThetaParams):
    """B^-1 v with c = theta tau Omega."""
    if params.rotation == 0.0:
        return np.asarray(v, dtype=float)
    return rotation_dilation_inverse(v, params.rotation)


def extrapolate(x_theta, x_n, theta: float):
    """x^{n+1} = (x^{n+theta} - (1 - theta) x^n) / theta."""
    if theta == 1.0:
        return np.array(x_theta, copy=True)
    return (x_theta - (1.0 - theta) * x_n) / theta


def kinetic_energy(disc: Discretization, rho, v) -> float:
    return 0.5 * float(disc.masses @ (rho * np.sum(v * v, axis=1)))


def field_energy(disc: Discretization, phi, alpha: float) -> float:
    return float(phi @ disc.stiffness_apply(phi)) / (2.0 * alpha)


@dataclass
class SourceStepInfo:
    iterations: int
    relative_residual: float
    solve: SolveInfo


class SourceUpdate:
    """Theta-scheme source solver on one discretization.

    Parameters
    ----------
    disc : Discretization
    alpha, omega : float
        Coupling constant and out-of-plane magnetic field.
    theta : float
        1 for backward Euler, 1/2 for Crank-Nicolson.
    tol : float
        Relative residual target ||b - A phi|| <= tol ||b|| on free nodes.
    preconditioner : {"lu", "amg", "sgs", "jacobi"}
    dirichlet_values : array, optional
        Potential on the constrained (boundary) CG nodes; zero by default.
    background_current : callable, optional
        ``t -> (N, 2)`` neutralizing current density subtracted from rho v in
        the potential equation.
    reuse_threshold : float
        The cached stiffness-only preconditioner is reused while
        theta^2 tau^2 alpha max(rho) / sqrt(1 + (theta tau Omega)^2) is below this.
    """

    def __init__(
        self,
        disc: Discretization,
        alpha: float,
        omega: float = 0.0,
        theta: float = 1.0,
        tol: float = 1e-12,
        preconditioner: str = "lu",
        restart: int = 50,
        maxiter: int = 2000,
        dirichlet_values=None,
        background_current=None,
        reuse_threshold: float = 1e-2,
    ):
        self.disc = disc
        self.alpha = float(alpha)
        self.omega = float(omega)
        self.theta = float(theta)
        self.tol = tol
        self.preconditioner = preconditioner
        self.restart = restart
        self.maxiter = maxiter
        self.background_current = background_current
        self.reuse_threshold = reuse_threshold
        self.free = disc.free
        self.constrained = disc.constrained
        self.g = (
            np.zeros(len(self.constrained))
            if dirichlet_values is None
            else np.asarray(dirichlet_values, dtype=float)
        )
        K = disc.stiffness_matrix()
        self.K_ff = K[self.free][:, self.free].tocsr()
        self._k_prec = None
        self.last_info: SourceStepInfo | None = None

    def params(self, tau: float) -> ThetaParams:
        return ThetaParams(self.theta, tau, self.alpha, self.omega)

    # ------------------------------------------------------------ operators
    def lift(self, phi_free=None) -> np.ndarray:
        phi = np.zeros(self.disc.n_cg)
        phi[self.constrained] = self.g
        if phi_free is not None:
            phi[self.free] = phi_free
        return phi

    def schur_operator_apply(self, phi, rho, params: ThetaParams) -> np.ndarray:
        """a_h(phi, psi) for every CG test function (all rows)."""
        disc = self.disc
        out = disc.stiffness_apply(phi)
        s = params.theta**2 * params.tau**2 * params.alpha
        if s != 0.0:
            w = b_inverse_apply(disc.cg_gradient_at_dg_nodes(phi), params)
            out += s * disc.dg_divergence_weak_form(w, rho)
        return out

    def assemble_rhs(self, phi_n, v_n, rho, params: ThetaParams, t: float = 0.0):
        """(grad phi^n, grad psi) + theta tau alpha <rho B^-1 v^n - m_bg, grad psi>_h."""
        disc = self.disc
        out = disc.stiffness_apply(phi_n)
        k = params.theta * params.tau * params.alpha
        if k != 0.0:
            w = rho[:, None] * b_inverse_apply(v_n, params)
            if self.background_current is not None:
                w -= self.background_current(t)
            out += k * disc.dg_divergence_weak_form(w)
        return out

    def assembled_operator(self, rho, params: ThetaParams) -> sp.csr_matrix:
        """Free-free block of a_h as a sparse matrix."""
        c = params.rotation
        s = params.theta**2 * params.tau**2 * params.alpha / (1.0 + c * c)
        tensor = np.zeros((self.disc.n_dg, 2, 2))
        tensor[:, 0, 0] = tensor[:, 1, 1] = s * rho
        tensor[:, 0, 1] = s * c * rho
        tensor[:, 1, 0] = -s * c * rho
        W = self.disc.weighted_gradient_matrix(tensor)
        A = self.disc.stiffness_matrix() + W
        return A[self.free][:, self.free].tocsr()

    def _preconditioner(self, rho, params: ThetaParams):
        c = params.rotation
        q = params.theta**2 * params.tau**2 * params.alpha * float(np.max(rho))
        q /= np.sqrt(1.0 + c * c)
        if q < self.reuse_threshold:
            if self._k_prec is None:
                self._k_prec = make_preconditioner(self.preconditioner, self.K_ff)
            return self._k_prec
        A = self.assembled_operator(rho, params)
        if self.preconditioner != "lu":
            A = (0.5 * (A + A.T)).tocsr()
        return make_preconditioner(self.preconditioner, A)

    def solve_potential(self, rhs, rho, params: ThetaParams, x0=None):
        """Solve a_h(phi, psi) = rhs(psi) on free nodes with the Dirichlet lift."""
        lift = self.lift()
        b = rhs[self.free]
        if np.any(self.g):
            b = b - self.schur_operator_apply(lift, rho, params)[self.free]

        def matvec(x):
            full = np.zeros(self.disc.n_cg)
            full[self.free] = x
            return self.schur_operator_apply(full, rho, params)[self.free]

        prec = self._preconditioner(rho, params)
        x0f = None if x0 is None else (x0 - lift)[self.free]
        x, info = fgmres(
            matvec, b, prec, x0=x0f, tol=self.tol, restart=self.restart, maxiter=self.maxiter
        )
        return self.lift(x), info

    def update_velocity(self, v_n, phi_theta, params: ThetaParams):
        """v^{n+theta} = B^-1 (v^n - theta tau grad phi^{n+theta}) at every dG node."""
        grad = self.disc.cg_gradient_at_dg_nodes(phi_theta)
        return b_inverse_apply(v_n - params.theta * params.tau * grad, params)

    # ------------------------------------------------------------ steps
    def step(self, rho, v, phi, tau: float, t: float = 0.0):
        """Advance (v, phi) by tau; returns (v^{n+1}, phi^{n+1}, v^{n+theta}, phi^{n+theta})."""
        params = self.params(tau)
        rhs = self.assemble_rhs(phi, v, rho, params, t)
        phi_th, info = self.solve_potential(rhs, rho, params, x0=phi)
        v_th = self.update_velocity(v, phi_th, params)
        self.last_info = SourceStepInfo(info.iterations, info.relative_residual, info)
        return (
            extrapolate(v_th, v, self.theta),
            extrapolate(phi_th, phi, self.theta),
            v_th,
            phi_th,
        )

    def update_conserved(self, u, phi, tau: float, t: float = 0.0):
        """Source update on conserved variables; rho and internal energy are untouched."""
        rho = u[:, 0]
        m = u[:, 1:3]
        v = m / rho[:, None]
        v_new, phi_new, _, _ = self.step(rho, v, phi, tau, t)
        out = u.copy()
        out[:, 1:3] = rho[:, None] * v_new
        if u.shape[1] == 4:
            eps = u[:, 3] - 0.5 * np.sum(m * m, axis=1) / rho
            out[:, 3] = eps + 0.5 * rho * np.sum(v_new * v_new, axis=1)
        return out, phi_new


def schur_operator_apply(solver: SourceUpdate, phi, rho, params: ThetaParams):
    return solver.schur_operator_apply(phi, rho, params)[solver.free]


def assemble_source_rhs(solver: SourceUpdate, phi_n, v_n, rho, params: ThetaParams):
    return solver.assemble_rhs(phi_n, v_n, rho, params)[solver.free]


def update_velocity(solver: SourceUpdate, v_n, phi_theta, params: ThetaParams):
    return solver.update_velocity(v_n, phi_theta, params)


def source_update_conserved(solver: SourceUpdate, u, phi, tau, t=0.0):
    return solver.update_conserved(u, phi, tau, t)
