"""Initial and exact data for the isentropic vortex and the diocotron annulus."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discretization import Discretization
from .eos import CovolumeEOS, IsothermalEOS
from .hyperbolic import DirichletBoundary, ReflectiveBoundary
from .krylov import fgmres, lu_preconditioner
from .mesh import build_disk_mesh, build_rectangle_mesh


@dataclass
class Scenario:
    """Everything a simulation needs besides the numerical parameters.

    ``background_density`` / ``background_current`` map time to dG node
    arrays and describe a neutralizing background that enters the Gauss law
    and the potential equation; both are None for a bare plasma.
    """

    name: str
    disc: Discretization
    eos: object
    boundary: object
    alpha: float
    omega: float
    u0: np.ndarray
    phi0: np.ndarray
    background_density: Optional[Callable[[float], np.ndarray]] = None
    background_current: Optional[Callable[[float], np.ndarray]] = None
    exact: Optional[Callable] = None
    info: dict = field(default_factory=dict)


# ------------------------------------------------------------------ vortex
@dataclass(frozen=True)
class VortexParams:
    bounds: tuple = ((-5.0, 5.0), (-5.0, 5.0))
    speed: tuple = (1.0, 1.0)
    beta: float = 5.0
    center: tuple = (-1.0, -1.0)
    gamma: float = 1.4
    alpha: float = 1.0

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError(f"vortex size beta must be positive, got {self.beta}")


def vortex_primitive(x, t, params: VortexParams = VortexParams()):
    """Density, velocity and pressure of the translating isentropic vortex."""
    x = np.atleast_2d(x)
    g, beta = params.gamma, params.beta
    xc = np.asarray(params.center) + np.asarray(params.speed) * t
    xb = x - xc
    r2 = np.sum(xb**2, axis=1)
    T = 1.0 - (g - 1.0) * beta**2 / (8.0 * g * np.pi**2) * np.exp(1.0 - r2)
    rho = T ** (1.0 / (g - 1.0))
    amp = beta / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    v = np.empty_like(xb)
    v[:, 0] = params.speed[0] - amp * xb[:, 1]
    v[:, 1] = params.speed[1] + amp * xb[:, 0]
    return rho, v, rho**g


def vortex_exact(x, t, params: VortexParams = VortexParams()) -> np.ndarray:
    """Conserved state (rho, m, E) of the vortex at points ``x`` and time ``t``."""
    rho, v, p = vortex_primitive(x, t, params)
    return CovolumeEOS(params.gamma).from_primitive(rho, v, p)


def build_vortex(refinement: int, params: VortexParams = VortexParams()) -> Scenario:
    """Vortex on a uniform 2^refinement x 2^refinement grid (4^(refinement+1) dofs)."""
    n = 2**refinement
    disc = Discretization(build_rectangle_mesh(params.bounds, (n, n)))
    eos = CovolumeEOS(params.gamma)
    pts = disc.dg_points

    def exact(x, t):
        return vortex_exact(x, t, params)

    cache = {}

    def background(t):
        # the source step and the Gauss diagnostic usually ask for the same t
        if cache.get("t") != t:
            cache["t"], cache["u"] = t, vortex_exact(pts, t, params)
        return cache["u"]

    def bg_density(t):
        return background(t)[:, 0]

    def bg_current(t):
        return background(t)[:, 1:3]

    return Scenario(
        name="vortex",
        disc=disc,
        eos=eos,
        boundary=DirichletBoundary(exact),
        alpha=params.alpha,
        omega=0.0,
        u0=vortex_exact(pts, 0.0, params),
        phi0=np.zeros(disc.n_cg),
        background_density=bg_density,
        background_current=bg_current,
        exact=exact,
        info={"refinement": refinement, "params": params, "dofs": disc.n_dg},
    )


# --------------------------------------------------------------- diocotron
@dataclass(frozen=True)
class DiocotronParams:
    r0: float = 6.0
    r1: float = 8.0
    R: float = 16.0
    rho_min: float = 1e-6
    rho_max: float = 1.0
    beta: float = 1e6
    delta: float = 0.1
    mode: int = 3
    theta_T: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.r0 < self.r1 < self.R:
            raise ValueError("radii must satisfy 0 < r0 < r1 < R")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError(f"delta must lie in [0, 1/2), got {self.delta}")
        if not 0.0 < self.rho_min < self.rho_max:
            raise ValueError("densities must satisfy 0 < rho_min < rho_max")

    @property
    def alpha(self) -> float:
        return self.beta**2 / self.rho_max

    @property
    def omega(self) -> float:
        return self.beta**2


def diocotron_initial_density(x, params: DiocotronParams = DiocotronParams()):
    x = np.atleast_2d(x)
    r = np.hypot(x[:, 0], x[:, 1])
    angle = np.arctan2(x[:, 1], x[:, 0])
    pert = 1.0 - params.delta + params.delta * np.sin(params.mode * angle)
    inside = (r > params.r0) & (r < params.r1)
    return np.where(inside, params.rho_max * pert, params.rho_min)


def solve_gauss_law(disc: Discretization, rho, alpha, dirichlet=None, tol=1e-12, prec=None):
    """phi in H_h with (grad phi, grad w) = alpha <rho, w>_h and Dirichlet data."""
    free, con = disc.free, disc.constrained
    K = disc.stiffness_matrix()
    phi = np.zeros(disc.n_cg)
    if dirichlet is not None:
        phi[con] = dirichlet
    b = alpha * disc.lumped_cg_load(rho) - K @ phi
    Kff = K[free][:, free].tocsr()
    prec = prec or lu_preconditioner(Kff)
    x, info = fgmres(lambda y: Kff @ y, b[free], prec, tol=tol)
    phi[free] = x
    return phi, info


def drift_velocity(disc: Discretization, phi, omega: float) -> np.ndarray:
    """-(grad phi x Omega) / |Omega|^2 = (-d2 phi, d1 phi) / Omega at dG nodes."""
    g = disc.cg_gradient_at_dg_nodes(phi)
    return np.column_stack([-g[:, 1], g[:, 0]]) / omega


def build_diocotron(refinement: int, params: DiocotronParams = DiocotronParams(), tol=1e-12,
                    alpha=None, omega=None):
    """Perturbed annulus in drift equilibrium; ``alpha``/``omega`` override the beta scaling."""
    alpha = params.alpha if alpha is None else float(alpha)
    omega = params.omega if omega is None else float(omega)
    if omega == 0.0:
        raise ValueError("the diocotron setup needs a non-zero magnetic field")
    disc = Discretization(build_disk_mesh(params.R, refinement))
    eos = IsothermalEOS(params.theta_T)
    rho = diocotron_initial_density(disc.dg_points, params)
    phi, _ = solve_gauss_law(disc, rho, alpha, tol=tol)
    v = drift_velocity(disc, phi, omega)
    u0 = np.column_stack([rho, rho[:, None] * v])
    return Scenario(
        name="diocotron",
        disc=disc,
        eos=eos,
        boundary=ReflectiveBoundary(),
        alpha=alpha,
        omega=omega,
        u0=u0,
        phi0=phi,
        info={"refinement": refinement, "params": params, "dofs": disc.n_dg},
    )


def timescale_report(alpha: float, omega: float, rho: float):
    """Cyclotron, plasma and diocotron frequencies (omega_d = inf when Omega = 0)."""
    w_c = abs(omega)
    w_p = np.sqrt(rho * alpha)
    w_d = np.inf if w_c == 0.0 else rho * alpha / w_c
    return w_c, w_p, w_d
