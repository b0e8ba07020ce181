"""Low-order graph-viscosity update of the Euler subsystem.

The forward Euler step reads, for every dG node ``i``::

    m_i (u_i^+ - u_i) / tau + sum_j f(u_j) c_ij - d_ij (u_j - u_i)
                            + f(u_i^b) c_i^b - d_i (u_i^b - u_i) = 0

with d_ij = |c_ij| lambda(u_i, u_j, n_ij). The equivalent convex-combination
form over bar states is provided separately as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as _default_kernels
from ._kernels_py import flux_dot
from .discretization import Discretization
from .eos import CovolumeEOS, InadmissibleStateError


class AdmissibilityError(RuntimeError):
    """A hyperbolic update produced an inadmissible state."""


# ---------------------------------------------------------------- wavespeeds
def _primitives_1d(u, n, eos):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    rho = u[:, 0]
    vn = np.sum(u[:, 1:3] * n, axis=1) / rho
    p = eos.pressure(u)
    c = eos.sound_speed(u)
    return rho, vn, p, c


def max_wavespeed_covolume(uL, uR, n, eos: CovolumeEOS) -> np.ndarray:
    """Upper bound on the largest wavespeed of the 1D Riemann problem along ``n``."""
    rL, vL, pL, cL = _primitives_1d(uL, n, eos)
    rR, vR, pR, cR = _primitives_1d(uR, n, eos)
    g = eos.gamma
    ex = -(g - 1.0) / (2.0 * g)
    return _default_kernels._kernels_py.lambda_covolume(
        vL, pL, cL, 1.0 - eos.b * rL, pL**ex, vR, pR, cR, 1.0 - eos.b * rR, pR**ex, g
    )


def max_wavespeed_barotropic(uL, uR, n, eos) -> np.ndarray:
    """max(|v_L.n|, |v_R.n|) + max(c_L, c_R)."""
    _, vL, _, cL = _primitives_1d(uL, n, eos)
    _, vR, _, cR = _primitives_1d(uR, n, eos)
    return _default_kernels._kernels_py.lambda_barotropic(vL, cL, vR, cR)


def max_wavespeed(uL, uR, n, eos) -> np.ndarray:
    if eos.barotropic:
        return max_wavespeed_barotropic(uL, uR, n, eos)
    return max_wavespeed_covolume(uL, uR, n, eos)


def cfl_timestep(dii, masses, cfl: float, tau_max: float = np.inf) -> float:
    """tau = CFL * min_i(-m_i / (2 d_ii)) over nodes with d_ii < 0."""
    if not 0.0 < cfl < 1.0:
        raise ValueError(f"CFL must lie in (0, 1), got {cfl}")
    dii = np.asarray(dii)
    neg = dii < 0.0
    if not np.any(neg):
        return float(tau_max)
    return float(min(tau_max, cfl * np.min(-np.asarray(masses)[neg] / (2.0 * dii[neg]))))


# ---------------------------------------------------------------- boundaries
class DirichletBoundary:
    """Exterior state prescribed by ``func(points, t) -> (nb, ncomp)``."""

    kind = "dirichlet"

    def __init__(self, func):
        self.func = func

    def states(self, u_int, points, normals, t):
        return np.asarray(self.func(points, t), dtype=float)


class ReflectiveBoundary:
    """Mirror state (rho, m - 2 (m.n) n, E) at a slip wall."""

    kind = "reflective"

    def states(self, u_int, points, normals, t):
        ub = u_int.copy()
        mn = np.sum(u_int[:, 1:3] * normals, axis=1)
        ub[:, 1:3] -= 2.0 * mn[:, None] * normals
        return ub


@dataclass
class Viscosities:
    edge: np.ndarray
    boundary: np.ndarray
    diagonal: np.ndarray


class HyperbolicSolver:
    """Graph-viscosity operator bound to one discretization, EOS and boundary."""

    def __init__(self, disc: Discretization, eos, boundary=None, kernels=None):
        self.disc = disc
        self.eos = eos
        self.boundary = boundary if boundary is not None else ReflectiveBoundary()
        self.kernels = kernels if kernels is not None else _default_kernels
        self.graph = disc.graph
        self.masses = disc.masses
        g = self.graph
        self.bnodes = g.boundary_nodes
        self.bnorm = np.linalg.norm(g.c_boundary, axis=1)
        self.bnormals = g.c_boundary / self.bnorm[:, None]
        self.bpoints = disc.dg_points[self.bnodes]
        self.last_viscosities: Viscosities | None = None

    @property
    def n_components(self) -> int:
        return self.eos.n_components

    # ------------------------------------------------------------ helpers
    def _node_data(self, u):
        eos = self.eos
        if not np.all(eos.admissible(u)):
            bad = np.flatnonzero(~eos.admissible(u))
            raise InadmissibleStateError(
                f"{len(bad)} inadmissible node states, first at node {bad[0]}"
            )
        rho = u[:, 0]
        vel = np.ascontiguousarray(u[:, 1:3] / rho[:, None])
        p = np.ascontiguousarray(eos.pressure(u))
        c = np.ascontiguousarray(eos.sound_speed_from(rho, p))
        if eos.barotropic:
            a = np.ones_like(rho)
            pf = np.ones_like(rho)
        else:
            a = 1.0 - eos.b * rho
            g = eos.gamma
            pf = p ** (-(g - 1.0) / (2.0 * g))
        return vel, p, c, a, pf

    def boundary_states(self, u, t):
        return self.boundary.states(u[self.bnodes], self.bpoints, self.bnormals, t)

    def residual(self, u: np.ndarray, t: float = 0.0):
        """Return r with m (u^+ - u) / tau = -r, and the viscosities."""
        u = np.ascontiguousarray(u, dtype=float)
        g = self.graph
        vel, p, c, a, pf = self._node_data(u)
        r = flux_dot(u, vel, p, g.c_diag)
        diag_total = r.sum(axis=0)
        dii = np.zeros(len(u))
        d = np.empty(g.n_edges)
        self.kernels.edge_residual(
            u, vel, p, c, a, pf, g.edge_i, g.edge_j, g.c_ij, g.c_ji, g.edge_normals,
            g.edge_weights, float(getattr(self.eos, "gamma", 0.0)), bool(self.eos.barotropic),
            r, dii, d,
        )

        bn = self.bnodes
        ub = self.boundary_states(u, t)
        d_b = self.boundary_viscosity(u[bn], ub)
        fb = self.eos.flux(ub)
        rb = np.einsum("nkd,nd->nk", fb, g.c_boundary) - d_b[:, None] * (ub - u[bn])
        np.add.at(r, bn, rb)
        np.subtract.at(dii, bn, d_b)
        # sum_i r_i reduces to these terms by skew-symmetry of c_ij
        self.last_boundary_flux = (
            rb.sum(axis=0)
            + flux_dot(u[bn], vel[bn], p[bn], g.c_boundary).sum(axis=0)
            + 2.0 * diag_total
        )
        self.last_viscosities = Viscosities(d, d_b, dii)
        return r, self.last_viscosities

    def boundary_viscosity(self, u_in, u_b):
        lam = max_wavespeed(u_in, u_b, self.bnormals, self.eos)
        return self.bnorm * lam

    def max_timestep(self, u, cfl, t=0.0, tau_max=np.inf) -> float:
        _, visc = self.residual(u, t)
        return cfl_timestep(visc.diagonal, self.masses, cfl, tau_max)

    # ------------------------------------------------------------ updates
    def forward_euler(self, u, tau, t=0.0, residual=None, check=True):
        """One low-order step; ``residual`` may be supplied from a CFL evaluation."""
        if residual is None:
            residual = self.residual(u, t)
        r, visc = residual
        if check:
            limit = self.admissible_limit(visc)
            if tau > limit * (1.0 + 1e-12):
                raise ValueError(f"time step {tau:.3e} exceeds the admissible limit {limit:.3e}")
        u_new = u - (tau / self.masses)[:, None] * r
        if check:
            self.check_admissible(u_new)
        return u_new

    def admissible_limit(self, visc: Viscosities) -> float:
        """min_i(-m_i / (2 d_ii)), the step at which 1 + 2 tau d_ii / m_i hits zero."""
        neg = visc.diagonal < 0.0
        if not np.any(neg):
            return np.inf
        return float(np.min(-self.masses[neg] / (2.0 * visc.diagonal[neg])))

    def check_admissible(self, u):
        ok = self.eos.admissible(u)
        if not np.all(ok):
            bad = np.flatnonzero(~ok)
            raise AdmissibilityError(
                f"{len(bad)} inadmissible states after update; "
                f"min density {u[:, 0].min():.3e} at node {u[:, 0].argmin()}"
            )

    def ssp_rk3(self, u, tau, t=0.0, residual=None, check=True):
        """Three-stage strong-stability-preserving Runge-Kutta step."""
        u1 = self.forward_euler(u, tau, t, residual=residual, check=check)
        u2 = 0.75 * u + 0.25 * self.forward_euler(u1, tau, t + tau, check=check)
        return u / 3.0 + 2.0 / 3.0 * self.forward_euler(u2, tau, t + 0.5 * tau, check=check)

    def convex_forward_euler(self, u, tau, t=0.0):
        """Same step written as a convex combination of bar states (reference only)."""
        g = self.graph
        _, visc = self.residual(u, t)
        m = self.masses
        out = (1.0 + 2.0 * tau * visc.diagonal / m)[:, None] * u
        ubar_ij, ubar_ji = bar_states(u, g, visc.edge, self.eos)
        w = 2.0 * tau * visc.edge
        np.add.at(out, g.edge_i, (w / m[g.edge_i])[:, None] * ubar_ij)
        np.add.at(out, g.edge_j, (w / m[g.edge_j])[:, None] * ubar_ji)
        bn = self.bnodes
        ub = self.boundary_states(u, t)
        ubar_b = boundary_bar_states(u[bn], ub, g.c_boundary, visc.boundary, self.eos)
        np.add.at(out, bn, (2.0 * tau * visc.boundary / m[bn])[:, None] * ubar_b)
        return out

    def entropy_tally(self, u) -> float:
        return entropy_tally(u, self.masses, self.eos)


def bar_states(u, graph, d, eos):
    """Bar states (u_i + u_j)/2 - |c_ij| / (2 d_ij) (f(u_j) - f(u_i)) n_ij for both directions."""
    f = eos.flux(u)
    i, j = graph.edge_i, graph.edge_j
    avg = 0.5 * (u[i] + u[j])
    df = f[j] - f[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(d > 0.0, 0.5 / d, 0.0)
    ubar_ij = avg - s[:, None] * np.einsum("ekd,ed->ek", df, graph.c_ij)
    ubar_ji = avg + s[:, None] * np.einsum("ekd,ed->ek", df, graph.c_ji)
    return ubar_ij, ubar_ji


def boundary_bar_states(u_in, u_b, c_b, d_b, eos):
    df = eos.flux(u_b) - eos.flux(u_in)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(d_b > 0.0, 0.5 / d_b, 0.0)
    return 0.5 * (u_b + u_in) - s[:, None] * np.einsum("ekd,ed->ek", df, c_b)


def compute_graph_viscosities(u, solver: HyperbolicSolver, t=0.0) -> Viscosities:
    return solver.residual(u, t)[1]


def forward_euler_step(u, tau, solver: HyperbolicSolver, t=0.0):
    return solver.forward_euler(u, tau, t)


def ssp_rk3_step(u, tau, solver: HyperbolicSolver, t=0.0):
    return solver.ssp_rk3(u, tau, t)


def entropy_tally(u, masses, eos) -> float:
    """sum_i m_i eta(u_i)."""
    return float(masses @ eos.entropy(u))
